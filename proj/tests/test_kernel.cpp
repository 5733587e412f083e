#include <doctest.h>

#include <cmath>
#include <vector>

#include "rhh/errors.hpp"
#include "rhh/kernel.hpp"
#include "rhh/numerics.hpp"

using namespace rhh;

TEST_CASE("power kernel integral") {
  const PowerKernel k{0.7};
  const auto q = integrate([&](double s) { return k(s); }, 1e-12, 0.5, 1e-12);
  // The singular piece [0, 1e-12] contributes t^alpha / Gamma(alpha + 1) there.
  CHECK(q.value + k.integral(1e-12) == doctest::Approx(k.integral(0.5)).epsilon(1e-8));
  CHECK(k.integral(0.5) == doctest::Approx(std::pow(0.5, 0.7) / std::tgamma(1.7)));
  CHECK(kernel_eval(2.0, k) == doctest::Approx(std::pow(2.0, -0.3) / std::tgamma(0.7)));
}

TEST_CASE("alpha = 1 is the exact single factor") {
  const auto kn = build_multifactor(PowerKernel{1.0}, 20);
  REQUIRE(kn.size() == 1);
  CHECK(kn.weights[0] == doctest::Approx(1.0));
  CHECK(kn.rates[0] == doctest::Approx(0.0));
}

TEST_CASE("multi-factor weights are positive and rates increase") {
  for (std::size_t n : {1u, 5u, 20u, 50u}) {
    const auto kn = build_multifactor(PowerKernel{0.506}, n);
    REQUIRE(kn.size() == n);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(kn.weights[j] > 0.0);
      if (j > 0) CHECK(kn.rates[j] > kn.rates[j - 1]);
    }
    CHECK(kn.integral(0.3) == doctest::Approx(integrate([&](double s) { return kn(s); }, 0.0, 0.3, 1e-12).value));
  }
}

TEST_CASE("L1 kernel distance shrinks with the number of factors") {
  const PowerKernel k{0.506};
  const double d10 = kernel_l1_distance(k, build_multifactor(k, 10), 1.0);
  const double d20 = kernel_l1_distance(k, build_multifactor(k, 20), 1.0);
  const double d50 = kernel_l1_distance(k, build_multifactor(k, 50), 1.0);
  CHECK(d20 < d10);
  CHECK(d50 < d20);
}

TEST_CASE("Mittag-Leffler against high-precision values") {
  struct Case {
    double a, b, z, value;
  };
  // 40-digit series evaluations (tests/oracles/generate.py).
  const Case cases[] = {
      {0.5, 1.0, -1.0, 0.42758357615580700441},   {0.5, 1.0, -3.0, 0.17900115118138995042},
      {0.75, 1.0, -2.0, 0.20207848341295445435},  {0.506, 1.0, -0.5, 0.61526985728276945153},
      {0.506, 0.506, -1.5, 0.082916867065996146825}, {0.9, 0.9, 1.2, 3.8744224478937707318},
      {0.6, 1.6, -4.0, 0.22011645951073303947},
  };
  for (const auto& c : cases) {
    CAPTURE(c.a);
    CAPTURE(c.z);
    CHECK(mittag_leffler(c.a, c.b, c.z) == doctest::Approx(c.value).epsilon(1e-10));
  }
}

TEST_CASE("Mittag-Leffler closed forms") {
  for (double z : {-3.0, -0.4, 0.0, 0.8, 2.5}) CHECK(mittag_leffler(1.0, 1.0, z) == doctest::Approx(std::exp(z)));
  // E_{1/2}(-x) = exp(x^2) erfc(x).
  for (double x : {0.2, 1.0, 2.0, 4.0, 10.0})
    CHECK(mittag_leffler(0.5, 1.0, -x) == doctest::Approx(std::exp(x * x) * std::erfc(x)).epsilon(1e-9));
  CHECK(mittag_leffler(0.8, 2.0, 0.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(mittag_leffler(0.0, 1.0, 1.0), ValidationError);
}

TEST_CASE("resolvent of the single factor is exponential") {
  const auto kn = build_multifactor(PowerKernel{1.0}, 1);
  const std::vector<double> grid{0.0, 0.02, 0.05, 1.0 / 12.0};
  const double b = -2.008;
  const auto r = resolvent_one(b, kn, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(r[i] == doctest::Approx(std::exp(b * grid[i])).epsilon(1e-9));
}

TEST_CASE("multi-factor resolvent converges to the Mittag-Leffler resolvent") {
  // r(t) = E_alpha(b t^alpha) for the exact kernel.
  const double alpha = 0.506, b = -2.008;
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 240.0);
  auto max_error = [&](std::size_t n) {
    const auto r = resolvent_one(b, build_multifactor(PowerKernel{alpha}, n), grid);
    double e = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      e = std::max(e, std::abs(r[i] - mittag_leffler(alpha, 1.0, b * std::pow(grid[i], alpha))));
    return e;
  };
  const double e10 = max_error(10), e20 = max_error(20), e50 = max_error(50);
  CHECK(e20 < e10);
  CHECK(e50 < e20);
  CHECK(e50 < 1e-2);
}
