#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "rhh/riccati.hpp"

using namespace rhh;

TEST_CASE("psi matches the Heston Riccati solution") {
  const auto p = oracle::heston_params();
  const auto kn = build_multifactor(PowerKernel{1.0}, 1);
  const RiccatiGrid grid{0.5, 8000};
  for (cplx w : {cplx(0.5, 3.0), cplx(0.5, -10.0), cplx(0.3, 0.0), cplx(1.0, 0.0)}) {
    const auto sol = solve_psi(w, kn, p, JumpLaw::none(), grid);
    cplx C, D;
    oracle::heston_cd(w, 0.5, C, D);
    CAPTURE(w);
    CHECK(std::abs(sol.values.back() - D) < 1e-7);
    // Midpoint of the grid as well.
    oracle::heston_cd(w, 0.25, C, D);
    CHECK(std::abs(sol.values[4000] - D) < 1e-7);
  }
}

TEST_CASE("psi vanishes at w = 0 and at w = 1") {
  const auto p = ModelParams::table1();
  const auto kn = build_multifactor(PowerKernel{p.alpha}, 20);
  const auto law = JumpLaw::exponential(1.0);
  for (cplx w : {cplx(0.0), cplx(1.0)}) {
    const auto sol = solve_psi(w, kn, p, law, RiccatiGrid{0.2, 400});
    for (const auto& v : sol.values) CHECK(std::abs(v) < 1e-12);
  }
}

TEST_CASE("psi stays in the left half-plane along the Lewis line") {
  const auto p = ModelParams::table1();
  const auto kn = build_multifactor(PowerKernel{p.alpha}, 20);
  const auto law = JumpLaw::exponential(1.0);
  for (double u : {1.0, 20.0, 200.0}) {
    const auto sol = solve_psi(cplx(0.5, u), kn, p, law, RiccatiGrid{0.1, 1000});
    CHECK(sol.max_positive_real <= 1e-9);
    REQUIRE(sol.factor_values.size() == 1001 * 20);
    // psi is the weighted sum of the factors.
    cplx sum = 0.0;
    for (std::size_t j = 0; j < 20; ++j) sum += kn.weights[j] * sol.factor(1000, j);
    CHECK(std::abs(sum - sol.values.back()) < 1e-10 * (1.0 + std::abs(sum)));
  }
}

TEST_CASE("phi with a single factor solves the logistic equation") {
  // alpha = 1: phi' = b phi + (c/2) phi^2 from phi(0) = w int h.
  auto p = oracle::heston_params();
  const auto kn = build_multifactor(PowerKernel{1.0}, 1);
  const auto law = JumpLaw::none();
  const auto h = make_h_forcing(p, law, kn);
  const double a = 0.5 * p.c, b = p.b, T = 0.3;
  for (cplx w : {cplx(-1e-3, 0.0), cplx(-2e-3, 5e-3), cplx(-1e-4, -0.2)}) {
    const auto sol = solve_phi(w, kn, p, law, h, RiccatiGrid{T, 8000});
    const cplx y0 = w * h.exp_moment(0.0);
    const double e = std::exp(b * T);
    const cplx expect = b * y0 * e / (b - a * y0 * (e - 1.0));
    CAPTURE(w);
    CHECK(std::abs(sol.values.front() - y0) < 1e-12 * std::abs(y0));
    CHECK(std::abs(sol.values.back() - expect) < 1e-5 * std::abs(expect));
  }
}

TEST_CASE("h forcing is the scaled resolvent") {
  auto p = oracle::heston_params();
  const auto kn = build_multifactor(PowerKernel{1.0}, 1);
  const auto h = make_h_forcing(p, JumpLaw::none(), kn);
  // -1e4 (2/delta) c1 with c1 = -1/2.
  CHECK(h.scale == doctest::Approx(1e4 / kVixWindow));
  for (double t : {0.0, 0.02, 0.05})
    CHECK(h_eval(t, h) == doctest::Approx(h.scale * std::exp(p.b * (kVixWindow - t))).epsilon(1e-6));
  CHECK(h_eval(kVixWindow + 0.01, h) == 0.0);
  const double x = 7.0;
  const double exact = h.scale * std::exp(p.b * kVixWindow) * (1.0 - std::exp(-(x + p.b) * kVixWindow)) / (x + p.b);
  CHECK(h.exp_moment(x) == doctest::Approx(exact).epsilon(1e-6));
}

TEST_CASE("solution CSV dump") {
  const auto p = ModelParams::table1();
  const auto kn = build_multifactor(PowerKernel{p.alpha}, 5);
  const auto sol = solve_psi(cplx(0.5, 1.0), kn, p, JumpLaw::none(), RiccatiGrid{0.1, 10});
  std::ostringstream os;
  write_csv(os, sol);
  std::istringstream in(os.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 12);
  CHECK(os.str().rfind("t,re,im", 0) == 0);
}
