#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rhh/transforms.hpp"

using namespace rhh;

namespace {

LogReturnTransform rough_log_transform() {
  const auto p = ModelParams::table1();
  return LogReturnTransform(p, JumpLaw::exponential(1.0), build_multifactor(PowerKernel{p.alpha}, 20),
                            TransformOptions{500, 500});
}

}  // namespace

TEST_CASE("log-return transform against the Heston closed form") {
  const auto p = oracle::heston_params();
  const LogReturnTransform tr(p, JumpLaw::none(), build_multifactor(PowerKernel{1.0}, 1),
                              TransformOptions{8000, 8000});
  struct Case {
    cplx w;
    double re, im;
  };
  // E[exp(w X_{0.5})] at 40 digits (tests/oracles/generate.py).
  const Case cases[] = {{cplx(0.5, 3.0), 0.916295721714053953, 0.0120374963317209285},
                        {cplx(0.5, -10.0), 0.449807366334150224, -0.155619416897035361},
                        {cplx(0.3, 0.0), 0.997934916681269444, 0.0}};
  for (const auto& c : cases) {
    const cplx v = tr(c.w, 0.5);
    CAPTURE(c.w);
    CHECK(std::abs(v - cplx(c.re, c.im)) < 1e-8);
  }
}

TEST_CASE("log-return transform is a martingale transform") {
  const auto tr = rough_log_transform();
  for (double T : {0.05, 0.5}) {
    CHECK(std::abs(tr(cplx(0.0), T) - 1.0) < 1e-12);
    CHECK(std::abs(tr(cplx(1.0), T) - 1.0) < 1e-10);
    const double at_half = tr(cplx(0.5), T).real();
    CHECK(at_half < 1.0);
    for (double u : {1.0, 10.0, 100.0}) CHECK(std::abs(tr(cplx(0.5, u), T)) <= at_half + 1e-12);
  }
}

TEST_CASE("transform values are memoized") {
  const auto tr = rough_log_transform();
  const std::size_t before = tr.cache_size();
  const cplx a = tr(cplx(0.5, 2.0), 0.1);
  CHECK(tr.cache_size() == before + 1);
  const cplx b = tr(cplx(0.5, 2.0), 0.1);
  CHECK(tr.cache_size() == before + 1);
  CHECK(a == b);
  CHECK(std::abs(std::exp(tr.log_value(cplx(0.5, 2.0), 0.1)) - a) < 1e-14);
}

TEST_CASE("VIX^2 transform under Heston") {
  const auto p = oracle::heston_params();
  const Vix2Transform tr(p, JumpLaw::none(), build_multifactor(PowerKernel{1.0}, 1));
  // v0 = theta: the VIX^2 expectation is flat at 1e4 theta.
  CHECK(tr.spot() == doctest::Approx(400.0).epsilon(1e-6));
  CHECK(tr.expectation(0.1) == doctest::Approx(400.0).epsilon(1e-6));
  CHECK(std::abs(tr(cplx(0.0), 0.1) - 1.0) < 1e-12);
  // VIX^2 = A + B V_T is affine in the CIR state, so its Laplace transform
  // follows from the Heston one at w B.
  const double delta = kVixWindow;
  const double B = 1e4 * (1.0 - std::exp(-oracle::kappa * delta)) / (oracle::kappa * delta);
  const double A = 1e4 * oracle::theta - B * oracle::theta;
  const double T = 0.3;
  for (cplx w : {cplx(-1e-3, 0.0), cplx(-5e-4, 2e-3)}) {
    // E[exp(s V_T)] for CIR: exp(C_v + D_v v0) with the Heston F at u = 0
    // reduces to the logistic equation used by solve_phi.
    const cplx s = w * B;
    const double k = oracle::kappa, sig2 = oracle::xi * oracle::xi;
    const double e = std::exp(-k * T);
    const cplx denom = 1.0 - s * sig2 / (2.0 * k) * (1.0 - e);
    const cplx expect =
        std::exp(w * A + s * e * oracle::v0 / denom - 2.0 * k * oracle::theta / sig2 * std::log(denom));
    CAPTURE(w);
    CHECK(std::abs(tr(w, T) - expect) < 1e-6 * std::abs(expect));
  }
}

TEST_CASE("VIX^2 expectation equals the slope of the Laplace transform") {
  const auto p = ModelParams::table1();
  const Vix2Transform tr(p, JumpLaw::exponential(1.0), build_multifactor(PowerKernel{p.alpha}, 20),
                         TransformOptions{1000, 1000});
  for (double T : {0.05, 0.2}) {
    const double m = tr.expectation(T);
    const double eps = 1e-6 / m;
    const double slope = -(tr.log_laplace(cplx(-eps), T).real()) / eps;
    CHECK(slope == doctest::Approx(m).epsilon(1e-4));
  }
  CHECK(tr.spot() > 0.0);
}
