// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion; pass
// criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rhh/analysis.hpp"
#include "rhh/calibrate.hpp"
#include "rhh/pricing.hpp"
#include "rhh/simulate.hpp"
#include "rhh/transforms.hpp"

using namespace rhh;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

MultiFactorKernel lift(double alpha, std::size_t n) { return build_multifactor(PowerKernel{alpha}, n); }

Outcome martingale() {
  const auto p = ModelParams::table1();
  double worst = 0.0;
  for (double T : {0.05, 0.1, 0.5}) {
    const LogReturnTransform tr(p, JumpLaw::exponential(1.0), lift(p.alpha, 50), TransformOptions{2000, 2000});
    worst = std::max(worst, std::abs(tr(cplx(0.0), T) - 1.0));
    worst = std::max(worst, std::abs(tr(cplx(1.0), T) - 1.0));
  }
  return {worst <= 1e-8, "max |Psi(0)-1|, |Psi(1)-1| = " + fmt("%.2e", worst)};
}

// Lewis call price from the closed-form Heston transform, Gauss-Legendre on
// growing panels until the integrand is negligible.
double heston_lewis_call(double k, double T, double kappa, double theta, double xi, double rho, double v0) {
  auto cf = [&](std::complex<double> u) {
    const std::complex<double> beta_u = kappa - rho * xi * u;
    const auto d = std::sqrt(beta_u * beta_u - xi * xi * (u * u - u));
    const auto g = (beta_u - d) / (beta_u + d);
    const auto e = std::exp(-d * T);
    const auto C = kappa * theta / (xi * xi) * ((beta_u - d) * T - 2.0 * std::log((1.0 - g * e) / (1.0 - g)));
    const auto D = (beta_u - d) / (xi * xi) * (1.0 - e) / (1.0 - g * e);
    return std::exp(C + D * v0);
  };
  auto integrand = [&](double u) {
    const std::complex<double> w(0.5, u);
    return (std::exp(std::complex<double>(0.0, -u * k)) * cf(w)).real() / (u * u + 0.25);
  };
  // 20-point Gauss-Legendre nodes on [-1, 1].
  static const double x[10] = {0.0765265211334973, 0.2277858511416451, 0.3737060887154195, 0.5108670019508271,
                               0.6360536807265150, 0.7463319064601508, 0.8391169718222188, 0.9122344282513259,
                               0.9639719272779138, 0.9931285991850949};
  static const double wts[10] = {0.1527533871307258, 0.1491729864726037, 0.1420961093183820, 0.1316886384491766,
                                 0.1181945319615184, 0.1019301198172404, 0.0832767415767048, 0.0626720483341091,
                                 0.0406014298003869, 0.0176140071391521};
  double sum = 0.0, a = 0.0, width = 0.5;
  for (int panel = 0; panel < 4000; ++panel) {
    const double b = a + width;
    double s = 0.0;
    for (int i = 0; i < 10; ++i) {
      const double m = 0.5 * (a + b), h = 0.5 * (b - a);
      s += wts[i] * (integrand(m - h * x[i]) + integrand(m + h * x[i]));
    }
    s *= 0.5 * (b - a);
    sum += s;
    if (std::abs(s) < 1e-18 && a > 50.0) break;
    a = b;
    width = std::min(width * 1.05, 5.0);
  }
  return 1.0 - std::exp(0.5 * k) / kPi * sum;
}

Outcome heston_limit() {
  auto p = ModelParams::table1();
  p.alpha = 1.0;
  const double T = 0.25;
  const LogReturnTransform tr(p, JumpLaw::none(), lift(1.0, 1), TransformOptions{20000, 2000});
  const double kappa = -p.b, theta = p.beta / kappa, xi = std::sqrt(p.c);
  double worst = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double k = -0.1 + 0.02 * i;
    const double price = spx_option(OptionKind::call, k, T, 1.0, tr, SpxQuadrature{1e-13}).price;
    const double ref = heston_lewis_call(k, T, kappa, theta, xi, p.rho, p.sigma0_sq);
    worst = std::max(worst, std::abs(price - ref) / ref);
  }
  return {worst <= 1e-6, "max relative error over 11 strikes = " + fmt("%.2e", worst)};
}

Outcome deterministic_limit() {
  auto p = ModelParams::table1();
  p.c = 1e-8;
  p.b = 0.0;
  p.lambda_j = 0.0;
  const auto law = JumpLaw::none();
  const auto kn = lift(p.alpha, 20);
  const LogReturnTransform tr(p, law, kn, TransformOptions{2000, 2000});
  const Vix2Transform vix(p, law, kn, TransformOptions{2000, 2000});
  const double a1 = p.alpha + 1.0;
  auto int_g0 = [&](double t0, double t1) {
    return p.sigma0_sq * (t1 - t0) + p.beta * (std::pow(t1, a1) - std::pow(t0, a1)) / std::tgamma(a1 + 1.0);
  };
  double spx_err = 0.0, vix_err = 0.0;
  for (double T : {0.05, 0.25}) {
    const double sigma = std::sqrt(int_g0(0.0, T) / T);
    for (double k : {-0.2, -0.05, 0.0, 0.05}) {
      const double price = spx_option(OptionKind::call, k, T, 1.0, tr, SpxQuadrature{1e-12}).price;
      spx_err = std::max(spx_err, std::abs(price - oracle::black_call(1.0, std::exp(k), T, sigma)));
    }
    const double deterministic = std::sqrt(1e4 / kVixWindow * int_g0(T, T + kVixWindow));
    const double fut = vix_future(T, vix, 1e-12).price;
    vix_err = std::max(vix_err, std::abs(fut - deterministic) / deterministic);
  }
  return {spx_err <= 1e-5 && vix_err <= 1e-6,
          "SPX max abs error " + fmt("%.2e", spx_err) + ", VIX future max rel error " + fmt("%.2e", vix_err)};
}

Outcome comparison() {
  const auto p = ModelParams::table1();
  const auto law = JumpLaw::exponential(1.0);
  const auto kn = lift(p.alpha, 20);
  const RiccatiGrid grid{0.25, 1000};
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> imag(-60.0, 60.0), re_neg(-2e-2, -1e-5), im_small(-0.5, 0.5);
  double worst = 0.0;
  const auto psi_half = solve_psi(cplx(0.5), kn, p, law, grid);
  for (int i = 0; i < 20; ++i) {
    const auto s = solve_psi(cplx(0.5, imag(rng)), kn, p, law, grid);
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      worst = std::max(worst, s.values[k].real() - psi_half.values[k].real());
      worst = std::max(worst, psi_half.values[k].real());
    }
  }
  const auto h = make_h_forcing(p, law, kn);
  RiccatiOptions opts;
  opts.divergence_cap = 1e8;
  for (int i = 0; i < 20; ++i) {
    const cplx w(re_neg(rng), im_small(rng));
    const auto s = solve_phi(w, kn, p, law, h, grid, opts);
    const auto r = solve_phi(cplx(w.real()), kn, p, law, h, grid, opts);
    for (std::size_t k = 0; k < s.values.size(); ++k)
      worst = std::max(worst, s.values[k].real() - r.values[k].real());
  }
  return {worst <= 1e-9, "largest violation " + fmt("%.2e", std::max(worst, 0.0))};
}

Outcome convergence() {
  const auto p = ModelParams::table1();
  const auto law = JumpLaw::exponential(1.0);
  const PowerKernel k{p.alpha};
  const RiccatiGrid grid{0.5, 2000};
  const cplx w(0.5, 3.0);
  std::vector<double> gaps, dist;
  for (std::size_t n : {10u, 20u, 40u}) {
    const auto a = solve_psi(w, lift(p.alpha, n), p, law, grid);
    const auto b = solve_psi(w, lift(p.alpha, 2 * n), p, law, grid);
    double g = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) g = std::max(g, std::abs(a.values[i] - b.values[i]));
    gaps.push_back(g);
    dist.push_back(kernel_l1_distance(k, lift(p.alpha, n), 0.5));
  }
  const bool pass = gaps[1] < gaps[0] && gaps[2] < gaps[1] && dist[1] < dist[0] && dist[2] < dist[1];
  std::ostringstream os;
  os.precision(3);
  os << "sup gaps " << gaps[0] << ", " << gaps[1] << ", " << gaps[2] << "; L1 " << dist[0] << ", " << dist[1]
     << ", " << dist[2];
  return {pass, os.str()};
}

Outcome monte_carlo() {
  const auto p = ModelParams::table1();
  const auto law = JumpLaw::exponential(1.0);
  const auto kn = lift(p.alpha, 20);
  const double T = 0.1;
  SimConfig cfg;
  cfg.n_paths = 100000;
  cfg.seed = 42;
  const auto s = simulate_terminal(p, law, kn, T, cfg);
  const LogReturnTransform tr(p, law, kn);
  const Vix2Transform vix(p, law, kn);
  const double call = spx_option(OptionKind::call, 0.0, T, 1.0, tr).price;
  const double fut = vix_future(T, vix).price;
  const double k_atm = std::log(fut);
  const double put = vix_option(OptionKind::put, k_atm, T, vix).price;
  const auto mc_call = mc_price(McInstrument::spx_call, 0.0, s);
  const auto mc_fut = mc_price(McInstrument::vix_future, 0.0, s);
  const auto mc_put = mc_price(McInstrument::vix_put, k_atm, s);
  const double z1 = std::abs(mc_call.value - call) / mc_call.std_error;
  const double z2 = std::abs(mc_fut.value - fut) / mc_fut.std_error;
  const double z3 = std::abs(mc_put.value - put) / mc_put.std_error;
  std::ostringstream os;
  os.precision(3);
  os << "SE multiples: SPX call " << z1 << ", VIX future " << z2 << ", VIX put " << z3;
  return {z1 <= 3.0 && z2 <= 3.0 && z3 <= 3.0, os.str()};
}

Outcome skew_decay() {
  std::vector<double> maturities;
  for (double x : {-5.5, -5.0, -4.5, -4.0, -3.5}) maturities.push_back(std::exp(x));
  // At T = e^-5.5 the ATM total deviation is about 5e-3, so dk = 1e-3 still
  // carries smile curvature; dk = 1e-5 is converged. The lift is widened until
  // the fitted power stops moving.
  PricingSetup setup;
  setup.factors = 200;
  setup.partition.rho_max = 1e8;
  setup.transform = TransformOptions{2000, 2000};
  setup.spx = SpxQuadrature{1e-12};
  const auto fit = skew_decay_fit(ModelParams::table1(), maturities, 1e-5, setup);
  const auto coarse = skew_decay_fit(ModelParams::table1(), maturities, 1e-3, setup);
  std::ostringstream os;
  os.precision(4);
  os << "power " << fit.power << ", R^2 " << fit.r_squared << " (dk = 1e-3 gives " << coarse.power
     << ")";
  return {std::abs(fit.power + 0.597) <= 0.05 && fit.r_squared >= 0.99, os.str()};
}

Outcome sensitivity() {
  SurfaceGrid grid;
  grid.spx_maturities = {};
  grid.vix_maturities = {0.05};
  grid.vix_log_moneyness = {-0.05, 0.0, 0.1, 0.2, 0.4};
  PricingSetup setup;
  setup.transform = TransformOptions{500, 500};
  const auto alpha_rows = sensitivity_sweep(ModelParams::table1(), "alpha", {0.506, 0.6, 0.9}, grid, setup);
  const std::size_t m = grid.vix_log_moneyness.size();
  // The smile level is the ATM implied volatility; wing ordering is reported only.
  auto ordered = [&](std::size_t j) {
    const double a = alpha_rows[j].point.implied_vol, b = alpha_rows[m + j].point.implied_vol,
                 c = alpha_rows[2 * m + j].point.implied_vol;
    return std::isfinite(a) && a < b && b < c;
  };
  const bool monotone = ordered(1);
  std::size_t ordered_strikes = 0;
  for (std::size_t j = 0; j < m; ++j) ordered_strikes += ordered(j) ? 1 : 0;
  const auto rho_rows = sensitivity_sweep(ModelParams::table1(), "rho", {-0.9, -0.737, 0.0, 0.5}, grid, setup);
  double spread = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t r = 1; r < 4; ++r)
      spread = std::max(spread, std::abs(rho_rows[r * m + j].point.implied_vol - rho_rows[j].point.implied_vol));
  std::ostringstream os;
  os.precision(4);
  os << "ATM VIX IV at alpha 0.506/0.6/0.9: " << alpha_rows[1].point.implied_vol << "/"
     << alpha_rows[m + 1].point.implied_vol << "/" << alpha_rows[2 * m + 1].point.implied_vol
     << " (ordered at " << ordered_strikes << "/" << m << " strikes); max rho spread " << spread;
  return {monotone && spread <= 1e-10, os.str()};
}

Outcome affine() {
  auto p = ModelParams::table1();
  p.lambda_j = 0.0;
  const auto law = JumpLaw::exponential(1.0);
  const auto kn = lift(p.alpha, 20);
  const InitialCurve curve(p);
  const double spot = vix2_spot(curve, kn, p, law);
  const double swap = 1e4 * variance_swap_rate(0.0, curve, kn, p, law);
  const double rel1 = std::abs(spot - swap) / spot;

  const auto q = ModelParams::table1();
  const Vix2Transform tr(q, law, lift(q.alpha, 20), TransformOptions{2000, 2000});
  double rel2 = 0.0;
  for (double T : {0.05, 0.1, 0.5}) {
    const double m = tr.expectation(T);
    const double eps = 1e-6 / m;
    const double fd = (1.0 - tr(cplx(-eps), T).real()) / eps;
    rel2 = std::max(rel2, std::abs(fd - m) / m);
  }
  return {rel1 <= 1e-10 && rel2 <= 1e-3,
          "spot vs swap rel " + fmt("%.2e", rel1) + ", slope vs E[VIX^2] rel " + fmt("%.2e", rel2)};
}

Outcome calibration() {
  const auto truth = ModelParams::table1();
  const PricingSetup setup;
  const auto quotes = generate_quotes(truth, QuoteGrid::standard(), setup);
  ModelParams start = truth;
  start.alpha *= 1.2;
  start.rho *= 0.8;
  start.b *= 1.2;
  start.c *= 0.8;
  start.lambda_j *= 1.2;
  start.beta *= 0.8;
  start.sigma0_sq *= 1.2;
  CalibrationConfig cfg;
  cfg.budget = 400;
  cfg.setup = setup;
  const auto r = calibrate_run(start, ParamBounds::defaults(), quotes, cfg);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  const double worst = std::max({rel(r.params.rho, truth.rho), rel(r.params.b, truth.b), rel(r.params.c, truth.c),
                                 rel(r.params.lambda_j, truth.lambda_j)});
  const double alpha_gap = std::abs(r.params.alpha - truth.alpha);
  std::ostringstream os;
  os.precision(3);
  os << quotes.size() << " quotes, objective " << r.objective << " after " << r.evaluations
     << " evaluations, max rel error (rho,b,c,Lambda) " << worst << ", |alpha gap| " << alpha_gap;
  return {worst <= 0.05 && alpha_gap <= 0.02 && r.objective <= 1e-4, os.str()};
}

Outcome contour() {
  const auto p = ModelParams::table1();
  const auto law = JumpLaw::exponential(1.0);
  const auto kn = lift(p.alpha, 20);
  const Vix2Transform vix(p, law, kn);
  double vix_gap = 0.0;
  for (double T : {0.05, 0.1}) {
    const double z_r = -1.0 / (2.0 * vix.expectation(T));
    const double F = vix_future(T, vix).price;
    for (double m : {-0.05, 0.0, 0.2, 0.5}) {
      const double k = std::log(F) + m;
      const double a = vix_option(OptionKind::put, k, T, vix, VixInversionConfig{z_r, 0.0, 1e-10}).price;
      const double b = vix_option(OptionKind::put, k, T, vix, VixInversionConfig{0.5 * z_r, 0.0, 1e-10}).price;
      vix_gap = std::max(vix_gap, std::abs(a - b));
    }
  }
  const LogReturnTransform tr(p, law, kn);
  double spx_gap = 0.0;
  for (double T : {0.05, 0.1})
    for (double k : {-0.2, -0.05, 0.0, 0.05}) {
      const auto base = spx_option(OptionKind::call, k, T, 1.0, tr, SpxQuadrature{1e-11});
      SpxQuadrature wide{1e-11};
      wide.lambda_max = 2.0 * base.bound;
      spx_gap = std::max(spx_gap, std::abs(spx_option(OptionKind::call, k, T, 1.0, tr, wide).price - base.price));
    }
  return {vix_gap <= 1e-7 && spx_gap <= 1e-8,
          "VIX put gap " + fmt("%.2e", vix_gap) + ", SPX gap " + fmt("%.2e", spx_gap)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "martingale identities", martingale},
      {2, "Heston limit", heston_limit},
      {3, "deterministic limit", deterministic_limit},
      {4, "comparison inequalities", comparison},
      {5, "multi-factor convergence", convergence},
      {6, "Monte Carlo vs Fourier", monte_carlo},
      {7, "skew decay power", skew_decay},
      {8, "sensitivity signs", sensitivity},
      {9, "affine consistency", affine},
      {10, "synthetic calibration recovery", calibration},
      {11, "contour robustness", contour},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
