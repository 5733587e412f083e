#include "rhh/pricing.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <sstream>

#include "rhh/errors.hpp"
#include "rhh/numerics.hpp"

namespace rhh {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kInterpolationTolerance = 1e-13;

cplx erf_series(cplx z) {
  // erf z = 2/sqrt(pi) sum_n (-1)^n z^{2n+1} / (n! (2n+1))
  const cplx z2 = z * z;
  cplx term = z;
  cplx sum = z;
  for (int n = 1; n < 5000; ++n) {
    term *= -z2 / static_cast<double>(n);
    const cplx add = term / static_cast<double>(2 * n + 1);
    sum += add;
    if (std::abs(add) <= 1e-17 * std::abs(sum)) break;
  }
  return 2.0 / kSqrtPi * sum;
}

// erfc z for Re z > 0 by the continued fraction
// erfc z = e^{-z^2}/sqrt(pi) * 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))),
// evaluated with the modified Lentz method.
cplx erfc_fraction(cplx z) {
  constexpr double tiny = 1e-300;
  cplx f = z;
  cplx c = f;
  cplx d = 0.0;
  for (int n = 1; n < 5000; ++n) {
    const double a = 0.5 * n;
    d = z + a * d;
    if (std::norm(d) < tiny) d = tiny;
    c = z + a / c;
    if (std::norm(c) < tiny) c = tiny;
    d = 1.0 / d;
    const cplx delta = c * d;
    f *= delta;
    if (std::norm(delta - 1.0) < 1e-32) break;
  }
  return std::exp(-z * z) / (kSqrtPi * f);
}

// Piecewise Chebyshev interpolant of a smooth function on [0, inf), used for
// the log-transforms along the inversion lines. Panels double in length and
// are split until the 33-point and 17-point Lobatto interpolants agree. The
// panel layout depends only on the function, so every strike of a maturity
// samples the transform at the same (memoized) points.
class LogInterpolant {
 public:
  LogInterpolant(std::function<cplx(double)> f, double first, double atol)
      : f_(std::move(f)), next_len_(first), atol_(atol) {}

  cplx operator()(double u) {
    while (u > end_) extend();
    auto it = std::lower_bound(panels_.begin(), panels_.end(), u,
                               [](const Panel& p, double x) { return p.b < x; });
    return eval(*it, u, 1);
  }
  double panel_end(std::size_t i) {
    while (panels_.size() <= i) extend();
    return panels_[i].b;
  }

 private:
  static constexpr int kNodes = 33;
  struct Panel {
    double a = 0.0, b = 0.0;
    std::array<cplx, kNodes> values{};
  };

  static double node(int j) { return std::cos(kPi * j / (kNodes - 1)); }

  // Barycentric Lobatto interpolation using every stride-th node.
  static cplx eval(const Panel& p, double u, int stride) {
    const double x = (2.0 * u - p.a - p.b) / (p.b - p.a);
    const int last = (kNodes - 1) / stride;
    cplx num = 0.0;
    double den = 0.0;
    for (int i = 0; i <= last; ++i) {
      const double diff = x - node(i * stride);
      if (diff == 0.0) return p.values[i * stride];
      double w = (i % 2 == 0) ? 1.0 : -1.0;
      if (i == 0 || i == last) w *= 0.5;
      num += (w / diff) * p.values[i * stride];
      den += w / diff;
    }
    return num / den;
  }

  void extend() {
    add(end_, end_ + next_len_, 0);
    end_ += next_len_;
    next_len_ *= 2.0;
  }

  void add(double a, double b, int depth) {
    Panel p;
    p.a = a;
    p.b = b;
    for (int j = 0; j < kNodes; ++j) p.values[j] = f_(0.5 * (a + b) + 0.5 * (b - a) * node(j));
    double worst = 0.0;
    for (int j = 1; j < kNodes; j += 2) {
      const cplx coarse = eval(p, 0.5 * (a + b) + 0.5 * (b - a) * node(j), 2);
      const cplx v = p.values[j];
      const double err = std::abs(coarse - v);
      const double allowed = std::max(atol_ / std::min(1.0, std::exp(v.real())), 1e-13 * std::abs(v));
      worst = std::max(worst, err / allowed);
    }
    if (worst > 1.0 && depth < 30) {
      add(a, 0.5 * (a + b), depth + 1);
      add(0.5 * (a + b), b, depth + 1);
      return;
    }
    panels_.push_back(p);
  }

  std::function<cplx(double)> f_;
  std::vector<Panel> panels_;
  double end_ = 0.0;
  double next_len_;
  double atol_;
};

}  // namespace

cplx complex_erf(cplx z) {
  if (z.real() < 0.0) return -complex_erf(-z);
  if (std::abs(z) < 2.5 || z.real() < 1.5) return erf_series(z);
  return 1.0 - erfc_fraction(z);
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double black_price(OptionKind kind, double forward, double strike, double T, double sigma) {
  const double sd = sigma * std::sqrt(T);
  if (sd <= 0.0)
    return kind == OptionKind::call ? std::max(forward - strike, 0.0)
                                    : std::max(strike - forward, 0.0);
  const double d1 = std::log(forward / strike) / sd + 0.5 * sd;
  const double d2 = d1 - sd;
  if (kind == OptionKind::call) return forward * norm_cdf(d1) - strike * norm_cdf(d2);
  return strike * norm_cdf(-d2) - forward * norm_cdf(-d1);
}

double black_vega(double forward, double strike, double T, double sigma) {
  const double sd = sigma * std::sqrt(T);
  if (sd <= 0.0) return 0.0;
  const double d1 = std::log(forward / strike) / sd + 0.5 * sd;
  return forward * std::sqrt(T) * kInvSqrt2Pi * std::exp(-0.5 * d1 * d1);
}

PriceResult spx_option(OptionKind kind, double k, double T, double S0,
                       const LogReturnTransform& transform, const SpxQuadrature& quad) {
  if (!(S0 > 0.0) || !(T > 0.0) || !std::isfinite(k))
    throw ValidationError("SPX option needs S0 > 0, T > 0 and a finite log-strike");
  if (!(quad.tolerance > 0.0)) throw ValidationError("quadrature tolerance must be positive");
  const double x = std::log(S0) - k;
  const double scale = std::sqrt(S0 * std::exp(k)) / kPi;
  LogInterpolant psi([&](double lambda) { return transform.log_value(cplx(0.5, lambda), T); },
                     quad.first_panel, kInterpolationTolerance);
  auto integrand = [&](double lambda) {
    const cplx e = std::exp(cplx(0.0, lambda * x) + psi(lambda));
    return e.real() / (0.25 + lambda * lambda);
  };
  auto tail = [&](double lambda) { return scale * std::exp(psi(lambda).real()) / lambda; };

  PriceResult r;
  double integral = 0.0, a = 0.0, len = quad.first_panel;
  const bool forced = quad.lambda_max > 0.0;
  for (int panel = 0;; ++panel) {
    double b = a + len;
    if (forced) b = std::min(b, quad.lambda_max);
    const double panel_tol = quad.tolerance / scale / (4.0 * std::pow(2.0, panel));
    const auto q = integrate(integrand, a, b, panel_tol);
    integral += q.value;
    r.quadrature_error += scale * q.error;
    a = b;
    len *= 2.0;
    r.truncation = tail(b);
    r.bound = b;
    if (forced ? b >= quad.lambda_max : r.truncation <= 0.1 * quad.tolerance) break;
    if (b > quad.lambda_limit) {
      std::ostringstream msg;
      msg << "SPX quadrature did not converge: tail estimate " << r.truncation << " at lambda "
          << b;
      throw NumericalError(msg.str(), r.truncation);
    }
  }
  const double call = S0 - scale * integral;
  r.price = kind == OptionKind::call ? call : call - S0 + std::exp(k);
  return r;
}

namespace {

// E[(E - sqrt(X+))^+] for X ~ N(m, s^2).
double gaussian_vix_put(double strike, double m, double s) {
  const double e2 = strike * strike;
  auto density = [&](double y) {
    const double d = (y * y - m) / s;
    return 2.0 * y * y * kInvSqrt2Pi / s * std::exp(-0.5 * d * d);
  };
  std::vector<double> breaks{0.0, strike};
  for (int j = -8; j <= 8; ++j) {
    const double v = m + j * s;
    if (v > 0.0 && v < e2) breaks.push_back(std::sqrt(v));
  }
  std::sort(breaks.begin(), breaks.end());
  double root_part = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    if (breaks[i + 1] > breaks[i]) root_part += integrate(density, breaks[i], breaks[i + 1], 1e-16).value;
  return strike * norm_cdf((e2 - m) / s) - root_part;
}

}  // namespace

PriceResult vix_option(OptionKind kind, double k, double T, const Vix2Transform& transform,
                       const VixInversionConfig& cfg) {
  if (!(T > 0.0) || !std::isfinite(k)) throw ValidationError("VIX option needs T > 0 and finite k");
  if (!(cfg.tolerance > 0.0)) throw ValidationError("quadrature tolerance must be positive");
  const double mean = transform.expectation(T);
  const double z_r = cfg.z_r != 0.0 ? cfg.z_r : -1.0 / (2.0 * mean);
  if (!(z_r < 0.0)) throw ValidationError("contour abscissa z_r must be negative");
  const double strike = std::exp(k);

  auto solve_lambda = [&](cplx z) {
    try {
      return transform.log_laplace(z, T, cfg.divergence_cap);
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "VIX^2 transform failed on the contour Re z = " << z_r << " (" << e.what()
          << "); retry with a smaller |z_r|";
      throw NumericalError(msg.str(), e.achieved());
    }
  };

  // Gaussian reference with the first two cumulants of VIX_T^2.
  double ref_m = mean, ref_s = 0.2 * mean;
  if (cfg.control_variate) {
    const double eps = 1e-3 / mean;
    const double l1 = transform.log_laplace(cplx(-eps, 0.0), T).real();
    const double var = 2.0 * (l1 + eps * mean) / (eps * eps);
    if (std::isfinite(var) && var > 0.0) ref_s = std::sqrt(var);
  }
  LogInterpolant log_lambda([&](double u) { return solve_lambda(cplx(z_r, u)); },
                            std::min(std::abs(z_r), 1.0 / ref_s), kInterpolationTolerance);
  auto reference = [&](cplx z) { return std::exp(z * ref_m + 0.5 * z * z * ref_s * ref_s); };

  auto integrand_c = [&](double u) {
    const cplx z(z_r, u);
    cplx lam = std::exp(log_lambda(u));
    if (cfg.control_variate) lam -= reference(z);
    return complex_erf(strike * std::sqrt(z)) * std::exp(-1.5 * std::log(z)) * lam;
  };
  auto integrand = [&](double u) { return integrand_c(u).real(); };

  PriceResult r;
  const double norm = 0.5 / kSqrtPi;
  double integral = 0.0, a = 0.0;
  double len = std::min(std::abs(z_r), 1.0 / ref_s);
  const bool forced = cfg.u_max > 0.0;
  for (int panel = 0;; ++panel) {
    double b = a + len;
    if (forced) b = std::min(b, cfg.u_max);
    const double panel_tol = cfg.tolerance / norm / (4.0 * std::pow(2.0, panel));
    const auto q = integrate_chebyshev(integrand, a, b, panel_tol);
    integral += q.value;
    r.quadrature_error += norm * q.error;
    a = b;
    len *= 2.0;
    r.truncation = norm * std::abs(integrand_c(b)) * 2.0 * b;
    r.bound = b;
    if (forced ? b >= cfg.u_max : r.truncation <= 0.1 * cfg.tolerance) break;
    if (b > cfg.u_limit) {
      std::ostringstream msg;
      msg << "VIX quadrature did not converge: tail estimate " << r.truncation << " at u " << b;
      throw NumericalError(msg.str(), r.truncation);
    }
  }
  double put = -norm * integral;
  if (cfg.control_variate) put += gaussian_vix_put(strike, ref_m, ref_s);
  if (kind == OptionKind::put) {
    r.price = put;
    return r;
  }
  const auto fut = vix_future(T, transform, cfg.tolerance);
  r.price = put + fut.price - strike;
  r.quadrature_error += fut.quadrature_error;
  r.truncation += fut.truncation;
  return r;
}

PriceResult vix_future(double T, const Vix2Transform& transform, double tolerance) {
  if (!(T > 0.0)) throw ValidationError("VIX future needs T > 0");
  const double mean = transform.expectation(T);
  auto log_lambda = [&](double u) { return transform.log_laplace(cplx(-u * u, 0.0), T).real(); };
  auto integrand = [&](double u) {
    if (u == 0.0) return mean;
    return -std::expm1(log_lambda(u)) / (u * u);
  };
  PriceResult r;
  double integral = 0.0, a = 0.0, len = 1.0 / std::sqrt(mean);
  for (int panel = 0;; ++panel) {
    const double b = a + len;
    const auto q = integrate(integrand, a, b, tolerance * kSqrtPi / (4.0 * std::pow(2.0, panel)));
    integral += q.value;
    r.quadrature_error += q.error / kSqrtPi;
    a = b;
    len *= 2.0;
    // int_b^inf (1 - λ)/u^2 = 1/b - int_b^inf λ/u^2, and the latter is at most λ(-b^2)/b.
    r.truncation = std::exp(log_lambda(b)) / b / kSqrtPi;
    r.bound = b;
    if (r.truncation <= 0.1 * tolerance) break;
    if (panel > 60) throw NumericalError("VIX future quadrature did not converge", r.truncation);
  }
  r.price = (integral + 1.0 / r.bound) / kSqrtPi;
  return r;
}

double implied_vol(VolKind, OptionKind option, double price, double strike, double T,
                   double forward) {
  if (!(strike > 0.0) || !(forward > 0.0) || !(T > 0.0) || !std::isfinite(price))
    throw ValidationError("implied vol needs positive strike, forward and maturity");
  const bool call = option == OptionKind::call;
  const double intrinsic = call ? std::max(forward - strike, 0.0) : std::max(strike - forward, 0.0);
  const double upper = call ? forward : strike;
  const double eps = 1e-14 * std::max(forward, strike);
  if (price < intrinsic - eps || price >= upper) {
    std::ostringstream msg;
    msg << "price " << price << " outside the no-arbitrage bounds [" << intrinsic << ", " << upper
        << ")";
    throw BoundViolation(msg.str());
  }
  if (price <= intrinsic + eps) return 0.0;

  // Solve on the out-of-the-money side, where the time value is not swamped
  // by the intrinsic part.
  OptionKind side = option;
  double target = price;
  if (call && strike < forward) {
    side = OptionKind::put;
    target = price - forward + strike;
  } else if (!call && strike > forward) {
    side = OptionKind::call;
    target = price + forward - strike;
  }
  auto f = [&](double s) { return black_price(side, forward, strike, T, s) - target; };

  double lo = 0.0, hi = 1.0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) throw BoundViolation("price too close to the upper no-arbitrage bound");
  }
  const double ftol = 1e-15 * std::max(forward, strike);
  double s = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    const double fs = f(s);
    if (std::abs(fs) <= ftol) return s;
    if (fs < 0.0) lo = s; else hi = s;
    if (hi - lo <= 1e-16 * hi) return s;
    const double vega = black_vega(forward, strike, T, s);
    double next = vega > 0.0 ? s - fs / vega : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    s = next;
  }
  return s;
}

}  // namespace rhh
