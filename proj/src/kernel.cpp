#include "rhh/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rhh/errors.hpp"
#include "rhh/model.hpp"
#include "rhh/numerics.hpp"

namespace rhh {

double PowerKernel::operator()(double t) const {
  if (!(t > 0.0)) throw DomainError("power kernel is singular at t <= 0");
  if (alpha == 1.0) return 1.0;
  return std::pow(t, alpha - 1.0) / gamma_fn(alpha);
}

double PowerKernel::integral(double t) const {
  if (t <= 0.0) return 0.0;
  return std::pow(t, alpha) / gamma_fn(alpha + 1.0);
}

double MultiFactorKernel::operator()(double t) const {
  double s = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * std::exp(-rates[j] * t);
  return s;
}

double MultiFactorKernel::integral(double t) const {
  double s = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * t * phi1(rates[j] * t);
  return s;
}

MultiFactorKernel build_multifactor(const PowerKernel& k, std::size_t n, double rho_min,
                                    double rho_max) {
  if (n == 0) throw ValidationError("multi-factor kernel needs at least one factor");
  if (!(k.alpha > 0.5 && k.alpha <= 1.0)) throw ValidationError("alpha must lie in (1/2, 1]");
  MultiFactorKernel kn;
  if (k.alpha == 1.0) {
    kn.weights = {1.0};
    kn.rates = {0.0};
    return kn;
  }
  if (!(rho_min > 0.0) || !(rho_max > rho_min))
    throw ValidationError("invalid partition: need 0 < rho_min < rho_max");

  const double a = k.alpha;
  const double norm = 1.0 / (gamma_fn(a) * gamma_fn(1.0 - a));
  const double ratio = std::log(rho_max / rho_min);
  kn.weights.reserve(n);
  kn.rates.reserve(n);
  double lo = rho_min;
  for (std::size_t j = 1; j <= n; ++j) {
    const double hi = j == n ? rho_max : rho_min * std::exp(ratio * static_cast<double>(j) / n);
    const double mass = norm * (std::pow(hi, 1.0 - a) - std::pow(lo, 1.0 - a)) / (1.0 - a);
    const double moment = norm * (std::pow(hi, 2.0 - a) - std::pow(lo, 2.0 - a)) / (2.0 - a);
    kn.weights.push_back(mass);
    kn.rates.push_back(moment / mass);
    lo = hi;
  }
  return kn;
}

MultiFactorKernel build_multifactor(const PowerKernel& k, std::size_t n,
                                    const PartitionConfig& partition) {
  const double nn = static_cast<double>(n);
  const double rho_max = partition.rho_max > 0.0 ? partition.rho_max : 10.0 * nn * nn;
  return build_multifactor(k, n, partition.rho_min, rho_max);
}

double kernel_l1_distance(const PowerKernel& k, const MultiFactorKernel& kn, double T) {
  if (!(T > 0.0)) throw ValidationError("kernel distance needs T > 0");
  if (k.alpha == 1.0) {
    auto f = [&](double s) { return std::abs(kn(s) - 1.0); };
    return integrate(f, 0.0, T, 1e-13).value;
  }
  // s = T u^{1/alpha} turns K(s) ds into a bounded density in u.
  const double p = 1.0 / k.alpha;
  const double jac_k = std::pow(T, k.alpha) * p / gamma_fn(k.alpha);
  auto f = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double s = T * std::pow(u, p);
    const double ds_du = T * p * std::pow(u, p - 1.0);
    return std::abs(kn(s) * ds_du - jac_k);
  };
  // Panels at the factor time scales keep the bisection from missing the
  // fast exponentials near u = 0.
  std::vector<double> breaks{0.0};
  for (double rate : kn.rates) {
    if (rate <= 0.0) continue;
    const double s = 1.0 / rate;
    if (s < T) breaks.push_back(std::pow(s / T, k.alpha));
  }
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    total += integrate(f, breaks[i], breaks[i + 1], 1e-14).value;
  return total;
}

std::vector<double> resolvent_one(double b, const MultiFactorKernel& kn,
                                  std::span<const double> grid, std::size_t steps_per_horizon) {
  std::vector<double> out;
  out.reserve(grid.size());
  if (grid.empty()) return out;
  if (grid.front() < 0.0) throw ValidationError("resolvent grid must start at t >= 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] < grid[i - 1]) throw ValidationError("resolvent grid must be sorted");

  const std::size_t n = kn.size();
  const double horizon = grid.back();
  const double max_step =
      horizon > 0.0 ? horizon / static_cast<double>(std::max<std::size_t>(steps_per_horizon, 1))
                    : 1.0;
  std::vector<double> y(n, 0.0), y_pred(n);
  auto combine = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += kn.weights[j] * v[j];
    return s;
  };

  double t = 0.0;
  std::vector<ExpStep> coeffs(n);
  double cached_h = -1.0;
  for (double target : grid) {
    const double span_len = target - t;
    if (span_len > 0.0) {
      const auto pieces = static_cast<std::size_t>(std::ceil(span_len / max_step - 1e-9));
      const double h = span_len / static_cast<double>(std::max<std::size_t>(pieces, 1));
      if (h != cached_h) {
        for (std::size_t j = 0; j < n; ++j) coeffs[j] = exp_step(kn.rates[j], h);
        cached_h = h;
      }
      for (std::size_t s = 0; s < std::max<std::size_t>(pieces, 1); ++s) {
        const double f0 = 1.0 + b * combine(y);
        for (std::size_t j = 0; j < n; ++j)
          y_pred[j] = coeffs[j].decay * y[j] + (coeffs[j].w_start + coeffs[j].w_end) * f0;
        const double f1 = 1.0 + b * combine(y_pred);
        for (std::size_t j = 0; j < n; ++j)
          y[j] = coeffs[j].decay * y[j] + coeffs[j].w_start * f0 + coeffs[j].w_end * f1;
      }
      t = target;
    }
    const double r = 1.0 + b * combine(y);
    if (!std::isfinite(r)) throw NumericalError("resolvent solve diverged");
    out.push_back(r);
  }
  return out;
}

namespace {

// 1 / Gamma(x), finite at the poles.
double rgamma(double x) {
  if (x <= 0.0 && x == std::floor(x)) return 0.0;
  if (x < 0.5) {
    // Reflection: 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi
    return std::sin(kPi * x) * std::tgamma(1.0 - x) / kPi;
  }
  if (x > 170.0) return std::exp(-std::lgamma(x));
  return 1.0 / std::tgamma(x);
}

}  // namespace

double mittag_leffler(double a, double beta_ml, double z) {
  if (!(a > 0.0) || !(beta_ml > 0.0)) throw ValidationError("Mittag-Leffler needs a, beta > 0");
  if (z == 0.0) return rgamma(beta_ml);

  // Power series in extended precision, tracking the largest term to detect
  // cancellation.
  {
    using ld = long double;
    const ld lz = std::log(std::fabs(static_cast<ld>(z)));
    ld sum = 0.0L, max_term = 0.0L;
    bool converged = false;
    for (int k = 0; k < 20000; ++k) {
      const ld arg = static_cast<ld>(a) * k + static_cast<ld>(beta_ml);
      const ld log_mag = k * lz - std::lgamma(arg);
      if (log_mag > 11000.0L) throw NumericalError("Mittag-Leffler overflow");
      ld term = std::exp(log_mag);
      if (z < 0.0 && (k % 2 == 1)) term = -term;
      sum += term;
      max_term = std::max(max_term, std::fabs(term));
      // Past the peak of the terms and below resolution.
      if (k > 2 && std::fabs(term) < 1e-20L * std::max(std::fabs(sum), 1e-300L) &&
          arg > std::exp(lz / a)) {
        converged = true;
        break;
      }
    }
    if (converged) {
      const ld rel_loss = max_term * 1e-19L / std::max(std::fabs(sum), 1e-300L);
      if (rel_loss < 1e-11L) {
        if (!std::isfinite(static_cast<double>(sum))) throw NumericalError("Mittag-Leffler overflow");
        return static_cast<double>(sum);
      }
    }
  }

  if (z < 0.0 && a < 2.0) {
    // E_{a,beta}(z) ~ -sum_{k>=1} z^{-k} / Gamma(beta - a k) as z -> -inf.
    double sum = 0.0, last = std::numeric_limits<double>::infinity();
    double zk = 1.0;
    for (int k = 1; k < 200; ++k) {
      zk /= z;
      const double term = -zk * rgamma(beta_ml - a * k);
      const double mag = std::abs(term);
      if (mag == 0.0) continue;  // pole of 1/Gamma
      if (mag > last) break;
      sum += term;
      last = mag;
      if (mag < 1e-17 * std::abs(sum)) return sum;
    }
    if (last < 1e-11 * std::abs(sum)) return sum;
  }
  std::ostringstream msg;
  msg << "Mittag-Leffler E_{" << a << "," << beta_ml << "}(" << z
      << ") is outside the series/asymptotic validity region";
  throw DomainError(msg.str());
}

}  // namespace rhh
