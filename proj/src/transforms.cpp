#include "rhh/transforms.hpp"

#include <cmath>

#include "rhh/errors.hpp"
#include "rhh/numerics.hpp"

namespace rhh {

namespace {

void check_grid(const RiccatiSolution& sol, double T) {
  if (sol.values.size() < 2) throw ValidationError("Riccati solution is empty");
  if (std::abs(sol.grid.t_end - T) > 1e-12 * std::max(1.0, T))
    throw ValidationError("Riccati solution does not span [0, T]");
}

}  // namespace

cplx log_cf_log_return(cplx w, double T, const RiccatiSolution& psi, const InitialCurve& curve,
                       const JumpLaw& law) {
  check_grid(psi, T);
  if (psi.kind != RiccatiKind::psi || psi.w != w)
    throw ValidationError("log-return transform needs psi solved for the same w");
  (void)curve;
  (void)law;
  return psi.convolution;
}

cplx cf_log_return(cplx w, double T, const RiccatiSolution& psi, const InitialCurve& curve,
                   const JumpLaw& law) {
  return std::exp(log_cf_log_return(w, T, psi, curve, law));
}

cplx log_laplace_vix2(cplx w, double T, const RiccatiSolution& phi, const HForcing& f,
                      const InitialCurve& curve, const JumpLaw& law) {
  check_grid(phi, T);
  if (phi.kind != RiccatiKind::phi || phi.w != w)
    throw ValidationError("VIX^2 transform needs phi solved for the same w");
  (void)law;
  return w * f.trapezoid([&](double s) { return curve(s + T); }) + phi.convolution;
}

cplx laplace_vix2(cplx w, double T, const RiccatiSolution& phi, const HForcing& f,
                  const InitialCurve& curve, const JumpLaw& law) {
  return std::exp(log_laplace_vix2(w, T, phi, f, curve, law));
}

double vix2_spot(const InitialCurve& curve, const HForcing& f) {
  return f.trapezoid([&](double s) { return curve(s); });
}

double vix2_spot(const InitialCurve& curve, const MultiFactorKernel& kn, const ModelParams& params,
                 const JumpLaw& law, std::size_t intervals) {
  return vix2_spot(curve, make_h_forcing(params, law, kn, ResolventMode::multifactor, intervals));
}

double variance_swap_rate(double T, const InitialCurve& curve, const HForcing& f,
                          const ModelParams& params, const JumpLaw& law) {
  if (T < 0.0) throw ValidationError("variance swap rate needs T >= 0");
  const double c2 = leverage_constants(params, law).c2;
  const std::size_t n = f.intervals();
  double sum = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double term = f.resolvent[n - k] * curve(T + f.node(k));
    sum += (k == 0 || k == n) ? 0.5 * term : term;
  }
  return c2 / f.delta * sum * f.delta / static_cast<double>(n);
}

double variance_swap_rate(double T, const InitialCurve& curve, const MultiFactorKernel& kn,
                          const ModelParams& params, const JumpLaw& law, std::size_t intervals) {
  return variance_swap_rate(
      T, curve, make_h_forcing(params, law, kn, ResolventMode::multifactor, intervals), params,
      law);
}

double vix2_expectation(double T, const InitialCurve& curve, const MultiFactorKernel& kn,
                        const ModelParams& params, const HForcing& f, std::size_t steps) {
  if (T < 0.0) throw ValidationError("E[VIX^2] needs T >= 0");
  const double base = f.trapezoid([&](double s) { return curve(T + s); });
  if (T == 0.0 || params.b == 0.0) return base;
  const std::size_t n = kn.size();
  const double h = T / static_cast<double>(steps);
  std::vector<ExpStep> coeffs(n);
  for (std::size_t j = 0; j < n; ++j) coeffs[j] = exp_step(kn.rates[j], h);
  std::vector<double> u(n, 0.0), pred(n);
  auto drift = [&](double t, const std::vector<double>& v) {
    double s = curve(t);
    for (std::size_t j = 0; j < n; ++j) s += kn.weights[j] * v[j];
    return params.b * s;
  };
  for (std::size_t k = 0; k < steps; ++k) {
    const double t0 = h * static_cast<double>(k);
    const double f0 = drift(t0, u);
    for (std::size_t j = 0; j < n; ++j)
      pred[j] = coeffs[j].decay * u[j] + (coeffs[j].w_start + coeffs[j].w_end) * f0;
    const double f1 = drift(t0 + h, pred);
    for (std::size_t j = 0; j < n; ++j)
      u[j] = coeffs[j].decay * u[j] + coeffs[j].w_start * f0 + coeffs[j].w_end * f1;
  }
  double value = base;
  for (std::size_t j = 0; j < n; ++j) value += kn.weights[j] * u[j] * f.exp_moment(kn.rates[j]);
  return value;
}

LogReturnTransform::LogReturnTransform(ModelParams params, JumpLaw law, MultiFactorKernel kn,
                                       TransformOptions options)
    : params_(params),
      law_(std::move(law)),
      kn_(std::move(kn)),
      options_(options),
      curve_(params) {
  params_.validate();
}

RiccatiSolution LogReturnTransform::solve(cplx w, double T) const {
  RiccatiOptions opt = options_.riccati;
  opt.store_factors = true;
  return solve_psi(w, kn_, params_, law_, RiccatiGrid{T, options_.steps}, opt);
}

cplx LogReturnTransform::log_value(cplx w, double T) const {
  if (!(T > 0.0)) throw ValidationError("maturity must be positive");
  const auto key = std::make_tuple(w.real(), w.imag(), T);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const auto psi =
      solve_psi(w, kn_, params_, law_, RiccatiGrid{T, options_.steps}, options_.riccati);
  const cplx value = log_cf_log_return(w, T, psi, curve_, law_);
  std::lock_guard lock(mutex_);
  if (cache_.size() >= options_.cache_limit) cache_.clear();
  cache_.emplace(key, value);
  return value;
}

cplx LogReturnTransform::operator()(cplx w, double T) const { return std::exp(log_value(w, T)); }

std::size_t LogReturnTransform::cache_size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

Vix2Transform::Vix2Transform(ModelParams params, JumpLaw law, MultiFactorKernel kn,
                             TransformOptions options)
    : params_(params),
      law_(std::move(law)),
      kn_(std::move(kn)),
      options_(options),
      curve_(params) {
  params_.validate();
  forcing_ = make_h_forcing(params_, law_, kn_, options_.h_mode, options_.h_intervals);
}

RiccatiSolution Vix2Transform::solve(cplx w, double T) const {
  RiccatiOptions opt = options_.riccati;
  opt.store_factors = true;
  return solve_phi(w, kn_, params_, law_, forcing_, RiccatiGrid{T, options_.steps}, opt);
}

cplx Vix2Transform::log_laplace(cplx w, double T, double divergence_cap) const {
  if (!(T > 0.0)) throw ValidationError("maturity must be positive");
  const auto key = std::make_tuple(w.real(), w.imag(), T);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  RiccatiOptions opt = options_.riccati;
  opt.divergence_cap = divergence_cap;
  const auto phi = solve_phi(w, kn_, params_, law_, forcing_, RiccatiGrid{T, options_.steps}, opt);
  const cplx value = log_laplace_vix2(w, T, phi, forcing_, curve_, law_);
  std::lock_guard lock(mutex_);
  if (cache_.size() >= options_.cache_limit) cache_.clear();
  cache_.emplace(key, value);
  return value;
}

cplx Vix2Transform::log_laplace(cplx w, double T) const {
  return log_laplace(w, T, options_.riccati.divergence_cap);
}

cplx Vix2Transform::operator()(cplx w, double T) const { return std::exp(log_laplace(w, T)); }

double Vix2Transform::expectation(double T) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = expectation_cache_.find(T); it != expectation_cache_.end()) return it->second;
  }
  const double value = vix2_expectation(T, curve_, kn_, params_, forcing_, options_.steps);
  std::lock_guard lock(mutex_);
  expectation_cache_.emplace(T, value);
  return value;
}

std::size_t Vix2Transform::cache_size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

double Vix2Transform::spot() const { return vix2_spot(curve_, forcing_); }

}  // namespace rhh
