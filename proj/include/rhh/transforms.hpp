#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "rhh/kernel.hpp"
#include "rhh/model.hpp"
#include "rhh/riccati.hpp"

namespace rhh {

enum class TransformKind { log_return, vix_squared };

struct TransformRequest {
  double maturity = 0.1;
  cplx w{};
  TransformKind kind = TransformKind::log_return;
};

/// Ψ^{X_T}(w) = exp(int_0^T F(w, psi(T-s)) g0(s) ds), trapezoid rule on the
/// Riccati grid.
cplx cf_log_return(cplx w, double T, const RiccatiSolution& psi, const InitialCurve& curve,
                   const JumpLaw& law);
cplx log_cf_log_return(cplx w, double T, const RiccatiSolution& psi, const InitialCurve& curve,
                       const JumpLaw& law);

/// λ_T(w) = E[exp(w VIX_T^2)] = exp(w int_0^delta h(s) g0(s+T) ds + int_0^T g0(T-s) G(phi(s)) ds).
cplx laplace_vix2(cplx w, double T, const RiccatiSolution& phi, const HForcing& f,
                  const InitialCurve& curve, const JumpLaw& law);
cplx log_laplace_vix2(cplx w, double T, const RiccatiSolution& phi, const HForcing& f,
                      const InitialCurve& curve, const JumpLaw& law);

/// VIX_0^2 = int_0^delta h(s) g0(s) ds.
double vix2_spot(const InitialCurve& curve, const MultiFactorKernel& kn, const ModelParams& params,
                 const JumpLaw& law, std::size_t intervals = 2000);
double vix2_spot(const InitialCurve& curve, const HForcing& f);

/// (c2/delta) int_T^{T+delta} (1 + b (E*1)(T+delta-s)) g0(s) ds at time 0.
double variance_swap_rate(double T, const InitialCurve& curve, const MultiFactorKernel& kn,
                          const ModelParams& params, const JumpLaw& law,
                          std::size_t intervals = 2000);
double variance_swap_rate(double T, const InitialCurve& curve, const HForcing& f,
                          const ModelParams& params, const JumpLaw& law);

/// E[VIX_T^2] from the affine relation: the factor means solve
/// dE[U_j] = (-x_j E[U_j] + b (g0 + sum_k m_k E[U_k])) dt.
double vix2_expectation(double T, const InitialCurve& curve, const MultiFactorKernel& kn,
                        const ModelParams& params, const HForcing& f, std::size_t steps = 2000);

struct TransformOptions {
  std::size_t steps = 2000;  // Riccati steps over [0, T]
  std::size_t h_intervals = 2000;
  ResolventMode h_mode = ResolventMode::multifactor;
  RiccatiOptions riccati{1e6, 1e-9, false};
  std::size_t cache_limit = 1 << 16;  // memoized (w, T) entries before the cache is reset
};

/// Memoized Ψ^{X_T}. Thread safe; concurrent callers share results.
class LogReturnTransform {
 public:
  LogReturnTransform(ModelParams params, JumpLaw law, MultiFactorKernel kn,
                     TransformOptions options = {});

  cplx operator()(cplx w, double T) const;
  cplx log_value(cplx w, double T) const;
  RiccatiSolution solve(cplx w, double T) const;

  const ModelParams& params() const { return params_; }
  const JumpLaw& law() const { return law_; }
  const MultiFactorKernel& kernel() const { return kn_; }
  const TransformOptions& options() const { return options_; }
  std::size_t cache_size() const;

 private:
  ModelParams params_;
  JumpLaw law_;
  MultiFactorKernel kn_;
  TransformOptions options_;
  InitialCurve curve_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<double, double, double>, cplx> cache_;
};

/// Memoized λ_T with the forcing h built once.
class Vix2Transform {
 public:
  Vix2Transform(ModelParams params, JumpLaw law, MultiFactorKernel kn,
                TransformOptions options = {});

  cplx operator()(cplx w, double T) const;
  cplx log_laplace(cplx w, double T) const;
  /// Same as log_laplace with an explicit divergence cap (contour searches).
  cplx log_laplace(cplx w, double T, double divergence_cap) const;
  RiccatiSolution solve(cplx w, double T) const;

  double expectation(double T) const;  // E[VIX_T^2]
  double spot() const;                 // VIX_0^2
  std::size_t cache_size() const;

  const ModelParams& params() const { return params_; }
  const JumpLaw& law() const { return law_; }
  const MultiFactorKernel& kernel() const { return kn_; }
  const HForcing& forcing() const { return forcing_; }
  const TransformOptions& options() const { return options_; }

 private:
  ModelParams params_;
  JumpLaw law_;
  MultiFactorKernel kn_;
  TransformOptions options_;
  InitialCurve curve_;
  HForcing forcing_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<double, double, double>, cplx> cache_;
  mutable std::map<double, double> expectation_cache_;
};

}  // namespace rhh
