#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "rhh/kernel.hpp"
#include "rhh/model.hpp"

namespace rhh {

inline constexpr double kVixWindow = 1.0 / 12.0;  // 30 days

/// Uniform grid 0 = t_0 < ... < t_M = t_end.
struct RiccatiGrid {
  double t_end = 1.0;
  std::size_t steps = 2000;

  double step() const { return t_end / static_cast<double>(steps); }
  double time(std::size_t k) const { return t_end * static_cast<double>(k) / static_cast<double>(steps); }
};

enum class RiccatiKind { psi, phi };

struct RiccatiSolution {
  RiccatiGrid grid;
  RiccatiKind kind = RiccatiKind::psi;
  cplx w{};
  std::vector<cplx> values;         // psi or phi at the grid times
  std::vector<cplx> factor_values;  // row-major (steps+1) x factors; empty unless stored
  std::size_t factors = 0;
  double max_positive_real = 0.0;   // largest Re value above zero (discretization noise)
  /// int_0^T g0(T - r) f(value(r)) dr with f = F(w, .) or G, accumulated on
  /// the solver's steps (the grid, with the first interval graded).
  cplx convolution{};

  const cplx& factor(std::size_t k, std::size_t j) const { return factor_values[k * factors + j]; }
};

struct RiccatiOptions {
  double divergence_cap = 1e6;  // times max(1, |initial value|)
  double positivity_tolerance = 1e-9;
  bool store_factors = true;
};

/// Which resolvent builds h: the multi-factor kernel (consistent with the
/// approximated model) or the exact power kernel via Mittag-Leffler.
enum class ResolventMode { multifactor, exact };

/// h(t) = -1e4 (2/delta) c1 [1 + b (E_{b,K} * 1)(delta - t)] 1{t <= delta},
/// tabulated on a uniform grid of [0, delta] and interpolated linearly.
struct HForcing {
  double delta = kVixWindow;
  double c1 = -0.5;
  double scale = 0.0;             // -1e4 (2/delta) c1
  std::vector<double> resolvent;  // r(s) at s = delta k / N, k = 0..N

  std::size_t intervals() const { return resolvent.size() - 1; }
  double node(std::size_t k) const {
    return delta * static_cast<double>(k) / static_cast<double>(intervals());
  }
  /// h at the k-th node t_k = node(k), i.e. scale * r(delta - t_k).
  double at_node(std::size_t k) const { return scale * resolvent[intervals() - k]; }

  /// int_0^delta h(s) e^{-x s} ds for piecewise-linear h (exact product rule).
  double exp_moment(double x) const;
  /// int_0^delta h(s) f(s) ds by the trapezoid rule on the nodes.
  template <class Fn>
  double trapezoid(Fn&& f) const {
    const std::size_t n = intervals();
    double sum = 0.5 * (at_node(0) * f(node(0)) + at_node(n) * f(node(n)));
    for (std::size_t k = 1; k < n; ++k) sum += at_node(k) * f(node(k));
    return sum * delta / static_cast<double>(n);
  }
};

HForcing make_h_forcing(const ModelParams& params, const JumpLaw& law,
                        const MultiFactorKernel& kn,
                        ResolventMode mode = ResolventMode::multifactor,
                        std::size_t intervals = 2000, double delta = kVixWindow);

double h_eval(double t, const HForcing& f);

/// Solves psi_w = K_n * F(w, psi_w) through the factor system
/// d psi_j/dt = -x_j psi_j + F(w, sum_k m_k psi_k), psi_j(0) = 0.
/// Exponential integrator, implicit in the end-of-step forcing; the first
/// interval is graded geometrically toward 0, reported values stay on the grid.
RiccatiSolution solve_psi(cplx w, const MultiFactorKernel& kn, const ModelParams& params,
                          const JumpLaw& law, const RiccatiGrid& grid,
                          const RiccatiOptions& options = {});

/// Solves phi_w = int h_w(s) K_n(s + .) ds + K_n * G(phi_w) through
/// d phi_j/dt = -x_j phi_j + G(sum_k m_k phi_k), phi_j(0) = w int h(s) e^{-x_j s} ds.
RiccatiSolution solve_phi(cplx w, const MultiFactorKernel& kn, const ModelParams& params,
                          const JumpLaw& law, const HForcing& forcing, const RiccatiGrid& grid,
                          const RiccatiOptions& options = {});

/// CSV dump: t,re,im.
void write_csv(std::ostream& os, const RiccatiSolution& sol);

}  // namespace rhh
