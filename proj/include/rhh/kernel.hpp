#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rhh {

/// K(t) = t^(alpha-1) / Gamma(alpha), alpha in (1/2, 1].
struct PowerKernel {
  double alpha = 0.506;

  double operator()(double t) const;
  /// int_0^t K(s) ds = t^alpha / Gamma(alpha + 1).
  double integral(double t) const;
};

inline double kernel_eval(double t, const PowerKernel& k) { return k(t); }

/// K_n(t) = sum_j m_j exp(-x_j t), weights positive, rates strictly increasing.
struct MultiFactorKernel {
  std::vector<double> weights;
  std::vector<double> rates;

  std::size_t size() const { return weights.size(); }
  double operator()(double t) const;
  double integral(double t) const;
};

struct PartitionConfig {
  double rho_min = 1e-4;
  double rho_max = 0.0;  // <= 0 selects 10 n^2
};

/// Multi-factor approximation from the Bernstein-Widder measure
/// mu(dx) = x^{-alpha} / (Gamma(alpha) Gamma(1-alpha)) dx, lumped on the
/// geometric partition rho_j = rho_min (rho_max/rho_min)^{j/n}. Each bucket
/// contributes its mass as weight and its mean as rate. alpha = 1 gives the
/// exact single factor (1, 0).
MultiFactorKernel build_multifactor(const PowerKernel& k, std::size_t n, double rho_min,
                                    double rho_max);
MultiFactorKernel build_multifactor(const PowerKernel& k, std::size_t n,
                                    const PartitionConfig& partition = {});

/// int_0^T |K_n(s) - K(s)| ds.
double kernel_l1_distance(const PowerKernel& k, const MultiFactorKernel& kn, double T);

/// r(t) = 1 + b (E_{b,K_n} * 1)(t) on the given sorted grid (starting at or
/// after 0). Solves chi = K_n * (1 + b chi) through its factor ODE system with
/// exponential-integrator steps no longer than grid.back() / steps_per_horizon.
std::vector<double> resolvent_one(double b, const MultiFactorKernel& kn,
                                  std::span<const double> grid,
                                  std::size_t steps_per_horizon = 2000);

/// Two-parameter Mittag-Leffler function E_{a,beta}(z) for real z. Uses the
/// power series where it is numerically safe and the algebraic asymptotic
/// expansion for large negative z. Throws NumericalError on overflow and
/// DomainError where neither representation is accurate.
double mittag_leffler(double a, double beta_ml, double z);

}  // namespace rhh
