#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "rhh/numerics.hpp"

namespace rhh {

/// Parameters of the rough Heston model with Hawkes-type jumps.
///
/// The spot variance is sigma^2 = g0 + K * dZ with the power kernel
/// K(t) = t^(alpha-1)/Gamma(alpha), dZ = b sigma^2 dt + sqrt(c) sigma dW2 plus
/// compensated jumps of intensity sigma^2 nu(dz). Jumps hit the log return with
/// leverage -lambda_j. The initial curve is g0(t) = sigma0_sq + beta int_0^t K.
struct ModelParams {
  double alpha = 0.506;      // kernel exponent, in (1/2, 1]
  double rho = -0.737;       // Brownian correlation
  double b = -2.008;         // drift of Z per unit variance (mean reversion when < 0)
  double c = 0.156;          // vol-of-vol coefficient
  double lambda_j = 0.242;   // jump leverage Lambda
  double beta = 0.048;       // slope of the initial curve
  double sigma0_sq = 0.007;  // initial spot variance

  /// Calibrated values reported for the May 2017 SPX/VIX data set.
  static ModelParams table1() { return {}; }

  /// Throws ValidationError when an invariant is violated.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct JumpNode {
  double z = 0.0;
  double weight = 0.0;
};

/// Jump size law nu on (0, inf). Exponential laws carry total mass one.
class JumpLaw {
 public:
  enum class Kind { none, exponential, tabulated };

  static JumpLaw none();
  static JumpLaw exponential(double rate);
  static JumpLaw tabulated(std::vector<JumpNode> nodes);
  /// Discretizes the measure density(z) dz with a 64-node Gauss-Laguerre rule
  /// scaled by `scale` (nodes z_i = scale * t_i).
  static JumpLaw from_density(const std::function<double(double)>& density, double scale = 1.0,
                              std::size_t nodes = 64);

  Kind kind() const { return kind_; }
  double rate() const { return rate_; }
  const std::vector<JumpNode>& nodes() const { return nodes_; }

  double mass() const;           // nu(R+)
  double first_moment() const;   // int z nu(dz)
  double second_moment() const;  // int z^2 nu(dz)

  /// Supremum of Re s for which int e^{sz} nu(dz) is finite (+inf if unbounded).
  double abscissa() const;

  /// J(s) = int (e^{sz} - 1 - s z) nu(dz). Throws DomainError when
  /// Re s exceeds abscissa() - 1e-9.
  cplx compensated_mgf(cplx s) const;
  /// J'(s) = int z (e^{sz} - 1) nu(dz), same domain as compensated_mgf.
  cplx compensated_mgf_prime(cplx s) const;

  /// Inverse CDF of the normalized law (for simulation); u in (0, 1).
  double quantile(double u) const;

 private:
  Kind kind_ = Kind::none;
  double rate_ = 0.0;
  std::vector<JumpNode> nodes_;
  std::vector<double> cumulative_;
};

/// Gauss-Laguerre nodes and weights for the weight e^{-t} on (0, inf).
void gauss_laguerre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights);

double gamma_fn(double x);

/// The initial forward variance curve g0(t) = sigma0_sq + beta t^alpha / Gamma(alpha+1).
class InitialCurve {
 public:
  explicit InitialCurve(const ModelParams& params);

  double operator()(double t) const;
  const ModelParams& params() const { return params_; }

 private:
  ModelParams params_;
  double slope_;
};

/// F(u, v) driving the Riccati-Volterra equation of the log return transform.
cplx F_fn(cplx u, cplx v, const ModelParams& params, const JumpLaw& law);

/// dF/dv.
cplx F_dv(cplx u, cplx v, const ModelParams& params, const JumpLaw& law);

/// G(u) driving the Riccati-Volterra equation of the VIX^2 transform.
cplx G_fn(cplx u, const ModelParams& params, const JumpLaw& law);
cplx G_du(cplx u, const ModelParams& params, const JumpLaw& law);

struct LeverageConstants {
  double c1 = -0.5;  // log-contract coefficient, always negative
  double c2 = 1.0;   // variance-swap coefficient, at least one
};

LeverageConstants leverage_constants(const ModelParams& params, const JumpLaw& law);

inline double g0_eval(double t, const InitialCurve& curve) { return curve(t); }

}  // namespace rhh
