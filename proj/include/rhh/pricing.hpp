#pragma once

#include <complex>

#include "rhh/transforms.hpp"

namespace rhh {

enum class OptionKind { call, put };

/// Principal-branch complex error function.
cplx complex_erf(cplx z);

double norm_cdf(double x);

/// Undiscounted Black formula on a forward with total standard deviation
/// sigma * sqrt(T).
double black_price(OptionKind kind, double forward, double strike, double T, double sigma);
double black_vega(double forward, double strike, double T, double sigma);

struct PriceResult {
  double price = 0.0;
  double quadrature_error = 0.0;  // accumulated Gauss-Kronrod error estimate
  double truncation = 0.0;        // tail estimate beyond the truncation bound
  double bound = 0.0;             // truncation bound actually used
};

struct SpxQuadrature {
  double tolerance = 1e-10;   // absolute price tolerance
  double lambda_max = 0.0;    // > 0 forces the truncation bound
  double lambda_limit = 2e5;  // give up beyond this bound
  double first_panel = 8.0;   // panels double in length from here
};

/// Lewis inversion along Re w = 1/2. k is the log-strike, S0 the spot.
PriceResult spx_option(OptionKind kind, double k, double T, double S0,
                       const LogReturnTransform& transform, const SpxQuadrature& quad = {});

struct VixInversionConfig {
  double z_r = 0.0;            // contour abscissa; 0 selects -1 / (2 E[VIX_T^2])
  double u_max = 0.0;          // > 0 forces the truncation bound
  double tolerance = 1e-10;    // absolute price tolerance
  double erf_tolerance = 1e-13;
  bool control_variate = true; // subtract a Gaussian reference priced in closed form
  double divergence_cap = 1e8;
  double u_limit = 1e7;
};

/// VIX option with strike e^k (VIX points) by bilateral Laplace inversion.
PriceResult vix_option(OptionKind kind, double k, double T, const Vix2Transform& transform,
                       const VixInversionConfig& cfg = {});

/// E[VIX_T] = (1/sqrt(pi)) int_0^inf (1 - λ_T(-u^2)) / u^2 du.
PriceResult vix_future(double T, const Vix2Transform& transform, double tolerance = 1e-10);

enum class VolKind { spx_black_scholes, vix_black76 };

/// Black implied volatility. Throws BoundViolation outside the no-arbitrage
/// bounds; returns 0 at intrinsic value.
double implied_vol(VolKind kind, OptionKind option, double price, double strike, double T,
                   double forward);

}  // namespace rhh
