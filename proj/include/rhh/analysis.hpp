#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rhh/calibrate.hpp"

namespace rhh {

/// Smile grid for the surface and sensitivity commands. SPX log-moneyness is
/// ln(K / S0); VIX log-moneyness is ln(K / model future).
struct SurfaceGrid {
  std::vector<double> spx_maturities{0.05, 0.1, 0.25};
  std::vector<double> spx_log_moneyness{-0.2, -0.1, -0.05, 0.0, 0.05};
  std::vector<double> vix_maturities{0.05, 0.1, 0.25};
  std::vector<double> vix_log_moneyness{-0.05, 0.0, 0.1, 0.2, 0.4, 0.6};
};

struct SurfaceRow {
  Market market = Market::spx;
  double maturity = 0.0;
  double log_moneyness = 0.0;
  double forward = 0.0;      // S0 = 1 for SPX, model future for VIX (0 if it failed)
  double implied_vol = 0.0;  // NaN on failure
  std::string status;        // "ok" or the failure message
};

/// Model implied volatilities on the grid; pricing failures become gap rows.
std::vector<SurfaceRow> surface(const ModelParams& params, const SurfaceGrid& grid,
                                const PricingSetup& setup = {});

void write_surface_csv(std::ostream& out, const std::vector<SurfaceRow>& rows);

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  SurfaceRow point;
};

/// One surface per value of `parameter` (one of kParamNames). A parameter
/// value that fails validation yields gap rows rather than an exception.
std::vector<SweepRow> sensitivity_sweep(const ModelParams& base, const std::string& parameter,
                                        const std::vector<double>& values, const SurfaceGrid& grid,
                                        const PricingSetup& setup = {});

/// Long format: parameter,value,market,maturity,log_moneyness,forward,implied_vol,status.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct SkewRow {
  double maturity = 0.0;
  double atm_iv = 0.0;
  double skew = 0.0;  // d sigma / dk at k = ln S0
};

struct SkewFit {
  double power = 0.0;      // slope of ln|skew| on ln T
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<SkewRow> rows;
};

/// Ordinary least squares of ln|skew| on ln T. Throws ValidationError when a
/// skew is zero or the skews change sign, or fewer than 4 maturities remain.
SkewFit fit_skew_power(std::vector<SkewRow> rows);

/// ATM skew by central difference (sigma(dk) - sigma(-dk)) / (2 dk) of the
/// SPX implied volatility, then fit_skew_power. Maturities must be sorted.
SkewFit skew_decay_fit(const ModelParams& params, const std::vector<double>& maturities,
                       double dk = 1e-3, const PricingSetup& setup = {});

}  // namespace rhh
