#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rhh/pricing.hpp"

namespace rhh {

enum class Market { spx, vix };

const char* market_name(Market m);

/// One quoted smile point. log_moneyness is ln(K / forward); the forward is
/// the SPX forward or the VIX future.
struct OptionQuote {
  Market market = Market::spx;
  double maturity = 0.0;
  double log_moneyness = 0.0;
  double forward = 1.0;
  double bid_iv = 0.0;
  double ask_iv = 0.0;

  double mid_iv() const { return 0.5 * (bid_iv + ask_iv); }
  double spread() const { return ask_iv - bid_iv; }
  double strike() const;
};

struct QuoteIssue {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

struct QuoteFile {
  std::vector<OptionQuote> quotes;
  std::vector<QuoteIssue> issues;  // rejected rows
};

/// CSV with header market,maturity,log_moneyness,forward,bid_iv,ask_iv (any
/// column order, extra columns ignored). Bad rows are rejected with a line
/// diagnostic; more than max_invalid_fraction bad rows fails the whole file
/// with ValidationError.
QuoteFile read_quotes(std::istream& in, double max_invalid_fraction = 0.1);
QuoteFile load_quotes(const std::string& path, double max_invalid_fraction = 0.1);

/// Writes the same CSV layout with round-trip precision.
void write_quotes(std::ostream& out, const std::vector<OptionQuote>& quotes);

/// Numerical settings shared by calibration, quote generation and the
/// analysis commands. Defaults trade some transform accuracy for speed; they
/// are consistent, so quotes generated with a setup are reproduced exactly.
struct PricingSetup {
  std::size_t factors = 20;
  PartitionConfig partition{};
  JumpLaw law = JumpLaw::exponential(1.0);
  TransformOptions transform{200, 200};
  SpxQuadrature spx{1e-9};
  VixInversionConfig vix{0.0, 0.0, 1e-9};
};

/// Model implied volatility per quote (nullopt where pricing failed, with the
/// reason in `failures`). Quotes of one maturity share a transform cache;
/// maturities are priced in parallel.
struct ModelSmile {
  std::vector<std::optional<double>> iv;
  std::vector<std::string> failures;  // same length as iv, empty on success
  std::vector<double> vix_futures;    // model future per quote (VIX rows, else 0)
};

ModelSmile model_implied_vols(const ModelParams& params, const std::vector<OptionQuote>& quotes,
                              const PricingSetup& setup = {});

/// Grid of synthetic quotes: bid/ask = model IV -/+ half_spread. The quoted
/// forward is the model forward (1 for SPX, the model future for VIX).
struct QuoteGrid {
  std::vector<double> maturities{0.05, 0.1, 0.2, 0.4};
  std::vector<double> spx_log_moneyness;  // scaled by sqrt(T / 0.1) per maturity
  std::vector<double> vix_log_moneyness;
  double spx_half_spread = 0.005;
  double vix_half_spread = 0.02;

  /// 20 SPX strikes in [-0.25, 0.05] and 20 VIX strikes in [-0.05, 0.9].
  static QuoteGrid standard();
};

std::vector<OptionQuote> generate_quotes(const ModelParams& params, const QuoteGrid& grid,
                                         const PricingSetup& setup = {});

struct ObjectiveConfig {
  double weight_cap = 1e6;         // cap on 1 / spread^2
  double failure_penalty = 1e4;    // added per quote whose pricing failed
};

/// Default weights 1 / (ask - bid)^2, capped.
std::vector<double> default_weights(const std::vector<OptionQuote>& quotes,
                                    double cap = ObjectiveConfig{}.weight_cap);

struct ObjectiveValue {
  double value = 0.0;
  std::vector<double> residuals;  // model - mid, NaN where pricing failed
  std::vector<std::string> diagnostics;
  std::size_t failures = 0;
};

/// sum_q w_q (model_iv - mid_iv)^2. Empty weights select default_weights.
/// Throws NumericalError carrying the first failure when every quote fails.
ObjectiveValue objective_eval(const ModelParams& params, const std::vector<OptionQuote>& quotes,
                              const std::vector<double>& weights = {},
                              const PricingSetup& setup = {}, const ObjectiveConfig& cfg = {});

/// Parameter vector order used by the optimizer and the bounds.
inline constexpr std::array<const char*, 7> kParamNames = {
    "alpha", "rho", "b", "c", "lambda", "beta", "sigma0_sq"};

std::array<double, 7> to_vector(const ModelParams& p);
ModelParams from_vector(const std::array<double, 7>& v);

/// Box constraints; infinite entries leave a side open.
struct ParamBounds {
  std::array<double, 7> lower;
  std::array<double, 7> upper;

  /// alpha in [0.5 + 1e-6, 1], rho in [-1, 1], b free, c >= 1e-8, Lambda,
  /// beta, sigma0_sq >= 0.
  static ParamBounds defaults();
  bool contains(const ModelParams& p) const;
};

enum class CalibrationMethod {
  simplex,  // bounded Nelder-Mead only
  /// Levenberg-Marquardt on the weighted residual vector with a forward
  /// difference Jacobian, then the simplex on the remaining budget if it
  /// stalls before converging.
  hybrid,
};

struct CalibrationConfig {
  CalibrationMethod method = CalibrationMethod::hybrid;
  std::size_t budget = 400;               // objective evaluations
  std::array<bool, 7> free{true, true, true, true, true, true, true};
  double initial_step = 0.1;              // relative simplex size
  double f_tolerance = 1e-10;             // simplex spread to stop a restart
  std::size_t max_restarts = 6;
  ObjectiveConfig objective{};
  PricingSetup setup{};
};

struct AuditEntry {
  std::size_t evaluation = 0;
  double best_objective = 0.0;
};

struct CalibrationResult {
  ModelParams params;
  double objective = 0.0;
  std::vector<double> residuals;
  std::size_t evaluations = 0;
  std::size_t iterations = 0;
  double wall_seconds = 0.0;
  bool improved = false;  // false: budget ran out before any improvement
  std::vector<AuditEntry> trail;  // best objective, nonincreasing
};

/// Minimizes the weighted objective with cfg.method. Simplex trial points
/// outside the box are reflected back in; Levenberg-Marquardt steps are
/// projected onto it. Deterministic given the inputs. `progress` (optional)
/// sees each new best. The starting point is not charged to the budget.
CalibrationResult calibrate_run(const ModelParams& initial, const ParamBounds& bounds,
                                const std::vector<OptionQuote>& quotes,
                                const CalibrationConfig& cfg = {},
                                const std::function<void(const AuditEntry&)>& progress = {});

struct SearchResult {
  std::array<double, 7> x{};
  double value = 0.0;
  std::size_t evaluations = 0;
  std::size_t iterations = 0;
  bool improved = false;
  bool converged = false;  // stopping test met (as opposed to budget or stall)
  std::vector<AuditEntry> trail;
};

/// Bounded Nelder-Mead with dimension-adaptive coefficients and restarts from
/// the best point, on an arbitrary objective.
SearchResult bounded_simplex(const std::function<double(const std::array<double, 7>&)>& f,
                             const std::array<double, 7>& x0, const ParamBounds& bounds,
                             const CalibrationConfig& cfg,
                             const std::function<void(const AuditEntry&)>& progress = {});

/// Residual vector for bounded_least_squares; throwing marks the point as
/// infeasible.
using ResidualFn = std::function<std::vector<double>(const std::array<double, 7>&)>;

/// Levenberg-Marquardt with Marquardt scaling on sum r_i^2, forward
/// difference Jacobian (one evaluation per free parameter), steps projected
/// onto the box.
SearchResult bounded_least_squares(const ResidualFn& residuals, const std::array<double, 7>& x0,
                                   const ParamBounds& bounds, const CalibrationConfig& cfg,
                                   const std::function<void(const AuditEntry&)>& progress = {});

/// JSON with the parameter keys plus objective, evaluations,
/// iterations, wall_seconds, improved, residuals and the audit trail.
std::string result_json(const CalibrationResult& r, const std::vector<OptionQuote>& quotes);

std::string params_json(const ModelParams& p);
/// Missing keys keep the values of `base`; unknown keys are rejected.
ModelParams params_from_json(const std::string& text, const ModelParams& base = {});

}  // namespace rhh
