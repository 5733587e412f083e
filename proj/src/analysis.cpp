#include "rhh/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "rhh/errors.hpp"

namespace rhh {

namespace {

void write_row_tail(std::ostream& out, const SurfaceRow& r) {
  out << market_name(r.market) << ',' << r.maturity << ',' << r.log_moneyness << ',' << r.forward
      << ',';
  if (std::isfinite(r.implied_vol)) out << r.implied_vol;
  out << ',';
  // Keep the status a single CSV field.
  std::string s = r.status;
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  out << s << '\n';
}

}  // namespace

std::vector<SurfaceRow> surface(const ModelParams& params, const SurfaceGrid& grid,
                                const PricingSetup& setup) {
  std::vector<OptionQuote> quotes;
  for (double T : grid.spx_maturities)
    for (double k : grid.spx_log_moneyness) quotes.push_back({Market::spx, T, k, 1.0, 0.0, 0.0});
  for (double T : grid.vix_maturities)
    for (double k : grid.vix_log_moneyness) quotes.push_back({Market::vix, T, k, 1.0, 0.0, 0.0});

  std::vector<SurfaceRow> rows(quotes.size());
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    rows[i].market = quotes[i].market;
    rows[i].maturity = quotes[i].maturity;
    rows[i].log_moneyness = quotes[i].log_moneyness;
    rows[i].implied_vol = std::numeric_limits<double>::quiet_NaN();
  }
  auto fail_all = [&](const std::string& msg) {
    for (auto& r : rows) r.status = msg;
    return rows;
  };
  try {
    params.validate();
  } catch (const std::exception& e) {
    return fail_all(e.what());
  }

  // VIX strikes are quoted against the model's own future: price the futures
  // first so the strikes can be placed.
  if (!grid.vix_maturities.empty()) {
    const auto kn = build_multifactor(PowerKernel{params.alpha}, setup.factors, setup.partition);
    const Vix2Transform vix(params, setup.law, kn, setup.transform);
    for (std::size_t i = 0; i < quotes.size(); ++i) {
      if (quotes[i].market != Market::vix) continue;
      try {
        quotes[i].forward = vix_future(quotes[i].maturity, vix, setup.vix.tolerance).price;
      } catch (const std::exception& e) {
        quotes[i].forward = 0.0;
        rows[i].status = std::string("VIX future failed: ") + e.what();
      }
    }
  }
  std::vector<OptionQuote> priced;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    if (quotes[i].forward > 0.0) {
      priced.push_back(quotes[i]);
      index.push_back(i);
    }
  }
  const auto smile = model_implied_vols(params, priced, setup);
  for (std::size_t j = 0; j < priced.size(); ++j) {
    SurfaceRow& r = rows[index[j]];
    r.forward = priced[j].forward;
    if (smile.iv[j]) {
      r.implied_vol = *smile.iv[j];
      r.status = "ok";
    } else {
      r.status = smile.failures[j];
    }
  }
  return rows;
}

void write_surface_csv(std::ostream& out, const std::vector<SurfaceRow>& rows) {
  out << "market,maturity,log_moneyness,forward,implied_vol,status\n";
  out.precision(17);
  for (const auto& r : rows) write_row_tail(out, r);
}

std::vector<SweepRow> sensitivity_sweep(const ModelParams& base, const std::string& parameter,
                                        const std::vector<double>& values, const SurfaceGrid& grid,
                                        const PricingSetup& setup) {
  auto pos = std::find_if(kParamNames.begin(), kParamNames.end(),
                          [&](const char* n) { return parameter == n; });
  if (pos == kParamNames.end()) throw ValidationError("unknown sweep parameter '" + parameter + "'");
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  const auto slot = static_cast<std::size_t>(pos - kParamNames.begin());
  std::vector<SweepRow> out;
  for (double v : values) {
    auto x = to_vector(base);
    x[slot] = v;
    for (auto& row : surface(from_vector(x), grid, setup)) out.push_back({parameter, v, row});
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "parameter,value,market,maturity,log_moneyness,forward,implied_vol,status\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.parameter << ',' << r.value << ',';
    write_row_tail(out, r.point);
  }
}

SkewFit fit_skew_power(std::vector<SkewRow> rows) {
  if (rows.size() < 4) throw ValidationError("skew fit needs at least 4 maturities");
  const double sign = rows.front().skew < 0.0 ? -1.0 : 1.0;
  for (const auto& r : rows) {
    if (!(r.maturity > 0.0)) throw ValidationError("skew fit needs positive maturities");
    if (r.skew == 0.0 || !std::isfinite(r.skew))
      throw ValidationError("zero ATM skew at T=" + std::to_string(r.maturity) +
                            ": the power law is undefined");
    if (r.skew * sign < 0.0) throw ValidationError("ATM skew changes sign across maturities");
  }
  const double n = static_cast<double>(rows.size());
  double mx = 0.0, my = 0.0;
  for (const auto& r : rows) {
    mx += std::log(r.maturity) / n;
    my += std::log(std::abs(r.skew)) / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& r : rows) {
    const double dx = std::log(r.maturity) - mx, dy = std::log(std::abs(r.skew)) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw ValidationError("skew fit needs distinct maturities");
  SkewFit fit;
  fit.power = sxy / sxx;
  fit.intercept = my - fit.power * mx;
  fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  fit.rows = std::move(rows);
  return fit;
}

SkewFit skew_decay_fit(const ModelParams& params, const std::vector<double>& maturities,
                       double dk, const PricingSetup& setup) {
  if (!(dk > 0.0)) throw ValidationError("skew difference width dk must be positive");
  if (!std::is_sorted(maturities.begin(), maturities.end()))
    throw ValidationError("skew maturities must be sorted");
  std::vector<OptionQuote> quotes;
  for (double T : maturities)
    for (double k : {-dk, 0.0, dk}) quotes.push_back({Market::spx, T, k, 1.0, 0.0, 0.0});
  const auto smile = model_implied_vols(params, quotes, setup);
  std::vector<SkewRow> rows;
  for (std::size_t m = 0; m < maturities.size(); ++m) {
    for (std::size_t j = 0; j < 3; ++j)
      if (!smile.iv[3 * m + j]) throw NumericalError("skew pricing failed: " + smile.failures[3 * m + j]);
    rows.push_back({maturities[m], *smile.iv[3 * m + 1],
                    (*smile.iv[3 * m + 2] - *smile.iv[3 * m]) / (2.0 * dk)});
  }
  return fit_skew_power(std::move(rows));
}

}  // namespace rhh
