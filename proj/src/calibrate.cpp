#include "rhh/calibrate.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rhh/errors.hpp"
#include "rhh/parallel.hpp"

namespace rhh {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  return ec == std::errc() && ptr == end && std::isfinite(v);
}

std::string describe(const OptionQuote& q) {
  std::ostringstream os;
  os << market_name(q.market) << " T=" << q.maturity << " k=" << q.log_moneyness;
  return os.str();
}

}  // namespace

const char* market_name(Market m) { return m == Market::spx ? "spx" : "vix"; }

double OptionQuote::strike() const { return forward * std::exp(log_moneyness); }

QuoteFile read_quotes(std::istream& in, double max_invalid_fraction) {
  static const std::array<const char*, 6> kColumns = {"market", "maturity", "log_moneyness",
                                                      "forward",  "bid_iv",   "ask_iv"};
  std::string line;
  std::size_t line_no = 0;
  std::array<std::size_t, 6> col{};
  bool have_header = false;
  while (!have_header && std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto names = split_csv(t);
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      auto it = std::find_if(names.begin(), names.end(),
                             [&](const std::string& n) { return lower(n) == kColumns[c]; });
      if (it == names.end())
        throw ValidationError(std::string("quote file is missing column '") + kColumns[c] + "'");
      col[c] = static_cast<std::size_t>(it - names.begin());
    }
    have_header = true;
  }
  if (!have_header) throw ValidationError("quote file has no header row");

  QuoteFile out;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    ++rows;
    const auto fields = split_csv(t);
    auto reject = [&](const std::string& msg) { out.issues.push_back({line_no, msg}); };
    const std::size_t need = *std::max_element(col.begin(), col.end()) + 1;
    if (fields.size() < need) {
      reject("expected at least " + std::to_string(need) + " fields, found " +
             std::to_string(fields.size()));
      continue;
    }
    OptionQuote q;
    const std::string market = lower(fields[col[0]]);
    if (market == "spx") {
      q.market = Market::spx;
    } else if (market == "vix") {
      q.market = Market::vix;
    } else {
      reject("unknown market '" + fields[col[0]] + "'");
      continue;
    }
    double* targets[5] = {&q.maturity, &q.log_moneyness, &q.forward, &q.bid_iv, &q.ask_iv};
    bool ok = true;
    for (std::size_t c = 1; c < 6 && ok; ++c) {
      if (!parse_double(fields[col[c]], *targets[c - 1])) {
        reject(std::string("non-numeric ") + kColumns[c] + " '" + fields[col[c]] + "'");
        ok = false;
      }
    }
    if (!ok) continue;
    if (!(q.maturity > 0.0)) {
      reject("maturity must be positive");
    } else if (!(q.forward > 0.0)) {
      reject("forward must be positive");
    } else if (!(q.bid_iv > 0.0)) {
      reject("bid_iv must be positive");
    } else if (q.ask_iv < q.bid_iv) {
      reject("crossed quote: ask_iv < bid_iv");
    } else {
      out.quotes.push_back(q);
    }
  }
  if (rows == 0) throw ValidationError("quote file has no data rows");
  if (static_cast<double>(out.issues.size()) > max_invalid_fraction * static_cast<double>(rows)) {
    std::ostringstream msg;
    msg << out.issues.size() << " of " << rows << " quote rows are invalid";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, out.issues.size()); ++i)
      msg << "; line " << out.issues[i].line << ": " << out.issues[i].message;
    throw ValidationError(msg.str());
  }
  return out;
}

QuoteFile load_quotes(const std::string& path, double max_invalid_fraction) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open quote file " + path);
  return read_quotes(in, max_invalid_fraction);
}

void write_quotes(std::ostream& out, const std::vector<OptionQuote>& quotes) {
  out << "market,maturity,log_moneyness,forward,bid_iv,ask_iv\n";
  char buf[32];
  auto put = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (const auto& q : quotes) {
    out << market_name(q.market) << ',';
    put(q.maturity);
    out << ',';
    put(q.log_moneyness);
    out << ',';
    put(q.forward);
    out << ',';
    put(q.bid_iv);
    out << ',';
    put(q.ask_iv);
    out << '\n';
  }
}

ModelSmile model_implied_vols(const ModelParams& params, const std::vector<OptionQuote>& quotes,
                              const PricingSetup& setup) {
  params.validate();
  const auto kn = build_multifactor(PowerKernel{params.alpha}, setup.factors, setup.partition);
  const bool any_vix = std::any_of(quotes.begin(), quotes.end(),
                                   [](const OptionQuote& q) { return q.market == Market::vix; });
  const LogReturnTransform spx(params, setup.law, kn, setup.transform);
  std::optional<Vix2Transform> vix;
  if (any_vix) vix.emplace(params, setup.law, kn, setup.transform);

  std::map<double, std::vector<std::size_t>> by_maturity;
  for (std::size_t i = 0; i < quotes.size(); ++i) by_maturity[quotes[i].maturity].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [T, idx] : by_maturity) groups.push_back(std::move(idx));

  ModelSmile out;
  out.iv.assign(quotes.size(), std::nullopt);
  out.failures.assign(quotes.size(), {});
  out.vix_futures.assign(quotes.size(), 0.0);
  parallel_for(groups.size(), [&](std::size_t g) {
    std::optional<double> future;
    std::string future_error;
    for (std::size_t i : groups[g]) {
      const OptionQuote& q = quotes[i];
      const double K = q.strike();
      try {
        if (q.market == Market::spx) {
          const OptionKind kind = q.log_moneyness < 0.0 ? OptionKind::put : OptionKind::call;
          const double price = spx_option(kind, std::log(K), q.maturity, q.forward, spx, setup.spx).price;
          out.iv[i] = implied_vol(VolKind::spx_black_scholes, kind, price, K, q.maturity, q.forward);
        } else {
          if (!future && future_error.empty()) {
            try {
              future = vix_future(q.maturity, *vix, setup.vix.tolerance).price;
            } catch (const std::exception& e) {
              future_error = e.what();
            }
          }
          if (!future) throw NumericalError("VIX future failed: " + future_error);
          out.vix_futures[i] = *future;
          const double price = vix_option(OptionKind::put, std::log(K), q.maturity, *vix, setup.vix).price;
          out.iv[i] = implied_vol(VolKind::vix_black76, OptionKind::put, price, K, q.maturity, *future);
        }
      } catch (const std::exception& e) {
        out.failures[i] = describe(q) + ": " + e.what();
      }
    }
  });
  return out;
}

QuoteGrid QuoteGrid::standard() {
  QuoteGrid g;
  for (int i = 0; i < 20; ++i) {
    g.spx_log_moneyness.push_back(-0.25 + 0.3 * i / 19.0);
    g.vix_log_moneyness.push_back(-0.05 + 0.95 * i / 19.0);
  }
  return g;
}

std::vector<OptionQuote> generate_quotes(const ModelParams& params, const QuoteGrid& grid,
                                         const PricingSetup& setup) {
  params.validate();
  std::vector<OptionQuote> quotes;
  std::vector<double> futures(grid.maturities.size(), 1.0);
  if (!grid.vix_log_moneyness.empty()) {
    const auto kn = build_multifactor(PowerKernel{params.alpha}, setup.factors, setup.partition);
    const Vix2Transform vix(params, setup.law, kn, setup.transform);
    for (std::size_t m = 0; m < grid.maturities.size(); ++m)
      futures[m] = vix_future(grid.maturities[m], vix, setup.vix.tolerance).price;
  }
  for (std::size_t m = 0; m < grid.maturities.size(); ++m) {
    const double T = grid.maturities[m];
    if (!(T > 0.0)) throw ValidationError("grid maturities must be positive");
    for (double k : grid.spx_log_moneyness)
      quotes.push_back({Market::spx, T, k * std::sqrt(T / 0.1), 1.0, 0.0, 0.0});
    for (double k : grid.vix_log_moneyness) quotes.push_back({Market::vix, T, k, futures[m], 0.0, 0.0});
  }
  const auto smile = model_implied_vols(params, quotes, setup);
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    if (!smile.iv[i]) throw NumericalError("cannot generate quote " + smile.failures[i]);
    const double half = quotes[i].market == Market::spx ? grid.spx_half_spread : grid.vix_half_spread;
    quotes[i].bid_iv = *smile.iv[i] - half;
    quotes[i].ask_iv = *smile.iv[i] + half;
    if (!(quotes[i].bid_iv > 0.0))
      throw ValidationError("half spread exceeds the model implied volatility at " +
                            describe(quotes[i]));
  }
  return quotes;
}

std::vector<double> default_weights(const std::vector<OptionQuote>& quotes, double cap) {
  std::vector<double> w(quotes.size());
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    const double s = quotes[i].spread();
    w[i] = s > 0.0 ? std::min(cap, 1.0 / (s * s)) : cap;
  }
  return w;
}

ObjectiveValue objective_eval(const ModelParams& params, const std::vector<OptionQuote>& quotes,
                              const std::vector<double>& weights, const PricingSetup& setup,
                              const ObjectiveConfig& cfg) {
  if (quotes.empty()) throw ValidationError("objective needs at least one quote");
  if (!weights.empty() && weights.size() != quotes.size())
    throw ValidationError("weights and quotes differ in length");
  const auto w = weights.empty() ? default_weights(quotes, cfg.weight_cap) : weights;
  const auto smile = model_implied_vols(params, quotes, setup);
  ObjectiveValue r;
  r.residuals.resize(quotes.size());
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    if (smile.iv[i]) {
      const double d = *smile.iv[i] - quotes[i].mid_iv();
      r.residuals[i] = d;
      r.value += w[i] * d * d;
    } else {
      r.residuals[i] = std::numeric_limits<double>::quiet_NaN();
      r.value += cfg.failure_penalty;
      r.diagnostics.push_back(smile.failures[i]);
      ++r.failures;
    }
  }
  if (r.failures == quotes.size())
    throw NumericalError("every quote failed to price; first failure: " + r.diagnostics.front());
  return r;
}

std::array<double, 7> to_vector(const ModelParams& p) {
  return {p.alpha, p.rho, p.b, p.c, p.lambda_j, p.beta, p.sigma0_sq};
}

ModelParams from_vector(const std::array<double, 7>& v) {
  ModelParams p;
  p.alpha = v[0];
  p.rho = v[1];
  p.b = v[2];
  p.c = v[3];
  p.lambda_j = v[4];
  p.beta = v[5];
  p.sigma0_sq = v[6];
  return p;
}

ParamBounds ParamBounds::defaults() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {{0.5 + 1e-6, -1.0, -inf, 1e-8, 0.0, 0.0, 0.0}, {1.0, 1.0, inf, inf, inf, inf, inf}};
}

bool ParamBounds::contains(const ModelParams& p) const {
  const auto v = to_vector(p);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(v[i] >= lower[i] && v[i] <= upper[i])) return false;
  return true;
}

namespace {

// Reflects a coordinate back into [lo, hi] (repeatedly for wide overshoots).
double reflect(double x, double lo, double hi) {
  if (!std::isfinite(x)) return std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
  for (int i = 0; i < 8 && (x < lo || x > hi); ++i) {
    if (x < lo) x = lo + (lo - x);
    if (x > hi) x = hi - (x - hi);
  }
  return std::clamp(x, lo, hi);
}

// Absolute floor for the initial simplex step per parameter.
constexpr std::array<double, 7> kStepFloor = {0.02, 0.05, 0.1, 0.01, 0.02, 0.005, 0.001};

}  // namespace

SearchResult bounded_simplex(const std::function<double(const std::array<double, 7>&)>& f,
                             const std::array<double, 7>& x0, const ParamBounds& bounds,
                             const CalibrationConfig& cfg,
                             const std::function<void(const AuditEntry&)>& progress) {
  using Vec = std::array<double, 7>;
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < 7; ++i) {
    if (!(x0[i] >= bounds.lower[i] && x0[i] <= bounds.upper[i]))
      throw ValidationError(std::string("initial ") + kParamNames[i] + " lies outside its bounds");
    if (cfg.free[i]) free.push_back(i);
  }

  SearchResult r;
  r.x = x0;
  auto record = [&](const Vec& x, double v) {
    if (v < r.value) {
      r.value = v;
      r.x = x;
      r.improved = true;
      r.trail.push_back({r.evaluations, v});
      if (progress) progress(r.trail.back());
    }
  };
  auto eval = [&](const Vec& x) {
    ++r.evaluations;
    const double v = f(x);
    const double safe = std::isfinite(v) ? v : std::numeric_limits<double>::max();
    record(x, safe);
    return safe;
  };
  r.value = f(x0);
  r.evaluations = 0;  // the starting point is not charged to the budget
  r.trail.push_back({0, r.value});
  if (progress) progress(r.trail.back());
  const std::size_t n = free.size();
  if (n == 0 || cfg.budget == 0) return r;

  // Gao-Han coefficients.
  const double dn = static_cast<double>(n);
  const double c_reflect = 1.0, c_expand = 1.0 + 2.0 / dn;
  const double c_contract = 0.75 - 0.5 / dn, c_shrink = 1.0 - 1.0 / dn;

  auto clamp_point = [&](Vec x) {
    for (std::size_t i : free) x[i] = reflect(x[i], bounds.lower[i], bounds.upper[i]);
    return x;
  };
  auto budget_left = [&] { return r.evaluations < cfg.budget; };

  for (std::size_t restart = 0; restart <= cfg.max_restarts && budget_left(); ++restart) {
    const double start_value = r.value;
    std::vector<Vec> simplex(n + 1, r.x);
    std::vector<double> values(n + 1, r.value);
    for (std::size_t k = 0; k < n && budget_left(); ++k) {
      const std::size_t i = free[k];
      const double step = std::max(cfg.initial_step * std::abs(r.x[i]), kStepFloor[i]);
      Vec x = r.x;
      x[i] += step;
      if (x[i] > bounds.upper[i]) x[i] = r.x[i] - step;
      simplex[k + 1] = clamp_point(x);
      values[k + 1] = eval(simplex[k + 1]);
    }
    std::vector<std::size_t> order(n + 1);
    while (budget_left()) {
      for (std::size_t k = 0; k <= n; ++k) order[k] = k;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
      const std::size_t best = order[0], worst = order[n], second = order[n - 1];
      if (values[worst] - values[best] <= cfg.f_tolerance) {
        r.converged = true;
        break;
      }
      double size = 0.0;
      for (std::size_t k = 0; k <= n; ++k)
        for (std::size_t i : free)
          size = std::max(size, std::abs(simplex[k][i] - simplex[best][i]) /
                                    std::max(kStepFloor[i], std::abs(simplex[best][i])));
      if (size < 1e-10) {
        r.converged = true;
        break;
      }
      ++r.iterations;

      Vec centroid{};
      for (std::size_t k = 0; k <= n; ++k)
        if (k != worst)
          for (std::size_t i : free) centroid[i] += simplex[k][i] / dn;
      auto along = [&](double t) {
        Vec x = simplex[worst];
        for (std::size_t i : free) x[i] = centroid[i] + t * (centroid[i] - simplex[worst][i]);
        return clamp_point(x);
      };
      const Vec xr = along(c_reflect);
      const double fr = eval(xr);
      if (fr < values[best]) {
        if (!budget_left()) {
          simplex[worst] = xr;
          values[worst] = fr;
          break;
        }
        const Vec xe = along(c_reflect * c_expand);
        const double fe = eval(xe);
        if (fe < fr) {
          simplex[worst] = xe;
          values[worst] = fe;
        } else {
          simplex[worst] = xr;
          values[worst] = fr;
        }
        continue;
      }
      if (fr < values[second]) {
        simplex[worst] = xr;
        values[worst] = fr;
        continue;
      }
      if (!budget_left()) break;
      const bool outside = fr < values[worst];
      const Vec xc = along(outside ? c_reflect * c_contract : -c_contract);
      const double fc = eval(xc);
      if (fc < (outside ? fr : values[worst])) {
        simplex[worst] = xc;
        values[worst] = fc;
        continue;
      }
      for (std::size_t k = 0; k <= n && budget_left(); ++k) {
        if (k == best) continue;
        for (std::size_t i : free)
          simplex[k][i] = simplex[best][i] + c_shrink * (simplex[k][i] - simplex[best][i]);
        simplex[k] = clamp_point(simplex[k]);
        values[k] = eval(simplex[k]);
      }
    }
    if (restart > 0 && !(r.value < start_value)) break;
  }
  return r;
}

namespace {

// Solves the symmetric positive definite system a x = y in place (Cholesky);
// false when a is not numerically positive definite.
bool cholesky_solve(std::vector<double> a, std::vector<double>& y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = v / d;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) y[i] -= a[i * n + k] * y[k];
    y[i] /= a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) y[i] -= a[k * n + i] * y[k];
    y[i] /= a[i * n + i];
  }
  return true;
}

}  // namespace

SearchResult bounded_least_squares(const ResidualFn& residuals, const std::array<double, 7>& x0,
                                   const ParamBounds& bounds, const CalibrationConfig& cfg,
                                   const std::function<void(const AuditEntry&)>& progress) {
  using Vec = std::array<double, 7>;
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < 7; ++i) {
    if (!(x0[i] >= bounds.lower[i] && x0[i] <= bounds.upper[i]))
      throw ValidationError(std::string("initial ") + kParamNames[i] + " lies outside its bounds");
    if (cfg.free[i]) free.push_back(i);
  }
  const std::size_t n = free.size();

  SearchResult r;
  r.x = x0;
  std::vector<double> res;
  auto try_eval = [&](const Vec& x, std::vector<double>& out) {
    try {
      out = residuals(x);
    } catch (const ValidationError&) {
      return false;
    } catch (const NumericalError&) {
      return false;
    }
    for (double v : out)
      if (!std::isfinite(v)) return false;
    return true;
  };
  auto sum_sq = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return s;
  };
  if (!try_eval(x0, res)) {
    r.value = std::numeric_limits<double>::infinity();
    return r;
  }
  r.value = sum_sq(res);
  r.trail.push_back({0, r.value});
  if (progress) progress(r.trail.back());
  if (n == 0 || cfg.budget == 0) return r;
  const std::size_t m = res.size();

  auto budget_left = [&] { return r.evaluations < cfg.budget; };
  double mu = -1.0, nu = 2.0;
  std::vector<double> jac(m * n), a(n * n), g(n);
  while (budget_left()) {
    // Forward differences; a step that would leave the box goes backwards.
    for (std::size_t k = 0; k < n && budget_left(); ++k) {
      const std::size_t i = free[k];
      double h = 1e-4 * std::max(std::abs(r.x[i]), kStepFloor[i]);
      if (r.x[i] + h > bounds.upper[i]) h = -h;
      Vec x = r.x;
      x[i] += h;
      std::vector<double> shifted;
      ++r.evaluations;
      const bool ok = try_eval(x, shifted) && shifted.size() == m;
      for (std::size_t q = 0; q < m; ++q) jac[q * n + k] = ok ? (shifted[q] - res[q]) / h : 0.0;
    }
    if (!budget_left()) break;
    ++r.iterations;
    for (std::size_t j = 0; j < n; ++j) {
      g[j] = 0.0;
      for (std::size_t q = 0; q < m; ++q) g[j] += jac[q * n + j] * res[q];
      for (std::size_t k = 0; k <= j; ++k) {
        double v = 0.0;
        for (std::size_t q = 0; q < m; ++q) v += jac[q * n + j] * jac[q * n + k];
        a[j * n + k] = a[k * n + j] = v;
      }
    }
    double gmax = 0.0, dmax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      gmax = std::max(gmax, std::abs(g[j]) / std::sqrt(std::max(a[j * n + j], 1e-300)));
      dmax = std::max(dmax, a[j * n + j]);
    }
    if (gmax <= 1e-10 * std::sqrt(std::max(r.value, 1e-300)) || r.value <= 1e-30) {
      r.converged = true;
      break;
    }
    if (mu < 0.0) mu = 1e-3;  // relative to diag(J^T J)

    bool accepted = false;
    while (!accepted && budget_left()) {
      std::vector<double> damped = a, delta(n);
      for (std::size_t j = 0; j < n; ++j) {
        damped[j * n + j] += mu * std::max(a[j * n + j], 1e-12 * dmax);
        delta[j] = -g[j];
      }
      if (!cholesky_solve(damped, delta, n)) {
        mu *= nu;
        nu *= 2.0;
        continue;
      }
      Vec x = r.x;
      double step = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = free[k];
        x[i] = std::clamp(r.x[i] + delta[k], bounds.lower[i], bounds.upper[i]);
        delta[k] = x[i] - r.x[i];
        step = std::max(step, std::abs(delta[k]) / std::max(std::abs(r.x[i]), kStepFloor[i]));
      }
      if (step < 1e-12) {
        r.converged = true;
        return r;
      }
      // Predicted decrease of the linear model: -(2 g.d + d'Ad).
      double predicted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        predicted -= 2.0 * g[j] * delta[j];
        for (std::size_t k = 0; k < n; ++k) predicted -= delta[j] * a[j * n + k] * delta[k];
      }
      std::vector<double> trial;
      ++r.evaluations;
      const bool ok = try_eval(x, trial) && trial.size() == m;
      const double value = ok ? sum_sq(trial) : std::numeric_limits<double>::infinity();
      const double gain = predicted > 0.0 ? (r.value - value) / predicted : -1.0;
      if (value < r.value && gain > 1e-2) {
        const double previous = r.value;
        r.x = x;
        r.value = value;
        res = std::move(trial);
        r.improved = true;
        r.trail.push_back({r.evaluations, value});
        if (progress) progress(r.trail.back());
        mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * gain - 1.0, 3));
        nu = 2.0;
        accepted = true;
        if (previous - value <= cfg.f_tolerance * std::max(previous, 1e-300) && step < 1e-8) {
          r.converged = true;
          return r;
        }
      } else {
        mu *= nu;
        nu *= 2.0;
        if (nu > 1e15) return r;  // no descent left at this resolution
      }
    }
  }
  return r;
}

CalibrationResult calibrate_run(const ModelParams& initial, const ParamBounds& bounds,
                                const std::vector<OptionQuote>& quotes,
                                const CalibrationConfig& cfg,
                                const std::function<void(const AuditEntry&)>& progress) {
  if (quotes.empty()) throw ValidationError("calibration needs at least one quote");
  initial.validate();
  if (!bounds.contains(initial)) throw ValidationError("initial parameters lie outside the bounds");
  const auto start = std::chrono::steady_clock::now();
  const auto weights = default_weights(quotes, cfg.objective.weight_cap);
  auto f = [&](const std::array<double, 7>& x) {
    try {
      return objective_eval(from_vector(x), quotes, weights, cfg.setup, cfg.objective).value;
    } catch (const ValidationError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  // sqrt(w) * (model - mid); a failed quote contributes sqrt(penalty) so the
  // sum of squares equals the objective.
  auto residual_vector = [&](const std::array<double, 7>& x) {
    const auto v = objective_eval(from_vector(x), quotes, weights, cfg.setup, cfg.objective);
    std::vector<double> out(quotes.size());
    for (std::size_t i = 0; i < quotes.size(); ++i)
      out[i] = std::isfinite(v.residuals[i]) ? std::sqrt(weights[i]) * v.residuals[i]
                                             : std::sqrt(cfg.objective.failure_penalty);
    return out;
  };

  SearchResult s;
  if (cfg.method == CalibrationMethod::simplex) {
    s = bounded_simplex(f, to_vector(initial), bounds, cfg, progress);
  } else {
    s = bounded_least_squares(residual_vector, to_vector(initial), bounds, cfg, progress);
    if (!s.converged && s.evaluations < cfg.budget) {
      CalibrationConfig rest = cfg;
      rest.budget = cfg.budget - s.evaluations;
      const std::size_t offset = s.evaluations;
      auto shifted = [&](const AuditEntry& e) {
        if (progress && e.evaluation > 0) progress({offset + e.evaluation, e.best_objective});
      };
      const auto t = bounded_simplex(f, s.x, bounds, rest, shifted);
      for (const auto& e : t.trail)
        if (e.evaluation > 0) s.trail.push_back({offset + e.evaluation, e.best_objective});
      if (t.value < s.value) {
        s.x = t.x;
        s.value = t.value;
        s.improved = true;
      }
      s.evaluations += t.evaluations;
      s.iterations += t.iterations;
      s.converged = t.converged;
    }
  }

  CalibrationResult r;
  r.params = from_vector(s.x);
  r.evaluations = s.evaluations;
  r.iterations = s.iterations;
  r.improved = s.improved;
  r.trail = s.trail;
  const auto final_value = objective_eval(r.params, quotes, weights, cfg.setup, cfg.objective);
  r.objective = final_value.value;
  r.residuals = final_value.residuals;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string params_json(const ModelParams& p) {
  nlohmann::ordered_json j;
  const auto v = to_vector(p);
  for (std::size_t i = 0; i < v.size(); ++i) j[kParamNames[i]] = v[i];
  return j.dump(2);
}

ModelParams params_from_json(const std::string& text, const ModelParams& base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid parameter JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("parameter JSON must be an object");
  auto v = to_vector(base);
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto pos = std::find_if(kParamNames.begin(), kParamNames.end(),
                            [&](const char* n) { return it.key() == n; });
    if (pos == kParamNames.end()) throw ValidationError("unknown parameter '" + it.key() + "'");
    if (!it.value().is_number()) throw ValidationError("parameter '" + it.key() + "' must be a number");
    v[static_cast<std::size_t>(pos - kParamNames.begin())] = it.value().get<double>();
  }
  const ModelParams p = from_vector(v);
  p.validate();
  return p;
}

std::string result_json(const CalibrationResult& r, const std::vector<OptionQuote>& quotes) {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(params_json(r.params));
  j["objective"] = r.objective;
  j["evaluations"] = r.evaluations;
  j["iterations"] = r.iterations;
  j["wall_seconds"] = r.wall_seconds;
  j["improved"] = r.improved;
  auto& res = j["residuals"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.residuals.size() && i < quotes.size(); ++i) {
    nlohmann::ordered_json row;
    row["market"] = market_name(quotes[i].market);
    row["maturity"] = quotes[i].maturity;
    row["log_moneyness"] = quotes[i].log_moneyness;
    row["mid_iv"] = quotes[i].mid_iv();
    if (std::isfinite(r.residuals[i]))
      row["residual"] = r.residuals[i];
    else
      row["residual"] = nullptr;
    res.push_back(row);
  }
  auto& trail = j["trail"] = nlohmann::ordered_json::array();
  for (const auto& e : r.trail) trail.push_back({{"evaluation", e.evaluation}, {"best", e.best_objective}});
  return j.dump(2);
}

}  // namespace rhh
