// rhh: pricing, calibration and analysis commands for the rough Heston model
// with Hawkes-type jumps. See docs/cli.md for the configuration schema.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rhh/analysis.hpp"
#include "rhh/calibrate.hpp"
#include "rhh/errors.hpp"
#include "rhh/pricing.hpp"
#include "rhh/simulate.hpp"

using json = nlohmann::ordered_json;
using namespace rhh;

namespace {

enum class Format { json, csv };

struct Options {
  std::string verb;
  std::string config_path;
  std::string output_path;
  std::string format = "json";
  // Flag overrides; each maps onto a config key (docs/cli.md).
  std::optional<double> maturity;
  std::vector<double> log_strikes;
  std::string kind;
  std::string quotes;
  std::optional<std::size_t> budget;
  std::optional<std::size_t> paths;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> factors;
  std::optional<std::size_t> threads;
  std::string parameter;
  std::vector<double> values;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  try {
    json j = json::parse(in, nullptr, true, true);
    if (!j.is_object()) throw ValidationError("config root must be an object");
    return j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid config JSON: ") + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ValidationError(std::string("config key '") + key + "' must be an object");
  return j.at(key);
}

void apply_overrides(json& cfg, const Options& o) {
  if (o.maturity) cfg["maturity"] = *o.maturity;
  if (!o.log_strikes.empty()) cfg["log_strikes"] = o.log_strikes;
  if (!o.kind.empty()) cfg["kind"] = o.kind;
  if (!o.quotes.empty()) cfg["quotes"] = o.quotes;
  if (o.budget) cfg["calibration"]["budget"] = *o.budget;
  if (o.paths) cfg["simulation"]["paths"] = *o.paths;
  if (o.seed) cfg["simulation"]["seed"] = *o.seed;
  if (o.factors) cfg["numerics"]["factors"] = *o.factors;
  if (o.threads) cfg["threads"] = *o.threads;
  if (!o.parameter.empty()) cfg["sweep"]["parameter"] = o.parameter;
  if (!o.values.empty()) cfg["sweep"]["values"] = o.values;
}

ModelParams read_params(const json& cfg, const char* key = "params") {
  if (!cfg.contains(key)) return ModelParams::table1();
  return params_from_json(cfg.at(key).dump(), ModelParams::table1());
}

JumpLaw read_law(const json& cfg) {
  const json& j = section(cfg, "jump_law");
  const auto type = get_or<std::string>(j, "type", "exponential");
  if (type == "none") return JumpLaw::none();
  if (type == "exponential") return JumpLaw::exponential(get_or<double>(j, "rate", 1.0));
  throw ValidationError("jump_law.type must be 'exponential' or 'none'");
}

PricingSetup read_setup(const json& cfg) {
  PricingSetup s;
  s.law = read_law(cfg);
  const json& n = section(cfg, "numerics");
  s.factors = get_or<std::size_t>(n, "factors", s.factors);
  if (s.factors == 0) throw ValidationError("numerics.factors must be positive");
  s.transform.steps = get_or<std::size_t>(n, "riccati_steps", s.transform.steps);
  s.transform.h_intervals = get_or<std::size_t>(n, "h_intervals", s.transform.h_intervals);
  if (s.transform.steps == 0 || s.transform.h_intervals == 0)
    throw ValidationError("numerics.riccati_steps and numerics.h_intervals must be positive");
  s.transform.cache_limit = get_or<std::size_t>(n, "cache_size", s.transform.cache_limit);
  if (const char* env = std::getenv("RHH_CACHE_SIZE")) {
    try {
      s.transform.cache_limit = static_cast<std::size_t>(std::stoull(env));
    } catch (...) {
      throw ValidationError("RHH_CACHE_SIZE must be a nonnegative integer");
    }
  }
  s.spx.tolerance = get_or<double>(n, "spx_tolerance", s.spx.tolerance);
  s.vix.tolerance = get_or<double>(n, "vix_tolerance", s.vix.tolerance);
  s.vix.z_r = get_or<double>(n, "z_r", s.vix.z_r);
  s.vix.control_variate = get_or<bool>(n, "control_variate", s.vix.control_variate);
  s.partition.rho_max = get_or<double>(n, "rho_max", s.partition.rho_max);
  return s;
}

double read_maturity(const json& cfg) {
  const double T = get_or<double>(cfg, "maturity", 0.1);
  if (!(T > 0.0)) throw ValidationError("maturity must be positive");
  return T;
}

std::vector<double> read_list(const json& j, const char* key, std::vector<double> fallback) {
  return get_or<std::vector<double>>(j, key, std::move(fallback));
}

OptionKind read_kind(const json& cfg, OptionKind fallback) {
  const auto k = get_or<std::string>(cfg, "kind", fallback == OptionKind::call ? "call" : "put");
  if (k == "call") return OptionKind::call;
  if (k == "put") return OptionKind::put;
  throw ValidationError("kind must be 'call' or 'put'");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Prints either a JSON document or CSV rows to the chosen stream.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;

  void csv(std::ostream& out) const {
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out << ',';
        if (r[i].is_null()) continue;
        if (r[i].is_string()) {
          out << r[i].get<std::string>();
        } else {
          out << r[i].dump();
        }
      }
      out << '\n';
    }
  }
  json to_json() const {
    json arr = json::array();
    for (const auto& r : rows) {
      json o;
      for (std::size_t i = 0; i < columns.size(); ++i) o[columns[i]] = r[i];
      arr.push_back(o);
    }
    return arr;
  }
};

void emit(std::ostream& out, Format f, const Table& t, json extra = json::object()) {
  if (f == Format::csv) {
    t.csv(out);
    return;
  }
  extra["rows"] = t.to_json();
  out << extra.dump(2) << '\n';
}

MultiFactorKernel kernel_for(const ModelParams& p, const PricingSetup& s) {
  return build_multifactor(PowerKernel{p.alpha}, s.factors, s.partition);
}

void cmd_price_spx(const json& cfg, std::ostream& out, Format f) {
  const auto p = read_params(cfg);
  const auto setup = read_setup(cfg);
  const double T = read_maturity(cfg);
  const double S0 = get_or<double>(cfg, "spot", 1.0);
  if (!(S0 > 0.0)) throw ValidationError("spot must be positive");
  const auto kind = read_kind(cfg, OptionKind::call);
  const auto ks = read_list(cfg, "log_strikes", {0.0});
  const LogReturnTransform tr(p, setup.law, kernel_for(p, setup), setup.transform);
  Table t{{"log_strike", "strike", "price", "implied_vol", "quadrature_error", "truncation", "bound"}, {}};
  for (double k : ks) {
    const double K = S0 * std::exp(k);
    const auto r = spx_option(kind, std::log(K), T, S0, tr, setup.spx);
    double iv = NAN;
    try {
      iv = implied_vol(VolKind::spx_black_scholes, kind, r.price, K, T, S0);
    } catch (const BoundViolation&) {
    }
    t.rows.push_back({k, K, r.price, number_or_null(iv), r.quadrature_error, r.truncation, r.bound});
  }
  emit(out, f, t, {{"maturity", T}, {"kind", kind == OptionKind::call ? "call" : "put"}, {"spot", S0}});
}

void cmd_price_vix(const json& cfg, std::ostream& out, Format f) {
  const auto p = read_params(cfg);
  const auto setup = read_setup(cfg);
  const double T = read_maturity(cfg);
  const auto kind = read_kind(cfg, OptionKind::put);
  const Vix2Transform tr(p, setup.law, kernel_for(p, setup), setup.transform);
  const double future = vix_future(T, tr, setup.vix.tolerance).price;
  // log_strikes are ln K in VIX points unless log_moneyness is given.
  std::vector<double> ks;
  if (cfg.contains("log_moneyness")) {
    for (double m : read_list(cfg, "log_moneyness", {})) ks.push_back(std::log(future) + m);
  } else {
    ks = read_list(cfg, "log_strikes", {std::log(future)});
  }
  Table t{{"log_strike", "strike", "price", "implied_vol", "quadrature_error", "truncation", "bound"}, {}};
  for (double k : ks) {
    const auto r = vix_option(kind, k, T, tr, setup.vix);
    double iv = NAN;
    try {
      iv = implied_vol(VolKind::vix_black76, kind, r.price, std::exp(k), T, future);
    } catch (const BoundViolation&) {
    }
    t.rows.push_back({k, std::exp(k), r.price, number_or_null(iv), r.quadrature_error, r.truncation, r.bound});
  }
  emit(out, f, t, {{"maturity", T}, {"kind", kind == OptionKind::call ? "call" : "put"}, {"future", future}});
}

void cmd_vix_future(const json& cfg, std::ostream& out, Format f) {
  const auto p = read_params(cfg);
  const auto setup = read_setup(cfg);
  const auto maturities = read_list(cfg, "maturities", {read_maturity(cfg)});
  const Vix2Transform tr(p, setup.law, kernel_for(p, setup), setup.transform);
  Table t{{"maturity", "future", "vix2_expectation", "quadrature_error", "truncation"}, {}};
  for (double T : maturities) {
    const auto r = vix_future(T, tr, setup.vix.tolerance);
    t.rows.push_back({T, r.price, tr.expectation(T), r.quadrature_error, r.truncation});
  }
  emit(out, f, t, {{"vix_spot", std::sqrt(tr.spot())}});
}

SurfaceGrid read_grid(const json& cfg) {
  SurfaceGrid g;
  const json& j = section(cfg, "grid");
  g.spx_maturities = read_list(j, "spx_maturities", g.spx_maturities);
  g.spx_log_moneyness = read_list(j, "spx_log_moneyness", g.spx_log_moneyness);
  g.vix_maturities = read_list(j, "vix_maturities", g.vix_maturities);
  g.vix_log_moneyness = read_list(j, "vix_log_moneyness", g.vix_log_moneyness);
  return g;
}

Table surface_table(const std::vector<SurfaceRow>& rows) {
  Table t{{"market", "maturity", "log_moneyness", "forward", "implied_vol", "status"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({market_name(r.market), r.maturity, r.log_moneyness, r.forward,
                      number_or_null(r.implied_vol), r.status});
  return t;
}

void cmd_surface(const json& cfg, std::ostream& out, Format f) {
  const auto rows = surface(read_params(cfg), read_grid(cfg), read_setup(cfg));
  if (f == Format::csv) {
    write_surface_csv(out, rows);
    return;
  }
  emit(out, f, surface_table(rows));
}

void cmd_sensitivity(const json& cfg, std::ostream& out, Format f) {
  const json& s = section(cfg, "sweep");
  const auto parameter = get_or<std::string>(s, "parameter", "alpha");
  const auto values = read_list(s, "values", {});
  if (values.empty()) throw ValidationError("sweep.values must list at least one value");
  const auto rows = sensitivity_sweep(read_params(cfg), parameter, values, read_grid(cfg), read_setup(cfg));
  if (f == Format::csv) {
    write_sweep_csv(out, rows);
    return;
  }
  Table t{{"parameter", "value", "market", "maturity", "log_moneyness", "forward", "implied_vol", "status"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({r.parameter, r.value, market_name(r.point.market), r.point.maturity,
                      r.point.log_moneyness, r.point.forward, number_or_null(r.point.implied_vol),
                      r.point.status});
  emit(out, f, t);
}

void cmd_skew_decay(const json& cfg, std::ostream& out, Format f) {
  const json& s = section(cfg, "skew");
  std::vector<double> maturities;
  for (double x : {-5.5, -5.0, -4.5, -4.0, -3.5}) maturities.push_back(std::exp(x));
  maturities = read_list(s, "maturities", maturities);
  const double dk = get_or<double>(s, "dk", 1e-3);
  json numerics = cfg.contains("numerics") ? cfg.at("numerics") : json::object();
  if (!numerics.contains("factors")) numerics["factors"] = 50;
  if (!numerics.contains("riccati_steps")) numerics["riccati_steps"] = 2000;
  json local = cfg;
  local["numerics"] = numerics;
  const auto fit = skew_decay_fit(read_params(cfg), maturities, dk, read_setup(local));
  Table t{{"maturity", "log_maturity", "atm_iv", "skew"}, {}};
  for (const auto& r : fit.rows) t.rows.push_back({r.maturity, std::log(r.maturity), r.atm_iv, r.skew});
  emit(out, f, t, {{"power", fit.power}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}, {"dk", dk}});
}

void cmd_calibrate(const json& cfg, std::ostream& out, Format f) {
  const auto path = get_or<std::string>(cfg, "quotes", "");
  if (path.empty()) throw ValidationError("calibrate needs a quote file (config key 'quotes')");
  const auto file = load_quotes(path);
  for (const auto& issue : file.issues)
    std::cerr << "quotes line " << issue.line << ": " << issue.message << '\n';
  const json& c = section(cfg, "calibration");
  CalibrationConfig cc;
  cc.setup = read_setup(cfg);
  cc.budget = get_or<std::size_t>(c, "budget", cc.budget);
  cc.initial_step = get_or<double>(c, "initial_step", cc.initial_step);
  cc.max_restarts = get_or<std::size_t>(c, "max_restarts", cc.max_restarts);
  cc.objective.weight_cap = get_or<double>(c, "weight_cap", cc.objective.weight_cap);
  cc.objective.failure_penalty = get_or<double>(c, "failure_penalty", cc.objective.failure_penalty);
  if (c.contains("free")) {
    cc.free.fill(false);
    for (const auto& name : c.at("free").get<std::vector<std::string>>()) {
      auto pos = std::find(kParamNames.begin(), kParamNames.end(), name);
      if (pos == kParamNames.end()) throw ValidationError("unknown free parameter '" + name + "'");
      cc.free[static_cast<std::size_t>(pos - kParamNames.begin())] = true;
    }
  }
  const ModelParams initial = c.contains("initial")
                                  ? params_from_json(c.at("initial").dump(), read_params(cfg))
                                  : read_params(cfg);
  const auto result = calibrate_run(initial, ParamBounds::defaults(), file.quotes, cc,
                                    [](const AuditEntry& e) {
                                      std::cerr << "evaluation " << e.evaluation << " best "
                                                << e.best_objective << '\n';
                                    });
  if (f == Format::csv) {
    Table t{{"market", "maturity", "log_moneyness", "mid_iv", "residual"}, {}};
    for (std::size_t i = 0; i < file.quotes.size(); ++i) {
      const auto& q = file.quotes[i];
      t.rows.push_back({market_name(q.market), q.maturity, q.log_moneyness, q.mid_iv(),
                        number_or_null(result.residuals[i])});
    }
    t.csv(out);
    return;
  }
  out << result_json(result, file.quotes) << '\n';
}

void cmd_generate(const json& cfg, std::ostream& out, Format) {
  const json& g = section(cfg, "quote_grid");
  QuoteGrid grid = QuoteGrid::standard();
  grid.maturities = read_list(g, "maturities", grid.maturities);
  grid.spx_log_moneyness = read_list(g, "spx_log_moneyness", grid.spx_log_moneyness);
  grid.vix_log_moneyness = read_list(g, "vix_log_moneyness", grid.vix_log_moneyness);
  grid.spx_half_spread = get_or<double>(g, "spx_half_spread", grid.spx_half_spread);
  grid.vix_half_spread = get_or<double>(g, "vix_half_spread", grid.vix_half_spread);
  write_quotes(out, generate_quotes(read_params(cfg), grid, read_setup(cfg)));
}

void cmd_simulate(const json& cfg, std::ostream& out, Format f) {
  const auto p = read_params(cfg);
  const auto setup = read_setup(cfg);
  const double T = read_maturity(cfg);
  const json& s = section(cfg, "simulation");
  SimConfig sc;
  sc.n_paths = get_or<std::size_t>(s, "paths", sc.n_paths);
  sc.step = get_or<double>(s, "step", sc.step);
  sc.seed = get_or<std::uint64_t>(s, "seed", sc.seed);
  sc.antithetic = get_or<bool>(s, "antithetic", sc.antithetic);
  const auto scheme = get_or<std::string>(s, "scheme", "positive_split");
  if (scheme == "positive_split") {
    sc.scheme = SimScheme::positive_split;
  } else if (scheme == "full_truncation_euler") {
    sc.scheme = SimScheme::full_truncation_euler;
  } else {
    throw ValidationError("simulation.scheme must be 'positive_split' or 'full_truncation_euler'");
  }
  const auto kn = kernel_for(p, setup);
  const auto forcing = make_h_forcing(p, setup.law, kn, ResolventMode::multifactor, setup.transform.h_intervals);
  const auto samples = simulate_terminal(p, setup.law, kn, forcing, T, sc);
  if (const auto dump = get_or<std::string>(s, "dump", ""); !dump.empty()) {
    std::ofstream d(dump);
    if (!d) throw ValidationError("cannot write sample dump " + dump);
    write_samples(d, samples);
  }
  const auto spx_ks = read_list(s, "spx_log_strikes", {0.0});
  const auto vix_ks = read_list(s, "vix_log_strikes", {});
  Table t{{"instrument", "log_strike", "price", "std_error"}, {}};
  auto add = [&](const char* name, McInstrument inst, double k) {
    const auto e = mc_price(inst, k, samples);
    t.rows.push_back({name, k, e.value, e.std_error});
  };
  for (double k : spx_ks) add("spx_call", McInstrument::spx_call, k);
  const auto fut = mc_price(McInstrument::vix_future, 0.0, samples);
  t.rows.push_back({"vix_future", nullptr, fut.value, fut.std_error});
  for (double k : vix_ks) add("vix_put", McInstrument::vix_put, k);
  for (double k : vix_ks) add("vix_call", McInstrument::vix_call, k);
  emit(out, f, t, {{"maturity", T}, {"paths", sc.n_paths}, {"seed", sc.seed}, {"scheme", scheme}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rough Heston with Hawkes-type jumps: pricing, calibration and analysis"};
  app.require_subcommand(1, 1);
  Options o;
  app.add_option("-c,--config", o.config_path, "JSON configuration file");
  app.add_option("-o,--output", o.output_path, "output file (default: stdout)");
  app.add_option("-f,--format", o.format, "output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--maturity", o.maturity, "maturity in years (config: maturity)");
  app.add_option("-k,--log-strike", o.log_strikes, "log-strikes (config: log_strikes)");
  app.add_option("--kind", o.kind, "call or put (config: kind)");
  app.add_option("--quotes", o.quotes, "quote CSV (config: quotes)");
  app.add_option("--budget", o.budget, "objective evaluations (config: calibration.budget)");
  app.add_option("--paths", o.paths, "Monte Carlo paths (config: simulation.paths)");
  app.add_option("--seed", o.seed, "Monte Carlo seed (config: simulation.seed)");
  app.add_option("--factors", o.factors, "kernel factors (config: numerics.factors)");
  app.add_option("--threads", o.threads, "worker threads (config: threads; env RHH_THREADS)");
  app.add_option("--parameter", o.parameter, "swept parameter (config: sweep.parameter)");
  app.add_option("--values", o.values, "swept values (config: sweep.values)");
  const std::pair<const char*, const char*> verbs[] = {
      {"price-spx", "SPX option prices and implied vols"},
      {"price-vix", "VIX option prices and implied vols"},
      {"vix-future", "VIX future price"},
      {"surface", "SPX and VIX implied volatility surface"},
      {"calibrate", "fit parameters to a quote CSV"},
      {"sensitivity", "surfaces across values of one parameter"},
      {"skew-decay", "ATM skew power-law fit"},
      {"simulate", "Monte Carlo prices with standard errors"},
      {"generate", "synthetic quotes from the model"}};
  for (const auto& [verb, help] : verbs) app.add_subcommand(verb, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  o.verb = app.get_subcommands().front()->get_name();

  try {
    json cfg = load_config(o.config_path);
    apply_overrides(cfg, o);
    if (cfg.contains("threads")) {
      const auto n = get_or<std::size_t>(cfg, "threads", 1);
      if (n == 0) throw ValidationError("threads must be positive");
      setenv("RHH_THREADS", std::to_string(n).c_str(), 1);
    }
    const Format format = o.format == "csv" ? Format::csv : Format::json;
    std::ofstream file;
    if (!o.output_path.empty()) {
      file.open(o.output_path);
      if (!file) throw ValidationError("cannot write output file " + o.output_path);
    }
    std::ostream& out = o.output_path.empty() ? std::cout : file;
    out.precision(17);
    if (o.verb == "price-spx") cmd_price_spx(cfg, out, format);
    else if (o.verb == "price-vix") cmd_price_vix(cfg, out, format);
    else if (o.verb == "vix-future") cmd_vix_future(cfg, out, format);
    else if (o.verb == "surface") cmd_surface(cfg, out, format);
    else if (o.verb == "calibrate") cmd_calibrate(cfg, out, format);
    else if (o.verb == "sensitivity") cmd_sensitivity(cfg, out, format);
    else if (o.verb == "skew-decay") cmd_skew_decay(cfg, out, format);
    else if (o.verb == "simulate") cmd_simulate(cfg, out, format);
    else if (o.verb == "generate") cmd_generate(cfg, out, format);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}
