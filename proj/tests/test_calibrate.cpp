#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rhh/calibrate.hpp"
#include "rhh/errors.hpp"

using namespace rhh;

namespace {

PricingSetup quick_setup() {
  PricingSetup s;
  s.factors = 8;
  s.transform = TransformOptions{150, 150};
  return s;
}

std::vector<OptionQuote> small_grid(const ModelParams& p) {
  QuoteGrid g;
  g.maturities = {0.1};
  g.spx_log_moneyness = {-0.1, 0.0};
  g.vix_log_moneyness = {0.0, 0.3};
  return generate_quotes(p, g, quick_setup());
}

}  // namespace

TEST_CASE("quote CSV round trip") {
  const std::vector<OptionQuote> quotes = {{Market::spx, 0.1, -0.05, 1.0, 0.2, 0.21},
                                           {Market::vix, 0.25, 0.3, 17.123456789012345, 0.9, 0.95}};
  std::stringstream io;
  write_quotes(io, quotes);
  const auto back = read_quotes(io);
  REQUIRE(back.quotes.size() == 2);
  CHECK(back.issues.empty());
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.quotes[i].market == quotes[i].market);
    CHECK(back.quotes[i].maturity == quotes[i].maturity);
    CHECK(back.quotes[i].log_moneyness == quotes[i].log_moneyness);
    CHECK(back.quotes[i].forward == quotes[i].forward);
    CHECK(back.quotes[i].bid_iv == quotes[i].bid_iv);
    CHECK(back.quotes[i].ask_iv == quotes[i].ask_iv);
  }
}

TEST_CASE("quote rows are validated with line diagnostics") {
  std::stringstream in;
  in << "Ask_IV,market,maturity,log_moneyness,forward,bid_iv,note\n";
  for (int i = 0; i < 10; ++i) in << "0.21,spx,0.1,0.0,1.0,0.2,x\n";
  in << "0.19,spx,0.1,0.0,1.0,0.2,crossed\n";
  const auto file = read_quotes(in);
  CHECK(file.quotes.size() == 10);
  REQUIRE(file.issues.size() == 1);
  CHECK(file.issues[0].line == 12);
  CHECK(file.issues[0].message == "crossed quote: ask_iv < bid_iv");
  CHECK(file.quotes[0].ask_iv == 0.21);
}

TEST_CASE("too many bad rows fail the whole file") {
  std::stringstream in;
  in << "market,maturity,log_moneyness,forward,bid_iv,ask_iv\n"
     << "spx,0.1,0,1,0.2,0.21\n"
     << "spy,0.1,0,1,0.2,0.21\n"
     << "spx,abc,0,1,0.2,0.21\n";
  try {
    read_quotes(in);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("unknown market") != std::string::npos);
    CHECK(msg.find("non-numeric maturity 'abc'") != std::string::npos);
  }
  std::stringstream missing("market,maturity,forward,bid_iv,ask_iv\nspx,0.1,1,0.2,0.3\n");
  CHECK_THROWS_AS(read_quotes(missing), ValidationError);
  CHECK_THROWS_AS(load_quotes("/nonexistent/quotes.csv"), ValidationError);
}

TEST_CASE("default weights are inverse squared spreads with a cap") {
  const std::vector<OptionQuote> quotes = {{Market::spx, 0.1, 0.0, 1.0, 0.2, 0.22},
                                           {Market::spx, 0.1, 0.0, 1.0, 0.2, 0.2}};
  const auto w = default_weights(quotes, 1e6);
  CHECK(w[0] == doctest::Approx(2500.0));
  CHECK(w[1] == 1e6);
}

TEST_CASE("a miss by one spread costs one") {
  const auto p = ModelParams::table1();
  auto quotes = small_grid(p);
  // Shift each quote so the mid sits one spread above the model.
  for (auto& q : quotes) {
    const double s = q.spread();
    q.bid_iv += s;
    q.ask_iv += s;
  }
  const auto v = objective_eval(p, quotes, {}, quick_setup());
  CHECK(v.failures == 0);
  CHECK(v.value == doctest::Approx(static_cast<double>(quotes.size())).epsilon(1e-8));
  for (std::size_t i = 0; i < quotes.size(); ++i)
    CHECK(v.residuals[i] == doctest::Approx(-quotes[i].spread()).epsilon(1e-6));
  // Generated quotes are reproduced exactly.
  const auto exact = objective_eval(p, small_grid(p), {}, quick_setup());
  CHECK(exact.value < 1e-16);
}

TEST_CASE("zero-budget calibration returns the initial point") {
  const auto truth = ModelParams::table1();
  const auto quotes = small_grid(truth);
  auto start = truth;
  start.rho = -0.6;
  CalibrationConfig cfg;
  cfg.budget = 0;
  cfg.setup = quick_setup();
  const auto r = calibrate_run(start, ParamBounds::defaults(), quotes, cfg);
  CHECK(r.params == start);
  CHECK_FALSE(r.improved);
  CHECK(r.evaluations == 0);
  CHECK(r.objective == doctest::Approx(objective_eval(start, quotes, {}, cfg.setup).value));
}

TEST_CASE("bounded simplex minimizes inside the box and stops on its faces") {
  const auto bounds = ParamBounds::defaults();
  CalibrationConfig cfg;
  cfg.budget = 3000;
  const std::array<double, 7> target = {0.7, -0.5, -1.0, 0.2, 0.3, 0.05, 0.01};
  auto f = [&](const std::array<double, 7>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < 7; ++i) s += (i + 1.0) * (x[i] - target[i]) * (x[i] - target[i]);
    return s;
  };
  const std::array<double, 7> x0 = {0.6, -0.3, -2.0, 0.1, 0.2, 0.02, 0.005};
  const auto r = bounded_simplex(f, x0, bounds, cfg);
  CHECK(r.improved);
  CHECK(r.value < 1e-8);
  CHECK(r.evaluations <= cfg.budget);
  for (std::size_t i = 1; i < r.trail.size(); ++i) CHECK(r.trail[i].best_objective <= r.trail[i - 1].best_objective);

  // rho pulled toward -1.5 must stop at -1.
  auto g = [&](const std::array<double, 7>& x) { return (x[1] + 1.5) * (x[1] + 1.5) + f(x) - (x[1] - target[1]) * (x[1] - target[1]); };
  const auto edge = bounded_simplex(g, x0, bounds, cfg);
  CHECK(edge.x[1] == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("bounded least squares solves a linear problem") {
  const auto bounds = ParamBounds::defaults();
  CalibrationConfig cfg;
  cfg.budget = 200;
  cfg.free = {false, true, true, true, false, false, false};
  auto residuals = [](const std::array<double, 7>& x) {
    return std::vector<double>{x[1] + 0.4, 2.0 * (x[2] - 1.0), x[3] - 0.3 + 0.1 * x[1], 0.5 * x[2] + x[3] - 0.8};
  };
  const std::array<double, 7> x0 = {0.7, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0};
  const auto r = bounded_least_squares(residuals, x0, bounds, cfg);
  CHECK(r.improved);
  CHECK(r.x[0] == 0.7);
  CHECK(r.converged);
  // Moving any free coordinate does not lower the sum of squares.
  for (std::size_t i : {1u, 2u, 3u})
    for (double h : {-1e-4, 1e-4}) {
      auto x = r.x;
      x[i] += h;
      double s = 0.0;
      for (double e : residuals(x)) s += e * e;
      CHECK(s >= r.value - 1e-12);
    }
}

TEST_CASE("calibration recovers two free parameters") {
  const auto truth = ModelParams::table1();
  const auto quotes = small_grid(truth);
  auto start = truth;
  start.rho = -0.6;
  start.c = 0.12;
  CalibrationConfig cfg;
  cfg.budget = 80;
  cfg.setup = quick_setup();
  cfg.free = {false, true, false, true, false, false, false};
  std::size_t seen = 0;
  const auto r = calibrate_run(start, ParamBounds::defaults(), quotes, cfg, [&](const AuditEntry&) { ++seen; });
  CHECK(r.improved);
  CHECK(seen == r.trail.size());
  CHECK(r.objective < 1e-8);
  CHECK(r.params.rho == doctest::Approx(truth.rho).epsilon(1e-3));
  CHECK(r.params.c == doctest::Approx(truth.c).epsilon(1e-3));
  CHECK(r.params.alpha == truth.alpha);
  CHECK(r.evaluations <= cfg.budget);
  const auto json = result_json(r, quotes);
  CHECK(json.find("\"objective\"") != std::string::npos);
  CHECK(json.find("\"trail\"") != std::string::npos);
}

TEST_CASE("simplex-only calibration is deterministic") {
  const auto truth = ModelParams::table1();
  const auto quotes = small_grid(truth);
  auto start = truth;
  start.rho = -0.6;
  CalibrationConfig cfg;
  cfg.method = CalibrationMethod::simplex;
  cfg.budget = 15;
  cfg.setup = quick_setup();
  cfg.free = {false, true, false, false, false, false, false};
  const auto a = calibrate_run(start, ParamBounds::defaults(), quotes, cfg);
  const auto b = calibrate_run(start, ParamBounds::defaults(), quotes, cfg);
  CHECK(a.params == b.params);
  CHECK(a.objective == b.objective);
  CHECK(a.objective < objective_eval(start, quotes, {}, cfg.setup).value);
}

TEST_CASE("initial point outside the bounds is rejected") {
  auto p = ModelParams::table1();
  auto bounds = ParamBounds::defaults();
  bounds.upper[1] = -0.8;
  CHECK_THROWS_AS(calibrate_run(p, bounds, small_grid(p)), ValidationError);
  CHECK_THROWS_AS(calibrate_run(p, ParamBounds::defaults(), {}), ValidationError);
}

TEST_CASE("parameter JSON") {
  auto p = ModelParams::table1();
  p.rho = -0.5;
  p.sigma0_sq = 0.0123456789;
  const auto back = params_from_json(params_json(p));
  CHECK(back == p);
  const auto partial = params_from_json(R"({"alpha": 0.8})", p);
  CHECK(partial.alpha == 0.8);
  CHECK(partial.rho == -0.5);
  CHECK_THROWS_AS(params_from_json(R"({"alpah": 0.8})"), ValidationError);
  CHECK_THROWS_AS(params_from_json("{not json"), ValidationError);
}
