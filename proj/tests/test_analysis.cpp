#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rhh/analysis.hpp"
#include "rhh/errors.hpp"

using namespace rhh;

TEST_CASE("skew power fit recovers an exact power law") {
  std::vector<SkewRow> rows;
  for (double x : {-5.5, -5.0, -4.5, -4.0, -3.5}) {
    const double T = std::exp(x);
    rows.push_back({T, 0.2, -0.3 * std::pow(T, -0.4)});
  }
  const auto fit = fit_skew_power(rows);
  CHECK(fit.power == doctest::Approx(-0.4));
  CHECK(fit.intercept == doctest::Approx(std::log(0.3)));
  CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("skew fit rejects degenerate inputs") {
  std::vector<SkewRow> rows = {{0.01, 0.2, -1.0}, {0.02, 0.2, -0.8}, {0.03, 0.2, 0.0}, {0.04, 0.2, -0.6}};
  CHECK_THROWS_WITH_AS(fit_skew_power(rows), doctest::Contains("zero ATM skew"), ValidationError);
  rows[2].skew = 0.7;
  CHECK_THROWS_AS(fit_skew_power(rows), ValidationError);
  rows.pop_back();
  CHECK_THROWS_AS(fit_skew_power(rows), ValidationError);
}

TEST_CASE("surface reports values and gaps") {
  SurfaceGrid grid;
  grid.spx_maturities = {0.1};
  grid.spx_log_moneyness = {-0.1, 0.0};
  grid.vix_maturities = {0.1};
  grid.vix_log_moneyness = {0.0, 0.2};
  PricingSetup setup;
  setup.factors = 8;
  setup.transform = TransformOptions{150, 150};
  const auto rows = surface(ModelParams::table1(), grid, setup);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.implied_vol > 0.0);
  }
  CHECK(rows[2].market == Market::vix);
  CHECK(rows[2].forward > 10.0);
  // The model smile has a negative SPX skew and a positive VIX skew.
  CHECK(rows[0].implied_vol > rows[1].implied_vol);
  CHECK(rows[3].implied_vol > rows[2].implied_vol);

  auto bad = ModelParams::table1();
  bad.alpha = 0.4;
  const auto gaps = surface(bad, grid, setup);
  for (const auto& r : gaps) {
    CHECK(std::isnan(r.implied_vol));
    CHECK(r.status != "ok");
  }
  std::ostringstream os;
  write_surface_csv(os, gaps);
  CHECK(os.str().rfind("market,maturity,log_moneyness,forward,implied_vol,status\n", 0) == 0);
}

TEST_CASE("sensitivity sweep") {
  SurfaceGrid grid;
  grid.spx_maturities = {0.1};
  grid.spx_log_moneyness = {0.0};
  grid.vix_maturities = {};
  PricingSetup setup;
  setup.factors = 8;
  setup.transform = TransformOptions{150, 150};
  const auto rows = sensitivity_sweep(ModelParams::table1(), "sigma0_sq", {0.005, 0.01}, grid, setup);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].point.implied_vol > rows[0].point.implied_vol);
  CHECK_THROWS_AS(sensitivity_sweep(ModelParams::table1(), "gamma", {1.0}, grid, setup), ValidationError);
  std::ostringstream os;
  write_sweep_csv(os, rows);
  CHECK(os.str().rfind("parameter,value,market,", 0) == 0);
}
