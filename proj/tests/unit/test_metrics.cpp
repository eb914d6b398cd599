#include <gtest/gtest.h>

#include <random>

#include "epiq/metrics/evaluate.hpp"
#include "epiq/metrics/pinball.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace epiq;

TEST(Pinball, WorkedValues) {
  EXPECT_DOUBLE_EQ(metrics::pinball_q(5, 5, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(metrics::pinball_q(1, 0, 0.2), 0.2);
  EXPECT_DOUBLE_EQ(metrics::pinball_q(0, 1, 0.2), 0.8);
}

TEST(Pinball, RejectsLevelsOutsideUnitInterval) {
  EXPECT_THROW(metrics::pinball_q(1, 0, 0.0), std::invalid_argument);
  EXPECT_THROW(metrics::pinball_q(1, 0, 1.0), std::invalid_argument);
}

TEST(Pinball, CountyAverages) {
  QuantileVector q{};
  q.fill(2.0);
  EXPECT_DOUBLE_EQ(metrics::pinball_county(2.0, q), 0.0);
  EXPECT_NEAR(metrics::pinball_county(0.0, q), 1.0, 1e-15);
  q.fill(0.0);
  EXPECT_NEAR(metrics::pinball_county(2.0, q), 1.0, 1e-15);
  EXPECT_THROW(metrics::pinball_county(1.0, std::vector<double>(8, 0.0)), std::invalid_argument);
}

TEST(Pinball, MatchesOracleOnRandomCells) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50, 200);
  for (int i = 0; i < 1000; ++i) {
    const double y = std::floor(std::abs(u(rng)));
    std::array<double, 9> q{};
    for (auto& v : q) v = u(rng);
    EXPECT_NEAR(metrics::pinball_county(y, q), oracle::pinball9(y, q), 1e-12);
  }
}

TEST(Pinball, NonNegativeAndZeroOnlyAtTruth) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 500; ++i) {
    const double y = u(rng), yhat = u(rng);
    for (double q : kQuantileLevels) {
      const double l = metrics::pinball_q(y, yhat, q);
      EXPECT_GE(l, 0.0);
      if (y != yhat) EXPECT_GT(l, 0.0);
    }
  }
}

TEST(Pinball, GradientSidesOfKink) {
  EXPECT_DOUBLE_EQ(metrics::pinball_grad(2, 1, 0.3), -0.3);
  EXPECT_DOUBLE_EQ(metrics::pinball_grad(1, 2, 0.3), 0.7);
  EXPECT_DOUBLE_EQ(metrics::pinball_grad(1, 1, 0.3), 0.7);
}

namespace {

metrics::QuantileForecast cell(const std::string& fips, Date d, double v) {
  metrics::QuantileForecast f{fips, d, {}};
  f.q.fill(v);
  return f;
}

}  // namespace

TEST(Evaluate, PerfectForecastScoresZero) {
  auto s = fixture::series("01001", {1, 2, 3, 4});
  std::vector<metrics::QuantileForecast> fc;
  for (std::size_t i = 0; i < 4; ++i) fc.push_back(cell("01001", s.date(i), s.daily_deaths[i]));
  const auto rep = metrics::evaluate(fc, {s}, {s.date(0), s.date(3)});
  EXPECT_EQ(rep.pinball, 0.0);
  EXPECT_EQ(rep.rmse, 0.0);
  EXPECT_EQ(rep.cells, 4u);
}

TEST(Evaluate, SingleCell) {
  auto s = fixture::series("01001", {2});
  const auto rep = metrics::evaluate({cell("01001", s.start, 0.0)}, {s}, {s.start, s.start});
  EXPECT_NEAR(rep.pinball, 1.0, 1e-15);
  EXPECT_NEAR(rep.rmse, 2.0, 1e-15);
}

TEST(Evaluate, MissingCellIsAnError) {
  auto s = fixture::series("01001", {2, 3});
  EXPECT_THROW(metrics::evaluate({cell("01001", s.start, 0.0)}, {s}, {s.start, s.start + 1}),
               metrics::MissingForecastError);
}

TEST(Evaluate, TableLayoutHasOneRowPerModelAndTwoColumnsPerPeriod) {
  fixture::TempDir dir("metrics");
  metrics::EvaluationReport a, b;
  a.pinball = 0.5;
  b.pinball = 0.25;
  metrics::write_table_report(dir / "t.csv", {{"m1", {a, b}}, {"m2", {b, a}}});
  const auto t = csv::Table::read(dir / "t.csv");
  EXPECT_EQ(t.header(), (std::vector<std::string>{"model", "period1_pinball", "period1_rmse", "period2_pinball",
                                                   "period2_rmse"}));
  ASSERT_EQ(t.rows().size(), 2u);
  EXPECT_EQ(t.rows()[1][0], "m2");
  EXPECT_EQ(csv::parse_double(t.rows()[1][1]).value(), 0.25);
}

TEST(Forecast, FileRoundTrip) {
  fixture::TempDir dir("forecast");
  metrics::QuantileForecast f{"36061", Date::from_ymd(2020, 5, 1), {0, 0.5, 1, 1.25, 2, 3, 5, 8, 13.0625}};
  metrics::write_forecasts(dir / "f.csv", {f});
  const auto back = metrics::read_forecasts(dir / "f.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].fips, f.fips);
  EXPECT_EQ(back[0].date, f.date);
  EXPECT_EQ(back[0].q, f.q);
}
