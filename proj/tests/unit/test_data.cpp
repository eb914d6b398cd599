#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "epiq/data/cleaning.hpp"
#include "epiq/data/features.hpp"
#include "epiq/data/io.hpp"
#include "fixtures.hpp"

using namespace epiq;
using data::CountySeries;

TEST(Ingest, CumulativeToDaily) {
  fixture::TempDir dir("ingest");
  fixture::write_text(dir / "t.csv",
                      "date,county,state,fips,cases,deaths\n"
                      "2020-03-01,A,S,1001,1,0\n2020-03-02,A,S,1001,4,2\n2020-03-03,A,S,1001,9,5\n");
  const auto s = data::load_ground_truth(dir / "t.csv");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].fips, "01001");
  EXPECT_EQ(s[0].daily_deaths, (std::vector<double>{0, 2, 3}));
  EXPECT_EQ(s[0].daily_cases, (std::vector<double>{1, 3, 5}));
}

TEST(Ingest, EmptyFileWarns) {
  fixture::TempDir dir("ingest");
  fixture::write_text(dir / "t.csv", "");
  data::IngestReport rep;
  EXPECT_TRUE(data::load_ground_truth(dir / "t.csv", &rep).empty());
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(Ingest, InterleavedCountiesAreGroupedAndContiguous) {
  fixture::TempDir dir("ingest");
  fixture::write_text(dir / "t.csv",
                      "date,county,state,fips,cases,deaths\n"
                      "2020-03-01,A,S,01001,1,0\n2020-03-01,B,T,02002,2,1\n"
                      "2020-03-02,B,T,02002,3,1\n2020-03-02,A,S,01001,2,1\n"
                      "2020-03-03,A,S,01001,4,1\n2020-03-03,B,T,02002,7,4\n"
                      "2020-03-04,B,T,02002,7,6\n2020-03-04,A,S,01001,4,3\n"
                      "2020-03-05,A,S,01001,8,3\n2020-03-05,B,T,02002,9,6\n");
  const auto s = data::load_ground_truth(dir / "t.csv");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].fips, "01001");
  EXPECT_EQ(s[1].fips, "02002");
  EXPECT_EQ(s[1].state, "T");
  EXPECT_EQ(s[0].daily_deaths, (std::vector<double>{0, 1, 0, 2, 0}));
  EXPECT_EQ(s[1].daily_deaths, (std::vector<double>{1, 0, 3, 2, 0}));
  EXPECT_EQ(s[1].daily_cases, (std::vector<double>{2, 1, 4, 0, 2}));
  EXPECT_EQ(s[0].start, Date::from_ymd(2020, 3, 1));
}

TEST(Ingest, MalformedFipsSkippedAndNewYorkCityMapped) {
  fixture::TempDir dir("ingest");
  fixture::write_text(dir / "t.csv",
                      "date,county,state,fips,cases,deaths\n"
                      "2020-03-01,New York City,New York,,10,1\n2020-03-01,Unknown,S,,3,0\n"
                      "2020-03-01,A,S,12x45,1,0\n");
  data::IngestReport rep;
  const auto s = data::load_ground_truth(dir / "t.csv", &rep);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].fips, data::kNewYorkCityFips);
  EXPECT_EQ(rep.skipped_rows, 2u);
}

TEST(Ingest, FipsNormalization) {
  EXPECT_EQ(data::normalize_fips("1001"), "01001");
  EXPECT_EQ(data::normalize_fips("36061.0"), "36061");
  EXPECT_EQ(data::normalize_fips("123456"), "");
  EXPECT_EQ(data::normalize_fips("ab"), "");
}

TEST(Ingest, CleanedDumpRoundTrip) {
  fixture::TempDir dir("ingest");
  auto s = fixture::series("01001", {0, 1, 2}, {3, 4, 5});
  s.mobility = {100.0, std::nullopt, 87.5};
  data::write_cleaned(dir / "c.csv", {s});
  const auto back = data::load_cleaned(dir / "c.csv", {{"01001", "S"}});
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].daily_deaths, s.daily_deaths);
  EXPECT_EQ(back[0].daily_cases, s.daily_cases);
  EXPECT_EQ(back[0].mobility, s.mobility);
  EXPECT_EQ(back[0].state, "S");
}

TEST(Dumps, SingleDumpSpreadEvenly) {
  const std::vector<double> v{0, 0, 0, 12};
  const std::vector<std::size_t> dumps{3};
  EXPECT_EQ(data::redistribute_windows(v, dumps), (std::vector<double>{3, 3, 3, 3}));
}

TEST(Dumps, NoDumpsIsIdentity) {
  const std::vector<double> v{1, 2, 0, 3, 1};
  data::DumpConfig cfg;
  EXPECT_TRUE(data::detect_dumps(v, cfg).empty());
  EXPECT_EQ(data::redistribute_dumps(v, cfg), v);
}

TEST(Dumps, TwoWindowsConserveTheirSums) {
  const std::vector<double> v{1, 1, 1, 20, 1, 1, 16};
  const std::vector<std::size_t> dumps{3, 6};
  const auto out = data::redistribute_windows(v, dumps);
  EXPECT_EQ(out[0] + out[1] + out[2] + out[3], 23.0);
  EXPECT_EQ(out[4] + out[5] + out[6], 18.0);
  EXPECT_EQ(out, (std::vector<double>{5, 6, 6, 6, 6, 6, 6}));
}

TEST(Dumps, DetectionUsesTrailingMeanAndFloor) {
  data::DumpConfig cfg;
  cfg.abs_min = 10;
  cfg.ratio = 5;
  cfg.trailing_days = 7;
  const std::vector<double> v{2, 2, 2, 2, 2, 2, 2, 10, 60};
  // 10 is not above max(10, 5 * 2); 60 is above 5 * mean(2,2,2,2,2,2,10)
  EXPECT_EQ(data::detect_dumps(v, cfg), (std::vector<std::size_t>{8}));
}

TEST(Dumps, NegativeRevisionAbsorbedByEarlierWindow) {
  const std::vector<double> v{4, 4, 4, -3, 1};
  const auto out = data::redistribute_windows(v, {});
  EXPECT_EQ(std::accumulate(out.begin(), out.end(), 0.0), 10.0);
  for (double x : out) EXPECT_GE(x, 0.0);
}

TEST(Dumps, FuzzedSeriesConserveTotalsExactly) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 20 + rng() % 200;
    std::vector<double> v(n);
    double cum = 0;
    for (auto& x : v) {
      const int kind = static_cast<int>(rng() % 20);
      x = kind == 0 ? static_cast<double>(rng() % 500) : kind == 1 ? -static_cast<double>(rng() % 5) : static_cast<double>(rng() % 8);
      if (cum + x < 0) x = -cum;
      cum += x;
    }
    const auto out = data::redistribute_dumps(std::span<const double>(v), data::DumpConfig{});
    ASSERT_EQ(out.size(), v.size());
    EXPECT_EQ(std::accumulate(out.begin(), out.end(), 0.0), std::accumulate(v.begin(), v.end(), 0.0));
    for (double x : out) {
      EXPECT_GE(x, 0.0);
      EXPECT_EQ(x, std::floor(x));
    }
  }
}

TEST(Mobility, ForwardFill) {
  auto s = fixture::series("01001", {0, 0, 0, 0});
  s.mobility = {100.0, std::nullopt, std::nullopt, 60.0};
  const auto out = data::impute_mobility(s);
  EXPECT_EQ(out.mobility, (std::vector<std::optional<double>>{100.0, 100.0, 100.0, 60.0}));
}

TEST(Mobility, LeadingGapTakesFirstObservation) {
  auto s = fixture::series("01001", {0, 0, 0});
  s.mobility = {std::nullopt, std::nullopt, 80.0};
  EXPECT_EQ(data::impute_mobility(s).mobility, (std::vector<std::optional<double>>{80.0, 80.0, 80.0}));
}

TEST(Mobility, AllMissingTakesNormal) {
  auto s = fixture::series("01001", {0, 0, 0});
  EXPECT_EQ(data::impute_mobility(s).mobility, (std::vector<std::optional<double>>{100.0, 100.0, 100.0}));
}

namespace {

data::FeatureLayout layout_for(const std::vector<CountySeries>& s, std::vector<int> lags) {
  return data::make_layout(s, {}, std::move(lags), 14, 0);
}

}  // namespace

TEST(Features, RowsStartAtLargestLag) {
  std::vector<double> d(30);
  std::iota(d.begin(), d.end(), 0.0);
  const std::vector<CountySeries> s{fixture::series("01001", d)};
  const auto rows = data::build_feature_rows(s, {}, {}, layout_for(s, {15, 16, 17, 18}));
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows.front().target_date, s[0].date(18));
  EXPECT_EQ(rows.front().lagged_deaths, (std::vector<double>{3, 2, 1, 0}));
  EXPECT_EQ(rows.front().target, 18.0);
}

TEST(Features, ShortLagRejected) {
  const std::vector<CountySeries> s{fixture::series("01001", std::vector<double>(30, 0))};
  EXPECT_THROW(data::make_layout(s, {}, {5}, 14, 0), ConfigError);
  EXPECT_THROW(data::validate_lags({15, 14}, 14), ConfigError);
  EXPECT_NO_THROW(data::validate_lags({15}, 14));
}

TEST(Features, LeakageGuardProperty) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 2000; ++t) {
    const int h = 1 + static_cast<int>(rng() % 40);
    const int lag = 1 + static_cast<int>(rng() % 80);
    if (lag < h + 1) {
      EXPECT_THROW(data::validate_lags({lag, h + 5}, h), ConfigError) << lag << " " << h;
    } else {
      EXPECT_NO_THROW(data::validate_lags({lag}, h));
    }
  }
}

TEST(Features, MondayOneHot) {
  const std::vector<CountySeries> s{fixture::series("01001", std::vector<double>(40, 0))};
  const auto rows = data::build_feature_rows(s, {}, {}, layout_for(s, {21}));
  for (const auto& r : rows) {
    EXPECT_EQ(std::accumulate(r.weekday_onehot.begin(), r.weekday_onehot.end(), 0.0), 1.0);
    if (r.target_date.weekday() == 0) EXPECT_EQ(r.weekday_onehot[0], 1.0);
  }
  EXPECT_EQ(Date::from_ymd(2020, 3, 2).weekday(), 0);
}

TEST(Features, NoLagReadsInsideForecastWindow) {
  std::vector<double> d(60);
  std::iota(d.begin(), d.end(), 0.0);
  const std::vector<CountySeries> s{fixture::series("01001", d)};
  const auto layout = layout_for(s, {15, 20, 28});
  const auto fc = data::build_forecast_rows({s[0].truncated(s[0].date(40))}, {}, {}, layout);
  ASSERT_EQ(fc.size(), 14u);
  for (const auto& r : fc) {
    // deaths equal the day index, so every lagged value must predate the cutoff
    for (double v : r.lagged_deaths) EXPECT_LE(v, 40.0);
    EXPECT_FALSE(r.target.has_value());
  }
  EXPECT_EQ(fc.back().days_into_forecast, 14);
}

TEST(Features, DenseWidthMatchesNames) {
  const std::vector<CountySeries> s{fixture::series("01001", std::vector<double>(40, 1), {}, "A"),
                                    fixture::series("02002", std::vector<double>(40, 1), {}, "B")};
  data::StaticTable st;
  st.names = {"population"};
  st.by_fips["01001"] = {"01001", {10}};
  st.by_fips["02002"] = {"02002", {20}};
  const auto layout = data::make_layout(s, st, {15, 16}, 14, 6);
  const std::map<std::string, int> clusters{{"01001", 0}, {"02002", 5}};
  const auto rows = data::build_feature_rows(s, st, clusters, layout);
  EXPECT_EQ(data::dense_features(rows[0]).size(), data::feature_names(layout).size());
  EXPECT_EQ(rows.back().cluster_onehot[5], 1.0);
  EXPECT_EQ(rows.back().state_onehot, (std::vector<double>{0, 1}));
}
