#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "epiq/common/csv.hpp"
#include "epiq/common/date.hpp"
#include "epiq/common/quantile.hpp"

namespace epiq::metrics {

/// Nine quantile estimates of daily deaths for one county on one day.
struct QuantileForecast {
  std::string fips;
  Date date;
  QuantileVector q{};
};

/// Sorts the quantiles and clamps them at zero.
inline void sanitize(QuantileForecast& f) {
  for (auto& v : f.q) v = std::max(0.0, v);
  monotonize(f.q);
}

inline const std::vector<std::string>& forecast_header() {
  static const std::vector<std::string> h{"fips", "date", "q10", "q20", "q30", "q40",
                                          "q50",  "q60",  "q70", "q80", "q90"};
  return h;
}

inline void write_forecasts(const std::filesystem::path& path,
                            const std::vector<QuantileForecast>& forecasts) {
  csv::Writer w(path);
  w.row(forecast_header());
  for (const auto& f : forecasts) {
    std::vector<std::string> row{f.fips, f.date.str()};
    for (double v : f.q) row.push_back(csv::fmt(v));
    w.row(row);
  }
}

inline std::vector<QuantileForecast> read_forecasts(const std::filesystem::path& path) {
  const auto table = csv::Table::read(path);
  std::vector<QuantileForecast> out;
  if (table.header().empty()) return out;
  const auto& h = forecast_header();
  std::vector<std::size_t> cols;
  for (const auto& name : h) cols.push_back(table.column(name));
  for (const auto& row : table.rows()) {
    QuantileForecast f;
    f.fips = row[cols[0]];
    f.date = Date::parse(row[cols[1]]);
    for (std::size_t j = 0; j < kNumQuantiles; ++j) {
      const auto v = csv::parse_double(row[cols[j + 2]]);
      if (!v) throw DataError("forecast file: non-numeric quantile for " + f.fips + " " + row[cols[1]]);
      f.q[j] = *v;
    }
    out.push_back(f);
  }
  return out;
}

}  // namespace epiq::metrics
