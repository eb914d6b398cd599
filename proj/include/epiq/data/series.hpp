#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epiq/common/date.hpp"

namespace epiq::data {

/// Daily per-county series on a contiguous calendar: entry i is day `start + i`.
struct CountySeries {
  std::string fips;
  std::string state;
  Date start;
  std::vector<double> daily_deaths;
  std::vector<double> daily_cases;
  /// m50_index, percent of normal mobility; empty optionals are missing observations.
  std::vector<std::optional<double>> mobility;

  [[nodiscard]] std::size_t size() const { return daily_deaths.size(); }
  [[nodiscard]] Date date(std::size_t i) const { return start + static_cast<int>(i); }
  [[nodiscard]] Date last_date() const { return start + static_cast<int>(size()) - 1; }

  /// Index of `d`, or nullopt when outside the series.
  [[nodiscard]] std::optional<std::size_t> index_of(Date d) const {
    const int off = d - start;
    if (off < 0 || off >= static_cast<int>(size())) return std::nullopt;
    return static_cast<std::size_t>(off);
  }

  [[nodiscard]] double mobility_or(std::size_t i, double fallback) const {
    if (i < mobility.size() && mobility[i]) return *mobility[i];
    return fallback;
  }

  /// Copy restricted to days up to and including `cutoff`.
  [[nodiscard]] CountySeries truncated(Date cutoff) const {
    CountySeries out = *this;
    const int keep = std::max(0, std::min(static_cast<int>(size()), cutoff - start + 1));
    out.daily_deaths.resize(static_cast<std::size_t>(keep));
    out.daily_cases.resize(static_cast<std::size_t>(keep));
    if (out.mobility.size() > static_cast<std::size_t>(keep)) {
      out.mobility.resize(static_cast<std::size_t>(keep));
    }
    return out;
  }
};

/// Stationary covariates for one county, ordered by the column order of the input file.
struct StaticFeatures {
  std::string fips;
  std::vector<double> values;
};

/// Static covariates for all counties plus the shared column names.
struct StaticTable {
  std::vector<std::string> names;
  std::map<std::string, StaticFeatures> by_fips;

  /// Value of `name` for `fips`, or nullopt.
  [[nodiscard]] std::optional<double> get(const std::string& fips, const std::string& name) const {
    auto it = by_fips.find(fips);
    if (it == by_fips.end()) return std::nullopt;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return it->second.values[i];
    }
    return std::nullopt;
  }
};

/// Per-county cumulative totals.
inline std::vector<double> cumulative(const std::vector<double>& daily) {
  std::vector<double> out(daily.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < daily.size(); ++i) {
    acc += daily[i];
    out[i] = acc;
  }
  return out;
}

}  // namespace epiq::data
