#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epiq/common/error.hpp"
#include "epiq/data/series.hpp"

namespace epiq::data {

/// One model-ready example: features for `fips` on `target_date`, built only from data
/// at least forecast_len + 1 days older than the target.
struct FeatureRow {
  std::string fips;
  Date target_date;
  std::vector<double> lagged_deaths;
  std::vector<double> lagged_cases;
  std::vector<double> lagged_mobility;
  std::array<double, 7> weekday_onehot{};
  std::vector<double> state_onehot;
  std::vector<double> cluster_onehot;
  /// Set for rows past the training cutoff (1 = first forecast day).
  std::optional<int> days_into_forecast;
  std::vector<double> static_values;
  /// Observed daily deaths on target_date, when known.
  std::optional<double> target;
};

/// Column vocabulary shared by every row built for one run.
struct FeatureLayout {
  std::vector<int> lags;
  int forecast_len = 14;
  std::vector<std::string> states;
  int n_clusters = 6;
  std::vector<std::string> static_names;
};

/// Which blocks go into a dense feature vector.
struct FeatureBlocks {
  bool lags = true;
  bool weekday = true;
  bool state = true;
  bool cluster = true;
  bool statics = true;
};

/// Rejects lags that would read inside the forecast window.
inline void validate_lags(const std::vector<int>& lags, int forecast_len) {
  if (forecast_len < 1) throw ConfigError("forecast length must be >= 1");
  if (lags.empty()) throw ConfigError("lag set is empty");
  for (int lag : lags) {
    if (lag < forecast_len + 1) {
      throw ConfigError("lag " + std::to_string(lag) + " < forecast_len + 1 = " +
                        std::to_string(forecast_len + 1) + " would leak the target");
    }
  }
}

inline FeatureLayout make_layout(const std::vector<CountySeries>& series, const StaticTable& statics,
                                 std::vector<int> lags, int forecast_len, int n_clusters) {
  validate_lags(lags, forecast_len);
  FeatureLayout layout;
  std::sort(lags.begin(), lags.end());
  layout.lags = std::move(lags);
  layout.forecast_len = forecast_len;
  std::set<std::string> states;
  for (const auto& s : series) states.insert(s.state);
  layout.states.assign(states.begin(), states.end());
  layout.n_clusters = n_clusters;
  layout.static_names = statics.names;
  return layout;
}

namespace detail {

inline FeatureRow make_row(const CountySeries& s, long target_index, const FeatureLayout& layout,
                           const StaticTable& statics, const std::map<std::string, int>& clusters) {
  FeatureRow row;
  row.fips = s.fips;
  row.target_date = s.start + static_cast<int>(target_index);
  for (int lag : layout.lags) {
    const auto src = static_cast<std::size_t>(target_index - lag);
    row.lagged_deaths.push_back(s.daily_deaths[src]);
    row.lagged_cases.push_back(s.daily_cases[src]);
    row.lagged_mobility.push_back(s.mobility_or(src, 100.0));
  }
  row.weekday_onehot[static_cast<std::size_t>(row.target_date.weekday())] = 1.0;
  row.state_onehot.assign(layout.states.size(), 0.0);
  const auto st = std::lower_bound(layout.states.begin(), layout.states.end(), s.state);
  if (st == layout.states.end() || *st != s.state) {
    throw ConfigError("state '" + s.state + "' of " + s.fips + " is not in the feature layout");
  }
  row.state_onehot[static_cast<std::size_t>(st - layout.states.begin())] = 1.0;
  if (layout.n_clusters > 0) {
    auto it = clusters.find(s.fips);
    if (it == clusters.end() || it->second < 0 || it->second >= layout.n_clusters) {
      throw ConfigError("no valid cluster label for " + s.fips);
    }
    row.cluster_onehot.assign(static_cast<std::size_t>(layout.n_clusters), 0.0);
    row.cluster_onehot[static_cast<std::size_t>(it->second)] = 1.0;
  }
  if (!layout.static_names.empty()) {
    auto it = statics.by_fips.find(s.fips);
    if (it == statics.by_fips.end()) throw DataError("no static features for " + s.fips);
    row.static_values = it->second.values;
  }
  if (target_index < static_cast<long>(s.size())) {
    row.target = s.daily_deaths[static_cast<std::size_t>(target_index)];
  }
  return row;
}

}  // namespace detail

/// In-sample rows: one per (county, day) whose lagged values all exist.
inline std::vector<FeatureRow> build_feature_rows(const std::vector<CountySeries>& series,
                                                  const StaticTable& statics,
                                                  const std::map<std::string, int>& clusters,
                                                  const FeatureLayout& layout) {
  validate_lags(layout.lags, layout.forecast_len);
  const int max_lag = *std::max_element(layout.lags.begin(), layout.lags.end());
  std::vector<FeatureRow> rows;
  for (const auto& s : series) {
    for (long t = max_lag; t < static_cast<long>(s.size()); ++t) {
      rows.push_back(detail::make_row(s, t, layout, statics, clusters));
    }
  }
  return rows;
}

/// Convenience overload that derives the layout from the inputs.
inline std::vector<FeatureRow> build_feature_rows(const std::vector<CountySeries>& series,
                                                  const StaticTable& statics,
                                                  const std::map<std::string, int>& clusters,
                                                  const std::vector<int>& lags, int forecast_len) {
  const int n_clusters = clusters.empty() ? 0 : 6;
  return build_feature_rows(series, statics, clusters,
                            make_layout(series, statics, lags, forecast_len, n_clusters));
}

/// Rows for the forecast_len days after each county's last observed day.
inline std::vector<FeatureRow> build_forecast_rows(const std::vector<CountySeries>& series,
                                                   const StaticTable& statics,
                                                   const std::map<std::string, int>& clusters,
                                                   const FeatureLayout& layout) {
  validate_lags(layout.lags, layout.forecast_len);
  const int max_lag = *std::max_element(layout.lags.begin(), layout.lags.end());
  std::vector<FeatureRow> rows;
  for (const auto& s : series) {
    const auto n = static_cast<long>(s.size());
    for (int h = 1; h <= layout.forecast_len; ++h) {
      const long t = n - 1 + h;
      if (t < max_lag) continue;
      auto row = detail::make_row(s, t, layout, statics, clusters);
      row.days_into_forecast = h;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Flattens the selected blocks in a fixed order: lags (deaths, cases, mobility),
/// weekday, state, cluster, statics.
inline std::vector<double> dense_features(const FeatureRow& row, const FeatureBlocks& blocks = {}) {
  std::vector<double> x;
  if (blocks.lags) {
    x.insert(x.end(), row.lagged_deaths.begin(), row.lagged_deaths.end());
    x.insert(x.end(), row.lagged_cases.begin(), row.lagged_cases.end());
    x.insert(x.end(), row.lagged_mobility.begin(), row.lagged_mobility.end());
  }
  if (blocks.weekday) x.insert(x.end(), row.weekday_onehot.begin(), row.weekday_onehot.end());
  if (blocks.state) x.insert(x.end(), row.state_onehot.begin(), row.state_onehot.end());
  if (blocks.cluster) x.insert(x.end(), row.cluster_onehot.begin(), row.cluster_onehot.end());
  if (blocks.statics) x.insert(x.end(), row.static_values.begin(), row.static_values.end());
  return x;
}

inline std::vector<std::string> feature_names(const FeatureLayout& layout, const FeatureBlocks& blocks = {}) {
  std::vector<std::string> names;
  if (blocks.lags) {
    for (const char* ch : {"deaths", "cases", "m50"}) {
      for (int lag : layout.lags) names.push_back(std::string(ch) + "_lag" + std::to_string(lag));
    }
  }
  if (blocks.weekday) {
    for (const char* d : {"mon", "tue", "wed", "thu", "fri", "sat", "sun"}) {
      names.push_back(std::string("weekday_") + d);
    }
  }
  if (blocks.state) {
    for (const auto& s : layout.states) names.push_back("state_" + s);
  }
  if (blocks.cluster) {
    for (int c = 0; c < layout.n_clusters; ++c) names.push_back("cluster_" + std::to_string(c));
  }
  if (blocks.statics) names.insert(names.end(), layout.static_names.begin(), layout.static_names.end());
  return names;
}

}  // namespace epiq::data
