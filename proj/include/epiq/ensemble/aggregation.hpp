#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "epiq/common/csv.hpp"
#include "epiq/common/date.hpp"
#include "epiq/common/error.hpp"
#include "epiq/common/quantile.hpp"
#include "epiq/data/series.hpp"
#include "epiq/metrics/forecast.hpp"

namespace epiq::ensemble {

inline constexpr int kAggregationLayoutVersion = 1;

/// Column layout of ensemble inputs. Models, states and cluster count fix the one-hot
/// widths, so a layout must match exactly between training and prediction.
struct AggregationLayout {
  int version = kAggregationLayoutVersion;
  std::vector<std::string> models;
  std::vector<std::string> states;  // sorted
  int n_clusters = 6;
  int forecast_len = 14;

  [[nodiscard]] std::size_t width() const {
    return kNumQuantiles * models.size() + states.size() + static_cast<std::size_t>(n_clusters) +
           static_cast<std::size_t>(forecast_len) + 7;
  }

  [[nodiscard]] std::vector<std::string> column_names() const {
    std::vector<std::string> c;
    for (const auto& m : models) {
      for (double q : kQuantileLevels) c.push_back(m + "_q" + std::to_string(static_cast<int>(q * 100 + 0.5)));
    }
    for (const auto& s : states) c.push_back("state_" + s);
    for (int k = 0; k < n_clusters; ++k) c.push_back("cluster_" + std::to_string(k));
    for (int h = 1; h <= forecast_len; ++h) c.push_back("day_" + std::to_string(h));
    for (const char* d : {"mon", "tue", "wed", "thu", "fri", "sat", "sun"}) c.push_back(std::string("weekday_") + d);
    return c;
  }

  bool operator==(const AggregationLayout&) const = default;

  void require_same(const AggregationLayout& other) const {
    if (version != other.version) {
      throw ConfigError("feature layout version " + std::to_string(other.version) + " does not match " +
                        std::to_string(version));
    }
    if (!(*this == other)) throw ConfigError("feature layout (models, states, clusters or horizon) does not match");
  }
};

/// One ensemble example: every model's quantiles for (fips, target_date) from one cutoff.
struct AggregationRow {
  std::string fips;
  Date cutoff;
  Date target_date;
  int days_into_forecast = 1;
  std::string state;
  int cluster = 0;
  std::vector<QuantileVector> model_q;  // parallel to layout.models
  double truth = 0.0;
};

inline std::vector<double> row_features(const AggregationRow& r, const AggregationLayout& layout) {
  if (r.model_q.size() != layout.models.size()) throw std::invalid_argument("row has the wrong number of models");
  std::vector<double> x;
  x.reserve(layout.width());
  for (const auto& q : r.model_q) x.insert(x.end(), q.begin(), q.end());
  const auto st = std::lower_bound(layout.states.begin(), layout.states.end(), r.state);
  if (st == layout.states.end() || *st != r.state) throw ConfigError("state '" + r.state + "' is not in the layout");
  for (std::size_t i = 0; i < layout.states.size(); ++i) x.push_back(layout.states.begin() + static_cast<std::ptrdiff_t>(i) == st ? 1.0 : 0.0);
  if (r.cluster < 0 || r.cluster >= layout.n_clusters) throw ConfigError("cluster label out of range for " + r.fips);
  for (int k = 0; k < layout.n_clusters; ++k) x.push_back(k == r.cluster ? 1.0 : 0.0);
  if (r.days_into_forecast < 1 || r.days_into_forecast > layout.forecast_len) {
    throw ConfigError("days_into_forecast out of range for " + r.fips);
  }
  for (int h = 1; h <= layout.forecast_len; ++h) x.push_back(h == r.days_into_forecast ? 1.0 : 0.0);
  const int wd = r.target_date.weekday();
  for (int d = 0; d < 7; ++d) x.push_back(d == wd ? 1.0 : 0.0);
  return x;
}

struct CoverageReport {
  std::size_t expected_rows = 0;
  std::size_t kept_rows = 0;
  std::size_t dropped_rows = 0;
  /// (model, cutoff, reason) for every model run that failed outright.
  std::vector<std::tuple<std::string, Date, std::string>> failures;

  [[nodiscard]] double coverage() const {
    return expected_rows == 0 ? 0.0 : static_cast<double>(kept_rows) / static_cast<double>(expected_rows);
  }
};

struct AggregationSet {
  AggregationLayout layout;
  std::vector<AggregationRow> rows;
  CoverageReport coverage;
};

/// A model as seen by the ensemble: forecasts for the forecast_len days after `cutoff`,
/// trained only on data up to and including the cutoff.
struct RegisteredModel {
  std::string name;
  std::function<std::vector<metrics::QuantileForecast>(Date cutoff)> fit;
};

struct CountyInfo {
  std::string state;
  int cluster = 0;
};

/// `cutoffs` must be consecutive days. Rows are kept only when every model produced
/// the cell; a model that throws loses all its rows for that cutoff. Coverage below
/// `min_coverage` is an error.
inline AggregationSet build_aggregation_set(const std::vector<RegisteredModel>& models,
                                            const std::vector<data::CountySeries>& truth,
                                            const std::map<std::string, CountyInfo>& counties,
                                            const std::vector<Date>& cutoffs, int forecast_len,
                                            int n_clusters = 6, double min_coverage = 0.8) {
  if (models.empty()) throw ConfigError("aggregation needs at least one model");
  if (cutoffs.empty()) throw ConfigError("aggregation needs at least one cutoff");
  for (std::size_t i = 1; i < cutoffs.size(); ++i) {
    if (cutoffs[i] != cutoffs[i - 1] + 1) throw ConfigError("aggregation cutoffs must be consecutive days");
  }
  AggregationSet set;
  set.layout.forecast_len = forecast_len;
  set.layout.n_clusters = n_clusters;
  std::set<std::string> states;
  for (const auto& m : models) set.layout.models.push_back(m.name);
  for (const auto& s : truth) {
    auto it = counties.find(s.fips);
    if (it == counties.end()) throw DataError("no state/cluster information for " + s.fips);
    states.insert(it->second.state);
  }
  set.layout.states.assign(states.begin(), states.end());

  std::map<std::string, const data::CountySeries*> by_fips;
  for (const auto& s : truth) by_fips[s.fips] = &s;

  for (const Date c : cutoffs) {
    using Key = std::pair<std::string, int>;
    std::map<Key, std::vector<std::optional<QuantileVector>>> cells;
    for (const auto& s : truth) {
      for (int h = 1; h <= forecast_len; ++h) {
        if (s.index_of(c + h).has_value()) cells[{s.fips, h}].assign(models.size(), std::nullopt);
      }
    }
    set.coverage.expected_rows += cells.size();
    for (std::size_t m = 0; m < models.size(); ++m) {
      std::vector<metrics::QuantileForecast> fc;
      try {
        fc = models[m].fit(c);
      } catch (const std::exception& e) {
        set.coverage.failures.emplace_back(models[m].name, c, e.what());
        continue;
      }
      for (const auto& f : fc) {
        const int h = f.date - c;
        auto it = cells.find({f.fips, h});
        if (it != cells.end()) it->second[m] = f.q;
      }
    }
    for (const auto& [key, qs] : cells) {
      if (std::any_of(qs.begin(), qs.end(), [](const auto& q) { return !q.has_value(); })) {
        ++set.coverage.dropped_rows;
        continue;
      }
      const auto& s = *by_fips.at(key.first);
      AggregationRow r;
      r.fips = key.first;
      r.cutoff = c;
      r.days_into_forecast = key.second;
      r.target_date = c + key.second;
      r.state = counties.at(r.fips).state;
      r.cluster = counties.at(r.fips).cluster;
      for (const auto& q : qs) r.model_q.push_back(*q);
      r.truth = s.daily_deaths[*s.index_of(r.target_date)];
      set.rows.push_back(std::move(r));
      ++set.coverage.kept_rows;
    }
  }
  if (set.coverage.coverage() < min_coverage) {
    std::ostringstream os;
    os << "aggregation coverage " << set.coverage.coverage() << " is below " << min_coverage << " ("
       << set.coverage.failures.size() << " failed model runs)";
    throw DataError(os.str());
  }
  return set;
}

/// First line: versioned layout descriptor; second: column header; then one row per example.
inline void write_aggregation_set(const std::filesystem::path& path, const AggregationSet& set) {
  csv::Writer w(path);
  const auto& L = set.layout;
  std::string models, states;
  for (const auto& m : L.models) models += (models.empty() ? "" : ";") + m;
  for (const auto& s : L.states) states += (states.empty() ? "" : ";") + s;
  w.row({"#epiq-aggregation", "version=" + std::to_string(L.version), "models=" + models, "states=" + states,
         "n_clusters=" + std::to_string(L.n_clusters), "forecast_len=" + std::to_string(L.forecast_len)});
  std::vector<std::string> header{"fips", "cutoff", "target_date", "days_into_forecast", "state", "cluster", "truth"};
  for (const auto& m : L.models) {
    for (double q : kQuantileLevels) header.push_back(m + "_q" + std::to_string(static_cast<int>(q * 100 + 0.5)));
  }
  w.row(header);
  for (const auto& r : set.rows) {
    std::vector<std::string> f{r.fips, r.cutoff.str(), r.target_date.str(), std::to_string(r.days_into_forecast),
                               r.state, std::to_string(r.cluster), csv::fmt(r.truth)};
    for (const auto& q : r.model_q) {
      for (double v : q) f.push_back(csv::fmt(v));
    }
    w.row(f);
  }
}

inline AggregationSet read_aggregation_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty aggregation file '" + path.string() + "'");
  const auto desc = csv::split_line(line);
  if (desc.empty() || desc[0] != "#epiq-aggregation") throw DataError("missing aggregation layout descriptor");
  AggregationSet set;
  auto& L = set.layout;
  auto split_list = [](const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ';')) out.push_back(item);
    return out;
  };
  for (std::size_t i = 1; i < desc.size(); ++i) {
    const auto eq = desc[i].find('=');
    if (eq == std::string::npos) continue;
    const std::string k = desc[i].substr(0, eq), v = desc[i].substr(eq + 1);
    if (k == "version") L.version = static_cast<int>(csv::require_double(v, "layout version"));
    else if (k == "models") L.models = split_list(v);
    else if (k == "states") L.states = split_list(v);
    else if (k == "n_clusters") L.n_clusters = static_cast<int>(csv::require_double(v, "n_clusters"));
    else if (k == "forecast_len") L.forecast_len = static_cast<int>(csv::require_double(v, "forecast_len"));
  }
  if (L.version != kAggregationLayoutVersion) {
    throw ConfigError("aggregation layout version " + std::to_string(L.version) + " is unsupported");
  }
  if (!std::getline(in, line)) throw DataError("aggregation file has no column header");
  const std::size_t n_cols = 7 + kNumQuantiles * L.models.size();
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != n_cols) throw DataError("aggregation row has " + std::to_string(f.size()) + " fields");
    AggregationRow r;
    r.fips = f[0];
    r.cutoff = Date::parse(f[1]);
    r.target_date = Date::parse(f[2]);
    r.days_into_forecast = static_cast<int>(csv::require_double(f[3], "days_into_forecast"));
    r.state = f[4];
    r.cluster = static_cast<int>(csv::require_double(f[5], "cluster"));
    r.truth = csv::require_double(f[6], "truth");
    for (std::size_t m = 0; m < L.models.size(); ++m) {
      QuantileVector q{};
      for (std::size_t j = 0; j < kNumQuantiles; ++j) q[j] = csv::require_double(f[7 + m * kNumQuantiles + j], "quantile");
      r.model_q.push_back(q);
    }
    set.rows.push_back(std::move(r));
  }
  set.coverage.expected_rows = set.coverage.kept_rows = set.rows.size();
  return set;
}

}  // namespace epiq::ensemble
