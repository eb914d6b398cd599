#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "epiq/common/csv.hpp"
#include "epiq/common/error.hpp"
#include "epiq/data/series.hpp"
#include "epiq/metrics/forecast.hpp"
#include "epiq/metrics/pinball.hpp"

namespace epiq::metrics {

struct EvaluationReport {
  double pinball = 0.0;
  double rmse = 0.0;
  std::map<std::string, double> per_county_pinball;
  DateRange period;
  std::size_t cells = 0;
  /// Evaluated counties / counties present in the truth.
  double coverage = 0.0;
};

/// Raised when an evaluated county lacks a forecast for a day of the period.
class MissingForecastError : public DataError {
 public:
  MissingForecastError(std::vector<std::pair<std::string, Date>> missing)
      : DataError(describe(missing)), missing_(std::move(missing)) {}

  [[nodiscard]] const std::vector<std::pair<std::string, Date>>& missing() const { return missing_; }

 private:
  static std::string describe(const std::vector<std::pair<std::string, Date>>& missing) {
    std::string msg = "missing forecast cells:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
      msg += " (" + missing[i].first + "," + missing[i].second.str() + ")";
    }
    if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
    return msg;
  }
  std::vector<std::pair<std::string, Date>> missing_;
};

/// Scores forecasts against truth over `period`. Counties present in both inputs are
/// evaluated; each must have a forecast for every day. Days absent from a county's
/// truth count as zero deaths.
inline EvaluationReport evaluate(const std::vector<QuantileForecast>& forecasts,
                                 const std::vector<data::CountySeries>& truth, DateRange period) {
  std::map<std::pair<std::string, Date>, const QuantileForecast*> cell;
  std::map<std::string, bool> forecast_fips;
  for (const auto& f : forecasts) {
    if (period.contains(f.date)) cell[{f.fips, f.date}] = &f;
    forecast_fips[f.fips] = true;
  }
  EvaluationReport rep;
  rep.period = period;
  std::vector<std::pair<std::string, Date>> missing;
  double pin_total = 0.0, sq_total = 0.0;
  std::size_t evaluated = 0;
  for (const auto& s : truth) {
    if (!forecast_fips.contains(s.fips)) continue;
    ++evaluated;
    double county_total = 0.0;
    for (Date d = period.first; d <= period.last; d += 1) {
      auto it = cell.find({s.fips, d});
      if (it == cell.end()) {
        missing.emplace_back(s.fips, d);
        continue;
      }
      const auto idx = s.index_of(d);
      const double y = idx ? s.daily_deaths[*idx] : 0.0;
      const double l = pinball_county(y, it->second->q);
      county_total += l;
      pin_total += l;
      const double e = y - it->second->q[4];
      sq_total += e * e;
      ++rep.cells;
    }
    rep.per_county_pinball[s.fips] = county_total / static_cast<double>(period.length());
  }
  if (!missing.empty()) throw MissingForecastError(std::move(missing));
  if (rep.cells > 0) {
    rep.pinball = pin_total / static_cast<double>(rep.cells);
    rep.rmse = std::sqrt(sq_total / static_cast<double>(rep.cells));
  }
  rep.coverage = truth.empty() ? 0.0 : static_cast<double>(evaluated) / static_cast<double>(truth.size());
  return rep;
}

/// One model row of the comparison table: a report per period.
struct ModelScores {
  std::string model;
  std::vector<EvaluationReport> periods;
};

/// Comparison table: `model,period1_pinball,period1_rmse,period2_pinball,...`.
inline void write_table_report(const std::filesystem::path& path, const std::vector<ModelScores>& rows) {
  csv::Writer w(path);
  std::vector<std::string> header{"model"};
  const std::size_t n_periods = rows.empty() ? 0 : rows.front().periods.size();
  for (std::size_t p = 1; p <= n_periods; ++p) {
    header.push_back("period" + std::to_string(p) + "_pinball");
    header.push_back("period" + std::to_string(p) + "_rmse");
  }
  w.row(header);
  for (const auto& r : rows) {
    std::vector<std::string> line{r.model};
    for (const auto& rep : r.periods) {
      line.push_back(csv::fmt(rep.pinball));
      line.push_back(csv::fmt(rep.rmse));
    }
    w.row(line);
  }
}

/// Per-county breakdown: `model,period_start,period_end,fips,pinball`.
inline void write_county_report(const std::filesystem::path& path, const std::vector<ModelScores>& rows) {
  csv::Writer w(path);
  w.row({"model", "period_start", "period_end", "fips", "pinball"});
  for (const auto& r : rows) {
    for (const auto& rep : r.periods) {
      for (const auto& [fips, l] : rep.per_county_pinball) {
        w.row({r.model, rep.period.first.str(), rep.period.last.str(), fips, csv::fmt(l)});
      }
    }
  }
}

}  // namespace epiq::metrics
