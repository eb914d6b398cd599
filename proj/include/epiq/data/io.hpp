#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "epiq/common/csv.hpp"
#include "epiq/common/date.hpp"
#include "epiq/data/series.hpp"

namespace epiq::data {

/// Diagnostics collected while ingesting ground truth.
struct IngestReport {
  std::vector<std::string> warnings;
  std::size_t skipped_rows = 0;
  std::set<std::string> skipped_counties;
};

/// FIPS used for New York City, which the source reports as one unit without a code.
inline constexpr const char* kNewYorkCityFips = "36061";

/// Normalizes a FIPS code to 5 digits; empty string when malformed.
inline std::string normalize_fips(std::string raw) {
  raw.erase(std::remove_if(raw.begin(), raw.end(), [](unsigned char c) { return std::isspace(c); }),
            raw.end());
  if (raw.size() > 2 && raw.ends_with(".0")) raw.resize(raw.size() - 2);
  if (raw.empty() || raw.size() > 5) return {};
  if (!std::all_of(raw.begin(), raw.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return {};
  }
  return std::string(5 - raw.size(), '0') + raw;
}

/// Reads a `date,county,state,fips,cases,deaths` file of cumulative counts and
/// returns daily series, one per county, sorted by FIPS. Interior calendar gaps carry
/// the cumulative value forward, so the missing days get zero daily counts.
inline std::vector<CountySeries> load_ground_truth(const std::filesystem::path& path,
                                                   IngestReport* report = nullptr) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  const auto table = csv::Table::read(path);
  if (table.header().empty() || table.empty()) {
    rep.warnings.push_back("ground truth file '" + path.string() + "' has no data rows");
    return {};
  }
  const auto c_date = table.column("date");
  const auto c_county = table.column("county");
  const auto c_state = table.column("state");
  const auto c_fips = table.column("fips");
  const auto c_cases = table.column("cases");
  const auto c_deaths = table.column("deaths");

  struct Cum {
    double cases;
    double deaths;
  };
  std::map<std::string, std::map<Date, Cum>> grouped;
  std::map<std::string, std::string> states;
  for (const auto& row : table.rows()) {
    std::string fips = normalize_fips(row[c_fips]);
    if (fips.empty() && row[c_county] == "New York City") fips = kNewYorkCityFips;
    if (fips.empty()) {
      ++rep.skipped_rows;
      rep.skipped_counties.insert(row[c_state] + "/" + row[c_county]);
      continue;
    }
    const auto cases = csv::parse_double(row[c_cases]);
    const auto deaths = csv::parse_double(row[c_deaths]);
    if (!cases || !deaths) {
      ++rep.skipped_rows;
      rep.warnings.push_back("row for " + fips + " on " + row[c_date] + " has non-numeric counts");
      continue;
    }
    grouped[fips][Date::parse(row[c_date])] = Cum{*cases, *deaths};
    states.emplace(fips, row[c_state]);
  }
  if (rep.skipped_rows > 0) {
    rep.warnings.push_back("skipped " + std::to_string(rep.skipped_rows) +
                           " rows with malformed or absent FIPS/counts");
  }

  std::vector<CountySeries> out;
  out.reserve(grouped.size());
  for (const auto& [fips, by_date] : grouped) {
    CountySeries s;
    s.fips = fips;
    s.state = states[fips];
    s.start = by_date.begin()->first;
    const int n = by_date.rbegin()->first - s.start + 1;
    s.daily_deaths.assign(static_cast<std::size_t>(n), 0.0);
    s.daily_cases.assign(static_cast<std::size_t>(n), 0.0);
    s.mobility.assign(static_cast<std::size_t>(n), std::nullopt);
    Cum prev{0.0, 0.0};
    auto it = by_date.begin();
    for (int i = 0; i < n; ++i) {
      const Date d = s.start + i;
      Cum cur = prev;
      if (it != by_date.end() && it->first == d) {
        cur = it->second;
        ++it;
      }
      s.daily_cases[static_cast<std::size_t>(i)] = cur.cases - prev.cases;
      s.daily_deaths[static_cast<std::size_t>(i)] = cur.deaths - prev.deaths;
      prev = cur;
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Reads `fips,<name>...` static covariates.
inline StaticTable load_static_features(const std::filesystem::path& path) {
  const auto table = csv::Table::read(path);
  StaticTable out;
  if (table.header().empty()) return out;
  const auto c_fips = table.column("fips");
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < table.header().size(); ++i) {
    if (i == c_fips) continue;
    cols.push_back(i);
    out.names.push_back(table.header()[i]);
  }
  for (const auto& row : table.rows()) {
    StaticFeatures sf;
    sf.fips = normalize_fips(row[c_fips]);
    if (sf.fips.empty()) throw DataError("static features: malformed FIPS '" + row[c_fips] + "'");
    for (auto c : cols) {
      const auto v = csv::parse_double(row[c]);
      if (!v || !std::isfinite(*v)) {
        throw DataError("static features: non-numeric value for " + sf.fips + " column " +
                        table.header()[c]);
      }
      sf.values.push_back(*v);
    }
    if (!out.by_fips.emplace(sf.fips, sf).second) {
      throw DataError("static features: duplicate record for " + sf.fips);
    }
  }
  return out;
}

/// Reads a `date,fips,m50_index` file into the mobility channel of matching series.
/// Days without a record stay missing.
inline void attach_mobility(std::vector<CountySeries>& series, const std::filesystem::path& path) {
  const auto table = csv::Table::read(path);
  if (table.header().empty()) return;
  const auto c_date = table.column("date");
  const auto c_fips = table.column("fips");
  const auto c_m50 = table.column("m50_index");
  std::map<std::string, CountySeries*> index;
  for (auto& s : series) {
    s.mobility.resize(s.size());
    index[s.fips] = &s;
  }
  for (const auto& row : table.rows()) {
    auto it = index.find(normalize_fips(row[c_fips]));
    if (it == index.end()) continue;
    const auto v = csv::parse_double(row[c_m50]);
    if (!v) continue;
    if (auto i = it->second->index_of(Date::parse(row[c_date]))) it->second->mobility[*i] = *v;
  }
}

/// Audit dump `fips,date,daily_deaths,daily_cases,m50_index`.
inline void write_cleaned(const std::filesystem::path& path, const std::vector<CountySeries>& series) {
  csv::Writer w(path);
  w.row({"fips", "date", "daily_deaths", "daily_cases", "m50_index"});
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool has_m = i < s.mobility.size() && s.mobility[i].has_value();
      w.row({s.fips, s.date(i).str(), csv::fmt(s.daily_deaths[i]), csv::fmt(s.daily_cases[i]),
             has_m ? csv::fmt(*s.mobility[i]) : std::string{}});
    }
  }
}

/// Reads back a cleaned dump written by write_cleaned.
inline std::vector<CountySeries> load_cleaned(const std::filesystem::path& path,
                                              const std::map<std::string, std::string>& states = {}) {
  const auto table = csv::Table::read(path);
  std::map<std::string, CountySeries> by_fips;
  if (table.header().empty()) return {};
  const auto c_fips = table.column("fips");
  const auto c_date = table.column("date");
  const auto c_d = table.column("daily_deaths");
  const auto c_c = table.column("daily_cases");
  const auto c_m = table.column("m50_index");
  for (const auto& row : table.rows()) {
    auto& s = by_fips[row[c_fips]];
    const Date d = Date::parse(row[c_date]);
    if (s.fips.empty()) {
      s.fips = row[c_fips];
      s.start = d;
      if (auto it = states.find(s.fips); it != states.end()) s.state = it->second;
    } else if (d != s.last_date() + 1) {
      throw DataError("cleaned file: non-contiguous dates for " + s.fips);
    }
    s.daily_deaths.push_back(csv::parse_double(row[c_d]).value_or(0.0));
    s.daily_cases.push_back(csv::parse_double(row[c_c]).value_or(0.0));
    s.mobility.push_back(csv::parse_double(row[c_m]));
  }
  std::vector<CountySeries> out;
  for (auto& [f, s] : by_fips) out.push_back(std::move(s));
  return out;
}

/// Writes daily series back out in the cumulative ground-truth schema, rows ordered by
/// date then FIPS.
inline void write_ground_truth(const std::filesystem::path& path,
                               const std::vector<CountySeries>& series) {
  csv::Writer w(path);
  w.row({"date", "county", "state", "fips", "cases", "deaths"});
  std::vector<std::vector<double>> cum_c, cum_d;
  Date first{std::numeric_limits<std::int32_t>::max()}, last{std::numeric_limits<std::int32_t>::min()};
  for (const auto& s : series) {
    cum_c.push_back(cumulative(s.daily_cases));
    cum_d.push_back(cumulative(s.daily_deaths));
    if (s.size() == 0) continue;
    first = std::min(first, s.start);
    last = std::max(last, s.last_date());
  }
  for (Date d = first; d <= last; d += 1) {
    for (std::size_t k = 0; k < series.size(); ++k) {
      const auto i = series[k].index_of(d);
      if (!i) continue;
      w.row({d.str(), "County " + series[k].fips, series[k].state, series[k].fips,
             csv::fmt(cum_c[k][*i]), csv::fmt(cum_d[k][*i])});
    }
  }
}

/// Writes `date,fips,m50_index` for observed mobility values.
inline void write_mobility(const std::filesystem::path& path, const std::vector<CountySeries>& series) {
  csv::Writer w(path);
  w.row({"date", "fips", "m50_index"});
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.mobility.size(); ++i) {
      if (s.mobility[i]) w.row({s.date(i).str(), s.fips, csv::fmt(*s.mobility[i])});
    }
  }
}

/// Writes `fips,<name>...`.
inline void write_static_features(const std::filesystem::path& path, const StaticTable& table) {
  csv::Writer w(path);
  std::vector<std::string> header{"fips"};
  header.insert(header.end(), table.names.begin(), table.names.end());
  w.row(header);
  for (const auto& [fips, sf] : table.by_fips) {
    std::vector<std::string> row{fips};
    for (double v : sf.values) row.push_back(csv::fmt(v));
    w.row(row);
  }
}

}  // namespace epiq::data
