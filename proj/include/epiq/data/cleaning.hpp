#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "epiq/data/series.hpp"

namespace epiq::data {

/// A day is a dump when its value exceeds max(abs_min, ratio * mean of the
/// preceding `trailing_days` values).
struct DumpConfig {
  double abs_min = 10.0;
  double ratio = 5.0;
  int trailing_days = 7;
  /// Integer-valued windows are spread as integers (floor plus remainder on the latest
  /// days), which keeps totals bit-exact. Otherwise windows get the real-valued mean.
  bool integer_spread = true;
  bool clean_cases = true;
};

inline std::vector<std::size_t> detect_dumps(std::span<const double> values, const DumpConfig& cfg) {
  std::vector<std::size_t> dumps;
  double window_sum = 0.0;
  for (std::size_t d = 0; d < values.size(); ++d) {
    const std::size_t have = std::min<std::size_t>(d, static_cast<std::size_t>(cfg.trailing_days));
    const double trailing_mean = have ? window_sum / static_cast<double>(have) : 0.0;
    if (values[d] > std::max(cfg.abs_min, cfg.ratio * trailing_mean)) dumps.push_back(d);
    window_sum += values[d];
    if (d >= static_cast<std::size_t>(cfg.trailing_days)) {
      window_sum -= values[d - static_cast<std::size_t>(cfg.trailing_days)];
    }
  }
  return dumps;
}

namespace detail {

inline void spread(std::span<double> out, double total, bool integer_spread) {
  const auto len = static_cast<double>(out.size());
  if (integer_spread && total >= 0.0 && std::floor(total) == total && total < 0x1p52) {
    const double base = std::floor(total / len);
    auto rem = static_cast<std::size_t>(total - base * len);
    std::fill(out.begin(), out.end(), base);
    for (std::size_t i = out.size() - rem; i < out.size(); ++i) out[i] += 1.0;
  } else {
    std::fill(out.begin(), out.end(), total / len);
  }
}

}  // namespace detail

/// Spreads each window evenly. A window closes at every index in `dump_days` and at every
/// negative value, and covers the days since the previous close (inclusive of the close
/// day). A window with a negative total absorbs preceding windows until its total is
/// non-negative, so downward revisions are paid for by earlier reports. The trailing
/// segment after the last close is left untouched.
inline std::vector<double> redistribute_windows(std::span<const double> values,
                                                std::span<const std::size_t> dump_days,
                                                bool integer_spread = true) {
  std::vector<double> out(values.begin(), values.end());
  const std::size_t n = values.size();
  std::vector<char> closes(n, 0);
  for (auto d : dump_days) {
    if (d < n) closes[d] = 1;
  }
  struct Window {
    std::size_t begin, end;  // inclusive
    double sum;
  };
  std::vector<Window> windows;
  std::size_t next_begin = 0;
  for (std::size_t d = 0; d < n; ++d) {
    if (!closes[d] && values[d] >= 0.0) continue;
    Window w{next_begin, d, 0.0};
    for (std::size_t i = w.begin; i <= d; ++i) w.sum += values[i];
    while (w.sum < 0.0 && !windows.empty()) {
      w.begin = windows.back().begin;
      w.sum += windows.back().sum;
      windows.pop_back();
    }
    windows.push_back(w);
    next_begin = d + 1;
  }
  for (const auto& w : windows) {
    std::span<double> seg(out.data() + w.begin, w.end - w.begin + 1);
    // A negative total can only survive here when the cumulative series itself went
    // below zero; such input cannot be conserved and is zeroed.
    if (w.sum < 0.0) {
      std::fill(seg.begin(), seg.end(), 0.0);
    } else {
      detail::spread(seg, w.sum, integer_spread);
    }
  }
  return out;
}

inline std::vector<double> redistribute_dumps(std::span<const double> values, const DumpConfig& cfg) {
  const auto dumps = detect_dumps(values, cfg);
  return redistribute_windows(values, dumps, cfg.integer_spread);
}

inline CountySeries redistribute_dumps(const CountySeries& series, const DumpConfig& cfg = {}) {
  CountySeries out = series;
  out.daily_deaths = redistribute_dumps(series.daily_deaths, cfg);
  if (cfg.clean_cases) out.daily_cases = redistribute_dumps(series.daily_cases, cfg);
  return out;
}

inline constexpr double kNormalMobility = 100.0;

/// Forward-fills missing mobility; leading gaps take the first observation and an
/// all-missing channel takes `fallback`.
inline CountySeries impute_mobility(const CountySeries& series, double fallback = kNormalMobility) {
  CountySeries out = series;
  out.mobility.resize(out.size());
  std::optional<double> first;
  for (const auto& m : out.mobility) {
    if (m) {
      first = m;
      break;
    }
  }
  double last = first.value_or(fallback);
  for (auto& m : out.mobility) {
    if (m) {
      last = *m;
    } else {
      m = last;
    }
  }
  return out;
}

inline CountySeries clean_series(const CountySeries& series, const DumpConfig& cfg = {}) {
  return impute_mobility(redistribute_dumps(series, cfg));
}

inline std::vector<CountySeries> clean_all(const std::vector<CountySeries>& series,
                                           const DumpConfig& cfg = {}) {
  std::vector<CountySeries> out;
  out.reserve(series.size());
  for (const auto& s : series) out.push_back(clean_series(s, cfg));
  return out;
}

}  // namespace epiq::data
