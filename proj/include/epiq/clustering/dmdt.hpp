#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epiq/common/date.hpp"
#include "epiq/data/series.hpp"

namespace epiq::clustering {

inline constexpr std::size_t kBins = 8;
inline constexpr std::array<double, kBins + 1> kDmEdges{-20, -5, -2, -1, 0, 1, 2, 30, 100};
inline constexpr std::array<double, kBins + 1> kDtEdges{1, 2, 3, 5, 10, 20, 30, 60, 100};

/// Bin of v among half-open intervals [edges[b], edges[b+1]); none when out of range.
inline std::optional<std::size_t> find_bin(const std::array<double, kBins + 1>& edges, double v) {
  if (!(v >= edges.front() && v < edges.back())) return std::nullopt;
  std::size_t b = 0;
  while (v >= edges[b + 1]) ++b;
  return b;
}

/// grid[dm_bin][dt_bin] counts over ordered pairs i < j.
struct DmDtHistogram {
  std::array<std::array<double, kBins>, kBins> grid{};
  std::size_t pairs_counted = 0;
  bool too_short = false;

  [[nodiscard]] double total() const {
    double s = 0.0;
    for (const auto& r : grid) {
      for (double v : r) s += v;
    }
    return s;
  }
};

inline DmDtHistogram dmdt_histogram(std::span<const double> v) {
  DmDtHistogram h;
  if (v.size() < 2) {
    h.too_short = true;
    return h;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      const auto dt = find_bin(kDtEdges, static_cast<double>(j - i));
      if (!dt) break;  // dt only grows with j
      const auto dm = find_bin(kDmEdges, v[j] - v[i]);
      if (!dm) continue;
      h.grid[*dm][*dt] += 1.0;
      ++h.pairs_counted;
    }
  }
  return h;
}

/// Divides every cell by the number of counted pairs; an empty histogram stays zero.
inline DmDtHistogram normalized(DmDtHistogram h) {
  if (h.pairs_counted == 0) return h;
  const double n = static_cast<double>(h.pairs_counted);
  for (auto& r : h.grid) {
    for (double& c : r) c /= n;
  }
  return h;
}

using PooledVector = std::array<double, 16>;

/// 2x2 block averages of the 8x8 grid, flattened row-major.
inline PooledVector pool_and_flatten(const DmDtHistogram& h) {
  PooledVector out{};
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      out[r * 4 + c] = 0.25 * (h.grid[2 * r][2 * c] + h.grid[2 * r][2 * c + 1] + h.grid[2 * r + 1][2 * c] +
                               h.grid[2 * r + 1][2 * c + 1]);
    }
  }
  return out;
}

/// Daily deaths from the first day on which cumulative cases reach `case_threshold`;
/// empty if they never do.
inline std::vector<double> series_since_threshold(const data::CountySeries& s, double case_threshold = 10.0) {
  double cum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s.daily_cases[i];
    if (cum >= case_threshold) return {s.daily_deaths.begin() + static_cast<std::ptrdiff_t>(i), s.daily_deaths.end()};
  }
  return {};
}

struct ClusterFeature {
  std::string fips;
  PooledVector vector{};
  bool too_short = false;
};

inline ClusterFeature county_feature(const data::CountySeries& s, double case_threshold = 10.0) {
  const auto v = series_since_threshold(s, case_threshold);
  const auto h = dmdt_histogram(v);
  return {s.fips, pool_and_flatten(normalized(h)), h.too_short};
}

inline std::vector<ClusterFeature> county_features(const std::vector<data::CountySeries>& all,
                                                   double case_threshold = 10.0) {
  std::vector<ClusterFeature> out;
  out.reserve(all.size());
  for (const auto& s : all) out.push_back(county_feature(s, case_threshold));
  return out;
}

}  // namespace epiq::clustering
