#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "epiq/clustering/dmdt.hpp"
#include "epiq/common/csv.hpp"
#include "epiq/common/error.hpp"
#include "epiq/common/rng.hpp"

namespace epiq::clustering {

struct KMeansConfig {
  int k = 6;
  int max_iters = 300;
  std::uint64_t seed = 0;
};

struct ClusterAssignment {
  std::vector<std::string> fips;
  std::vector<int> labels;  // parallel to fips
  std::vector<PooledVector> centroids;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after every assignment step, then the final value
  int iterations = 0;
  int k_requested = 0;
  bool k_reduced = false;

  [[nodiscard]] std::map<std::string, int> by_fips() const {
    std::map<std::string, int> m;
    for (std::size_t i = 0; i < fips.size(); ++i) m[fips[i]] = labels[i];
    return m;
  }
};

namespace detail {

inline double sqdist(const PooledVector& a, const PooledVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline std::size_t count_distinct(std::vector<PooledVector> v) {
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations until the assignment stops changing.
/// Ties go to the lowest centroid index; an empty cluster keeps its previous centroid.
/// k drops to the number of distinct vectors when there are fewer.
inline ClusterAssignment kmeans(const std::vector<ClusterFeature>& features, const KMeansConfig& cfg = {}) {
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  if (features.empty()) throw DataError("no counties to cluster");
  const std::size_t n = features.size();
  std::vector<PooledVector> x(n);
  ClusterAssignment a;
  a.k_requested = cfg.k;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = features[i].vector;
    a.fips.push_back(features[i].fips);
  }
  const std::size_t distinct = detail::count_distinct(x);
  std::size_t k = static_cast<std::size_t>(cfg.k);
  if (distinct < k) {
    k = distinct;
    a.k_reduced = true;
  }

  Rng rng(cfg.seed);
  a.centroids.push_back(x[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n))]);
  std::vector<double> d2(n);
  while (a.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::numeric_limits<double>::infinity();
      for (const auto& c : a.centroids) d2[i] = std::min(d2[i], detail::sqdist(x[i], c));
      total += d2[i];
    }
    double u = uniform01(rng) * total;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      if (u < d2[i]) break;
      u -= d2[i];
    }
    a.centroids.push_back(x[pick]);
  }

  a.labels.assign(n, -1);
  auto assign = [&] {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = detail::sqdist(x[i], a.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = detail::sqdist(x[i], a.centroids[c]);
        if (d < bd) {
          bd = d;
          best = static_cast<int>(c);
        }
      }
      changed |= a.labels[i] != best;
      a.labels[i] = best;
      inertia += bd;
    }
    return std::pair{changed, inertia};
  };
  auto inertia_now = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += detail::sqdist(x[i], a.centroids[static_cast<std::size_t>(a.labels[i])]);
    return s;
  };

  for (a.iterations = 0; a.iterations < cfg.max_iters; ++a.iterations) {
    const auto [changed, inertia] = assign();
    a.inertia_trace.push_back(inertia);
    if (!changed && a.iterations > 0) break;
    std::vector<PooledVector> sum(k, PooledVector{});
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(a.labels[i]);
      ++count[c];
      for (std::size_t j = 0; j < 16; ++j) sum[c][j] += x[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) continue;
      for (std::size_t j = 0; j < 16; ++j) a.centroids[c][j] = sum[c][j] / static_cast<double>(count[c]);
    }
  }
  a.inertia = inertia_now();
  a.inertia_trace.push_back(a.inertia);
  return a;
}

inline void write_assignments(const std::filesystem::path& path, const ClusterAssignment& a) {
  csv::Writer w(path);
  w.row({"fips", "cluster_label"});
  for (std::size_t i = 0; i < a.fips.size(); ++i) w.row({a.fips[i], std::to_string(a.labels[i])});
}

inline void write_centroids(const std::filesystem::path& path, const ClusterAssignment& a) {
  csv::Writer w(path);
  std::vector<std::string> header{"cluster_label"};
  for (int j = 0; j < 16; ++j) header.push_back("v" + std::to_string(j));
  w.row(header);
  for (std::size_t c = 0; c < a.centroids.size(); ++c) {
    std::vector<std::string> r{std::to_string(c)};
    for (double v : a.centroids[c]) r.push_back(csv::fmt(v));
    w.row(r);
  }
}

inline std::map<std::string, int> load_assignments(const std::filesystem::path& path) {
  const auto t = csv::Table::read(path);
  const auto f = t.column("fips");
  const auto l = t.column("cluster_label");
  std::map<std::string, int> out;
  for (const auto& r : t.rows()) out[r[f]] = static_cast<int>(csv::require_double(r[l], "cluster_label"));
  return out;
}

}  // namespace epiq::clustering
