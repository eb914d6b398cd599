#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "epiq/common/quantile.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/trees/tree.hpp"

namespace epiq::trees {

struct ForestConfig {
  int n_trees = 200;
  TreeConfig tree{12, 3, 1.0 / 3.0, 0};
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  std::vector<std::uint64_t> seeds;
  double feature_fraction = 1.0;
  bool bootstrap = true;
  /// Row multiset each tree was grown on (not serialized).
  std::vector<std::vector<std::size_t>> samples;

  [[nodiscard]] std::vector<double> tree_predictions(std::span<const double> x) const {
    std::vector<double> out;
    out.reserve(trees.size());
    for (const auto& t : trees) out.push_back(t.predict(x));
    return out;
  }

  [[nodiscard]] double predict(std::span<const double> x) const {
    const auto p = tree_predictions(x);
    double s = 0.0;
    for (double v : p) s += v;
    return p.empty() ? 0.0 : s / static_cast<double>(p.size());
  }
};

/// Random forest of squared-error trees on bootstrap resamples. Per-tree seeds are
/// drawn from the master seed up front.
inline ForestModel fit_forest(const DenseMatrix& X, std::span<const double> y, const ForestConfig& cfg = {}) {
  if (cfg.n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
  ForestModel model;
  model.feature_fraction = cfg.tree.feature_fraction;
  model.bootstrap = cfg.bootstrap;
  model.seeds = derive_seeds(cfg.seed, static_cast<std::size_t>(cfg.n_trees));
  const Presorted sorted = presort(X);
  for (int t = 0; t < cfg.n_trees; ++t) {
    TreeConfig tc = cfg.tree;
    tc.seed = model.seeds[static_cast<std::size_t>(t)];
    std::vector<std::size_t> sample(X.rows());
    if (cfg.bootstrap) {
      Rng rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
      for (auto& s : sample) {
        s = std::min(X.rows() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(X.rows())));
      }
      std::sort(sample.begin(), sample.end());
    } else {
      std::iota(sample.begin(), sample.end(), std::size_t{0});
    }
    model.trees.push_back(fit_tree(X, y, TreeLoss::mse(), tc, sample, &sorted));
    model.samples.push_back(std::move(sample));
  }
  return model;
}

/// Out-of-bag squared error of each tree: mean over rows not in that tree's sample.
inline std::vector<double> per_tree_oob_mse(const ForestModel& model, const DenseMatrix& X,
                                            std::span<const double> y) {
  std::vector<double> out;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    std::vector<char> in_bag(X.rows(), 0);
    for (auto i : model.samples[t]) in_bag[i] = 1;
    double sse = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
      if (in_bag[i]) continue;
      const double e = model.trees[t].predict(X.row(i)) - y[i];
      sse += e * e;
      ++n;
    }
    if (n) out.push_back(sse / static_cast<double>(n));
  }
  return out;
}

/// Caps applied to the upper quantiles of the forest's empirical distribution.
struct ClipConfig {
  double multiplier = 3.0;
  /// Levels at or above this are capped.
  double min_level = 0.8;
};

/// Sorts, then caps levels >= min_level at multiplier * county_max (county_max taken as
/// at least 1). Lower levels are bounded by the same cap so the vector stays monotone.
inline void clip_top_quantiles(QuantileVector& q, double county_max, const ClipConfig& clip = {}) {
  monotonize(q);
  const double cap = clip.multiplier * std::max(county_max, 1.0);
  bool capped = false;
  for (std::size_t j = 0; j < kNumQuantiles; ++j) {
    if (kQuantileLevels[j] >= clip.min_level - 1e-12 && q[j] > cap) {
      q[j] = cap;
      capped = true;
    }
  }
  if (capped) {
    for (auto& v : q) v = std::min(v, cap);
  }
}

/// Empirical quantiles of the individual tree predictions with the top levels clipped.
inline QuantileVector quantiles_from_predictions(std::vector<double> preds, double county_max,
                                                 const ClipConfig& clip = {}) {
  QuantileVector q = empirical_quantiles(std::move(preds));
  clip_top_quantiles(q, county_max, clip);
  return q;
}

inline QuantileVector forest_quantiles(const ForestModel& model, std::span<const double> x,
                                       double county_max, const ClipConfig& clip = {}) {
  return quantiles_from_predictions(model.tree_predictions(x), county_max, clip);
}

}  // namespace epiq::trees
