#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "epiq/common/quantile.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/metrics/pinball.hpp"
#include "epiq/trees/tree.hpp"

namespace epiq::trees {

struct GbdtConfig {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_samples_leaf = 3;
  /// Independently seeded boosting runs averaged per quantile.
  int n_runs = 5;
  /// Row fraction used to grow each round's tree.
  double subsample = 0.8;
  double feature_fraction = 1.0;
  std::uint64_t seed = 0;
  /// Give every run the master seed (the runs then coincide).
  bool identical_run_seeds = false;
};

/// One boosting run for one quantile level.
struct BoostRun {
  std::uint64_t seed = 0;
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
  /// Mean training pinball loss before round 1 and after every round.
  std::vector<double> loss_trace;

  [[nodiscard]] double predict(std::span<const double> x, double learning_rate) const {
    double f = 0.0;
    for (const auto& t : trees) f += t.predict(x);
    return base_score + learning_rate * f;
  }
};

struct GbdtModel {
  std::string fips;
  double learning_rate = 0.1;
  int n_rounds = 0;
  /// runs[j] holds the runs for kQuantileLevels[j].
  std::array<std::vector<BoostRun>, kNumQuantiles> runs;
  /// Set when the county had too few rows and each quantile is a constant.
  bool fallback = false;

  [[nodiscard]] QuantileVector predict(std::span<const double> x) const {
    QuantileVector out{};
    for (std::size_t j = 0; j < kNumQuantiles; ++j) {
      double s = 0.0;
      for (const auto& r : runs[j]) s += r.predict(x, learning_rate);
      out[j] = runs[j].empty() ? 0.0 : s / static_cast<double>(runs[j].size());
    }
    return out;
  }
};

/// Negative gradient of the pinball loss with respect to the prediction.
inline double pinball_pseudo_residual(double y, double f, double q) { return y > f ? q : q - 1.0; }

/// Gradient boosting on pinball loss at level q. Each round grows a squared-error tree
/// on the pseudo-residuals of a row subsample, then resets every leaf to the empirical
/// q-quantile of the current residuals of all training rows in that leaf. That value
/// minimizes the leaf's pinball loss, so with learning_rate in [0,1] the training loss
/// cannot increase.
inline BoostRun boost_quantile(const DenseMatrix& X, std::span<const double> y, double q,
                               const GbdtConfig& cfg, std::uint64_t seed, const Presorted* presorted = nullptr) {
  const std::size_t n = X.rows();
  Presorted own;
  if (!presorted) {
    own = presort(X);
    presorted = &own;
  }
  BoostRun run;
  run.seed = seed;
  run.base_score = empirical_quantile(std::vector<double>(y.begin(), y.end()), q);
  std::vector<double> f(n, run.base_score);
  auto mean_loss = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += metrics::pinball_q(y[i], f[i], q);
    return s / static_cast<double>(n);
  };
  run.loss_trace.push_back(mean_loss());

  Rng rng(seed);
  const auto n_sub = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(cfg.subsample * static_cast<double>(n))),
                                             std::min<std::size_t>(n, 2 * static_cast<std::size_t>(cfg.min_samples_leaf)), n);
  std::vector<std::size_t> perm(n);
  std::vector<double> grad(n);
  for (int round = 0; round < cfg.n_rounds; ++round) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t k = 0; k < n_sub; ++k) {
      const std::size_t j = k + std::min(n - k - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - k)));
      std::swap(perm[k], perm[j]);
    }
    std::vector<std::size_t> sample(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_sub));
    std::sort(sample.begin(), sample.end());
    for (std::size_t i = 0; i < n; ++i) grad[i] = pinball_pseudo_residual(y[i], f[i], q);

    TreeConfig tc{cfg.max_depth, cfg.min_samples_leaf, cfg.feature_fraction, rng()};
    RegressionTree tree = fit_tree(X, grad, TreeLoss::mse(), tc, sample, presorted);

    std::vector<std::vector<double>> leaf_residuals(tree.nodes.size());
    std::vector<int> leaf_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      leaf_of[i] = tree.leaf_index(X.row(i));
      leaf_residuals[static_cast<std::size_t>(leaf_of[i])].push_back(y[i] - f[i]);
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      if (!tree.nodes[k].is_leaf()) continue;
      tree.nodes[k].value = leaf_residuals[k].empty() ? 0.0 : empirical_quantile_inplace(leaf_residuals[k], q);
    }
    for (std::size_t i = 0; i < n; ++i) {
      f[i] += cfg.learning_rate * tree.nodes[static_cast<std::size_t>(leaf_of[i])].value;
    }
    run.trees.push_back(std::move(tree));
    run.loss_trace.push_back(mean_loss());
  }
  return run;
}

/// Per-county quantile GBDT: for each of the nine levels, `n_runs` seeded boosting runs
/// whose predictions are averaged. Counties with fewer than 2 * min_samples_leaf rows
/// get constant empirical-quantile models and the fallback flag.
inline GbdtModel fit_county_gbdt(const std::string& fips, const DenseMatrix& X, std::span<const double> y,
                                 const GbdtConfig& cfg = {}) {
  if (X.rows() != y.size()) throw std::invalid_argument("feature/target row count mismatch");
  if (y.empty()) throw std::invalid_argument("GBDT needs at least one row");
  if (cfg.learning_rate < 0.0 || cfg.learning_rate > 1.0) {
    throw std::invalid_argument("GBDT learning rate must lie in [0,1]");
  }
  GbdtModel model;
  model.fips = fips;
  model.learning_rate = cfg.learning_rate;
  model.n_rounds = cfg.n_rounds;
  model.fallback = X.rows() < 2 * static_cast<std::size_t>(std::max(1, cfg.min_samples_leaf));
  GbdtConfig run_cfg = cfg;
  if (model.fallback) run_cfg.n_rounds = 0;
  const Presorted sorted = presort(X);
  const auto seeds = derive_seeds(cfg.seed, kNumQuantiles * static_cast<std::size_t>(std::max(1, cfg.n_runs)));
  for (std::size_t j = 0; j < kNumQuantiles; ++j) {
    for (int r = 0; r < std::max(1, cfg.n_runs); ++r) {
      const std::uint64_t s =
          cfg.identical_run_seeds ? cfg.seed : seeds[j * static_cast<std::size_t>(std::max(1, cfg.n_runs)) + static_cast<std::size_t>(r)];
      model.runs[j].push_back(boost_quantile(X, y, kQuantileLevels[j], run_cfg, s, &sorted));
    }
  }
  return model;
}

}  // namespace epiq::trees
