#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "epiq/common/matrix.hpp"
#include "epiq/common/quantile.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/metrics/pinball.hpp"

namespace epiq::trees {

/// Split criterion and leaf rule: squared error with mean leaves, or pinball loss at
/// level q with empirical-quantile leaves.
struct TreeLoss {
  enum class Kind { Mse, Pinball };
  Kind kind = Kind::Mse;
  double q = 0.5;

  static TreeLoss mse() { return {}; }
  static TreeLoss pinball(double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("pinball level must be in (0,1)");
    return {Kind::Pinball, level};
  }
};

struct TreeConfig {
  int max_depth = 12;
  int min_samples_leaf = 3;
  /// Fraction of features examined at each split; 1 examines all of them.
  double feature_fraction = 1.0;
  std::uint64_t seed = 0;
};

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  std::size_t n_samples = 0;

  [[nodiscard]] bool is_leaf() const { return feature < 0; }
};

/// Binary regression tree stored as a flat node array; node 0 is the root and rows with
/// x[feature] <= threshold go left.
struct RegressionTree {
  std::vector<Node> nodes;
  int max_depth = 0;
  int min_samples_leaf = 1;
  std::size_t n_features = 0;

  [[nodiscard]] int leaf_index(std::span<const double> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
  }

  [[nodiscard]] double predict(std::span<const double> x) const {
    return nodes[static_cast<std::size_t>(leaf_index(x))].value;
  }

  [[nodiscard]] int depth() const {
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int d = 0;
    while (!stack.empty()) {
      auto [i, level] = stack.back();
      stack.pop_back();
      d = std::max(d, level);
      const auto& n = nodes[static_cast<std::size_t>(i)];
      if (!n.is_leaf()) {
        stack.emplace_back(n.left, level + 1);
        stack.emplace_back(n.right, level + 1);
      }
    }
    return d;
  }
};

/// Leaf prediction for a set of targets.
inline double leaf_value(std::vector<double> ys, const TreeLoss& loss) {
  if (ys.empty()) return 0.0;
  if (loss.kind == TreeLoss::Kind::Mse) {
    return std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  }
  return empirical_quantile_inplace(ys, loss.q);
}

/// Loss of predicting the leaf value for every target.
inline double node_loss(const std::vector<double>& ys, const TreeLoss& loss) {
  if (ys.empty()) return 0.0;
  const double v = leaf_value(ys, loss);
  double total = 0.0;
  for (double y : ys) {
    total += loss.kind == TreeLoss::Kind::Mse ? (y - v) * (y - v) : metrics::pinball_q(y, v, loss.q);
  }
  return total;
}

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Row indices ordered by each feature's value (ties by row).
using Presorted = std::vector<std::vector<std::size_t>>;

inline Presorted presort(const DenseMatrix& X) {
  Presorted out(X.cols());
  for (std::size_t f = 0; f < X.cols(); ++f) {
    auto& o = out[f];
    o.resize(X.rows());
    std::iota(o.begin(), o.end(), std::size_t{0});
    std::sort(o.begin(), o.end(), [&](auto a, auto b) { return X(a, f) < X(b, f) || (X(a, f) == X(b, f) && a < b); });
  }
  return out;
}

/// Best axis-aligned split of the rows `idx` over `features` (scanned in the given
/// order). Thresholds are midpoints between adjacent distinct values; both children
/// must keep `min_leaf` rows; ties keep the first candidate found.
/// `presorted`, when given, holds every row index ordered by each feature's value; large
/// nodes then read their order from it instead of sorting.
inline Split best_split(const DenseMatrix& X, std::span<const double> y, std::span<const std::size_t> idx,
                        const TreeLoss& loss, int min_leaf, std::span<const std::size_t> features,
                        const Presorted* presorted = nullptr) {
  Split best;
  const std::size_t n = idx.size();
  const auto min_n = static_cast<std::size_t>(std::max(1, min_leaf));
  if (n < 2 * min_n) return best;

  double s = 0.0, s2 = 0.0;
  for (auto i : idx) {
    s += y[i];
    s2 += y[i] * y[i];
  }
  std::vector<double> parent_ys;
  double parent_loss = 0.0;
  if (loss.kind == TreeLoss::Kind::Mse) {
    parent_loss = std::max(0.0, s2 - s * s / static_cast<double>(n));
  } else {
    for (auto i : idx) parent_ys.push_back(y[i]);
    parent_loss = node_loss(parent_ys, loss);
  }
  const double min_gain = 1e-12 * (1.0 + parent_loss);
  const double base = loss.kind == TreeLoss::Kind::Mse ? s * s / static_cast<double>(n) : 0.0;
  best.gain = min_gain;

  // Entries are (value, row).
  std::vector<std::pair<double, std::size_t>> col(n);
  std::vector<double> left_ys, right_ys;
  const double nd = static_cast<double>(n);
  const bool scan = presorted && static_cast<double>(X.rows()) < nd * std::log2(nd + 1.0);
  std::vector<std::size_t> count;
  if (scan) {
    count.assign(X.rows(), 0);
    for (auto i : idx) ++count[i];
  }
  for (auto f : features) {
    if (scan) {
      std::size_t k = 0;
      for (auto r : (*presorted)[f]) {
        for (std::size_t c = 0; c < count[r]; ++c) col[k++] = {X(r, f), r};
      }
    } else {
      for (std::size_t k = 0; k < n; ++k) col[k] = {X(idx[k], f), idx[k]};
      std::sort(col.begin(), col.end());
    }
    double sl = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      sl += y[col[k].second];
      const std::size_t nl = k + 1, nr = n - nl;
      const double a = col[k].first, b = col[k + 1].first;
      if (!(a < b) || nl < min_n || nr < min_n) continue;
      double gain = 0.0;
      if (loss.kind == TreeLoss::Kind::Mse) {
        const double sr = s - sl;
        gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) - base;
      } else {
        left_ys.clear();
        right_ys.clear();
        for (std::size_t m = 0; m < n; ++m) (m <= k ? left_ys : right_ys).push_back(y[col[m].second]);
        gain = parent_loss - node_loss(left_ys, loss) - node_loss(right_ys, loss);
      }
      if (gain > best.gain) {
        double thr = 0.5 * (a + b);
        if (!(thr < b)) thr = a;
        best = Split{true, f, thr, gain};
      }
    }
  }
  return best;
}

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const DenseMatrix& X, std::span<const double> y, const TreeLoss& loss, const TreeConfig& cfg)
      : X_(X), y_(y), loss_(loss), cfg_(cfg), rng_(cfg.seed) {
    all_features_.resize(X.cols());
    std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
    const double want = cfg.feature_fraction * static_cast<double>(X.cols());
    n_try_ = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(want)), 1, std::max<std::size_t>(1, X.cols()));
  }

  RegressionTree build(std::vector<std::size_t> idx, const Presorted* presorted) {
    if (presorted) {
      presorted_ = presorted;
    } else {
      own_ = presort(X_);
      presorted_ = &own_;
    }
    tree_.max_depth = cfg_.max_depth;
    tree_.min_samples_leaf = cfg_.min_samples_leaf;
    tree_.n_features = X_.cols();
    grow(std::move(idx), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> idx, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<double> ys;
    ys.reserve(idx.size());
    for (auto i : idx) ys.push_back(y_[i]);
    tree_.nodes[static_cast<std::size_t>(id)].value = leaf_value(ys, loss_);
    tree_.nodes[static_cast<std::size_t>(id)].n_samples = idx.size();
    if (depth >= cfg_.max_depth || X_.cols() == 0) return id;

    const Split split = best_split(X_, y_, idx, loss_, cfg_.min_samples_leaf, candidate_features(), presorted_);
    if (!split.found) return id;
    std::vector<std::size_t> left, right;
    for (auto i : idx) (X_(i, split.feature) <= split.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(split.feature);
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    if (n_try_ >= all_features_.size()) return all_features_;
    std::vector<std::size_t> pool = all_features_;
    for (std::size_t k = 0; k < n_try_; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(uniform01(rng_) * static_cast<double>(pool.size() - k));
      std::swap(pool[k], pool[std::min(j, pool.size() - 1)]);
    }
    pool.resize(n_try_);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  const DenseMatrix& X_;
  std::span<const double> y_;
  TreeLoss loss_;
  TreeConfig cfg_;
  Rng rng_;
  std::vector<std::size_t> all_features_;
  std::size_t n_try_ = 1;
  RegressionTree tree_;
  Presorted own_;
  const Presorted* presorted_ = nullptr;
};

}  // namespace detail

/// Greedy top-down tree on the rows listed in `sample` (duplicates allowed, as in a
/// bootstrap draw). An empty `sample` means every row once. `presorted` may carry
/// presort(X) when many trees share one X.
inline RegressionTree fit_tree(const DenseMatrix& X, std::span<const double> y, const TreeLoss& loss,
                               const TreeConfig& cfg, std::vector<std::size_t> sample = {},
                               const Presorted* presorted = nullptr) {
  if (X.rows() != y.size()) throw std::invalid_argument("feature/target row count mismatch");
  if (sample.empty()) {
    sample.resize(X.rows());
    std::iota(sample.begin(), sample.end(), std::size_t{0});
  }
  if (sample.empty()) throw std::invalid_argument("cannot fit a tree on zero rows");
  return detail::TreeBuilder(X, y, loss, cfg).build(std::move(sample), presorted);
}

}  // namespace epiq::trees
