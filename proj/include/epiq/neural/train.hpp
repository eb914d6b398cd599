#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "epiq/common/error.hpp"
#include "epiq/common/matrix.hpp"
#include "epiq/common/quantile.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/neural/dense_net.hpp"

namespace epiq::neural {

/// Axes of an exhaustive hyperparameter grid; empty axes keep the base value.
struct HyperGrid {
  std::vector<double> learning_rates;
  std::vector<int> batch_sizes;
  std::vector<double> input_dropouts;
  std::vector<double> hidden_dropouts;
};

struct TrainConfig {
  NetLoss loss = NetLoss::mse();
  std::vector<int> hidden = {20, 10, 10};
  double input_dropout = 0.1;
  double hidden_dropout = 0.2;
  double learning_rate = 0.01;
  int batch_size = 32;
  int max_epochs = 200;
  int early_stop_patience = 10;
  double early_stop_tolerance = 1e-4;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  std::optional<HyperGrid> grid;

  void validate() const {
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw ConfigError("validation_fraction must lie in (0, 1)");
    }
    for (double r : {input_dropout, hidden_dropout}) {
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates must lie in [0, 1)");
    }
  }
};

/// Grid points in row-major order over (learning rate, batch size, input dropout,
/// hidden dropout); this order breaks ties in grid_search.
inline std::vector<TrainConfig> expand_grid(const TrainConfig& base, const HyperGrid& g) {
  auto axis = [](const auto& v, auto dflt) { return v.empty() ? std::vector<decltype(dflt)>{dflt} : v; };
  std::vector<TrainConfig> out;
  for (double lr : axis(g.learning_rates, base.learning_rate)) {
    for (int bs : axis(g.batch_sizes, base.batch_size)) {
      for (double di : axis(g.input_dropouts, base.input_dropout)) {
        for (double dh : axis(g.hidden_dropouts, base.hidden_dropout)) {
          TrainConfig c = base;
          c.learning_rate = lr;
          c.batch_size = bs;
          c.input_dropout = di;
          c.hidden_dropout = dh;
          c.grid.reset();
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

/// Row indices of a temporal train/validation split. With time keys, the validation
/// set is every row on the last ceil(fraction * distinct days) days; without keys it
/// is the trailing fraction of rows.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

inline Split temporal_split(std::size_t n, std::span<const int> time_key, double fraction) {
  if (!time_key.empty() && time_key.size() != n) throw std::invalid_argument("time key length mismatch");
  Split s;
  if (time_key.empty()) {
    const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) (i + n_val >= n ? s.validation : s.train).push_back(i);
  } else {
    std::vector<int> days(time_key.begin(), time_key.end());
    std::sort(days.begin(), days.end());
    days.erase(std::unique(days.begin(), days.end()), days.end());
    const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(days.size())));
    const int first_val = n_val >= days.size() ? days.front() : days[days.size() - n_val];
    for (std::size_t i = 0; i < n; ++i) (time_key[i] >= first_val ? s.validation : s.train).push_back(i);
  }
  if (s.train.empty() || s.validation.empty()) {
    throw DataError("training needs at least one training and one validation row");
  }
  return s;
}

/// Standardization from the listed rows; zero-variance columns get unit scale.
inline Scaling fit_scaling(const DenseMatrix& X, std::span<const double> y, std::span<const std::size_t> rows) {
  const std::size_t d = X.cols();
  Scaling s;
  s.input_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  s.input_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d));
  const double n = static_cast<double>(rows.size());
  double ym = 0.0;
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < d; ++j) s.input_mean(static_cast<Eigen::Index>(j)) += X(r, j) / n;
    ym += y[r] / n;
  }
  Eigen::VectorXd var = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  double yv = 0.0;
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = X(r, j) - s.input_mean(static_cast<Eigen::Index>(j));
      var(static_cast<Eigen::Index>(j)) += c * c / n;
    }
    yv += (y[r] - ym) * (y[r] - ym) / n;
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var(static_cast<Eigen::Index>(j)));
    s.input_scale(static_cast<Eigen::Index>(j)) = sd > 1e-12 ? sd : 1.0;
  }
  s.target_offset = ym;
  s.target_scale = std::sqrt(yv) > 1e-12 ? std::sqrt(yv) : 1.0;
  return s;
}

/// Per-epoch history. Losses are in standardized target units.
struct TrainTrace {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<double> best_validation;  // running minimum, i.e. the loss of the snapshot kept so far
  int best_epoch = -1;
  bool stopped_early = false;
};

struct TrainResult {
  DenseNet net;
  TrainTrace trace;
  [[nodiscard]] double best_validation_loss() const {
    return trace.best_validation.empty() ? std::numeric_limits<double>::infinity() : trace.best_validation.back();
  }
};

namespace detail {

inline Eigen::MatrixXd columns_of(const DenseMatrix& X, const Scaling& s, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(X.cols()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t j = 0; j < X.cols(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      out(jj, static_cast<Eigen::Index>(k)) = (X(rows[k], j) - s.input_mean(jj)) / s.input_scale(jj);
    }
  }
  return out;
}

inline double batch_loss(const NetLoss& loss, const Eigen::MatrixXd& out, std::span<const double> yn,
                         Eigen::MatrixXd* grad) {
  const auto k = static_cast<std::size_t>(out.rows());
  std::vector<double> pred(k), g(k);
  double total = 0.0;
  if (grad) grad->resize(out.rows(), out.cols());
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (std::size_t i = 0; i < k; ++i) pred[i] = out(static_cast<Eigen::Index>(i), j);
    const double y = yn[static_cast<std::size_t>(j)];
    total += loss.value(pred, y);
    if (grad) {
      loss.gradient(pred, y, g);
      for (std::size_t i = 0; i < k; ++i) (*grad)(static_cast<Eigen::Index>(i), j) = g[i];
    }
  }
  return total;
}

inline void check_finite(double v, const char* what, int epoch, double lr) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "non-finite " << what << " at epoch " << epoch << " (learning rate " << lr
       << " is probably too high)";
    throw NumericalError(os.str());
  }
}

}  // namespace detail

/// Mini-batch SGD with early stopping on a temporal validation split. Returns the
/// best-validation snapshot. `time_key` (optional) gives each row's day for the
/// split; `shared` overrides the standardization computed from training rows.
inline TrainResult train(const DenseMatrix& X, std::span<const double> y, const TrainConfig& cfg,
                         std::span<const int> time_key = {}, const Scaling* shared = nullptr) {
  cfg.validate();
  if (X.rows() != y.size()) throw std::invalid_argument("rows and targets differ in length");
  if (X.cols() == 0) throw std::invalid_argument("rows have no features");
  const Split split = temporal_split(X.rows(), time_key, cfg.validation_fraction);

  const auto seeds = derive_seeds(cfg.seed, 2);
  std::vector<int> dims{static_cast<int>(X.cols())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.loss.outputs());
  std::vector<double> rates(dims.size() - 1, cfg.hidden_dropout);
  rates[0] = cfg.input_dropout;
  DenseNet net = make_net(dims, rates, seeds[0]);
  net.scaling = shared ? *shared : fit_scaling(X, y, split.train);

  const Eigen::MatrixXd Xtr = detail::columns_of(X, net.scaling, split.train);
  const Eigen::MatrixXd Xva = detail::columns_of(X, net.scaling, split.validation);
  auto normalized = [&](const std::vector<std::size_t>& rows) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (std::size_t r : rows) v.push_back((y[r] - net.scaling.target_offset) / net.scaling.target_scale);
    return v;
  };
  const std::vector<double> ytr = normalized(split.train), yva = normalized(split.validation);

  Rng rng(seeds[1]);
  std::vector<Eigen::Index> order(split.train.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto n_train = static_cast<Eigen::Index>(order.size());
  const auto bs = static_cast<Eigen::Index>(cfg.batch_size);

  TrainResult res;
  DenseNet best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  std::vector<double> yb;
  Eigen::MatrixXd grad;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n_train; start += bs) {
      const Eigen::Index len = std::min(bs, n_train - start);
      Eigen::MatrixXd xb(Xtr.rows(), len);
      yb.resize(static_cast<std::size_t>(len));
      for (Eigen::Index k = 0; k < len; ++k) {
        const auto i = order[static_cast<std::size_t>(start + k)];
        xb.col(k) = Xtr.col(i);
        yb[static_cast<std::size_t>(k)] = ytr[static_cast<std::size_t>(i)];
      }
      const auto cache = forward_batch(net, xb, true, &rng);
      epoch_loss += detail::batch_loss(cfg.loss, cache.raw_output(), yb, &grad);
      const auto g = backward_batch(net, cache, grad);
      const double step = cfg.learning_rate / static_cast<double>(len);
      for (std::size_t l = 0; l < net.n_layers(); ++l) {
        net.weights[l] -= step * g.dW[l];
        net.biases[l] -= step * g.db[l];
      }
    }
    epoch_loss /= static_cast<double>(n_train);
    detail::check_finite(epoch_loss, "training loss", epoch, cfg.learning_rate);

    const auto vcache = forward_batch(net, Xva, false, nullptr);
    const double val = detail::batch_loss(cfg.loss, vcache.raw_output(), yva, nullptr) / static_cast<double>(yva.size());
    detail::check_finite(val, "validation loss", epoch, cfg.learning_rate);

    res.trace.train_loss.push_back(epoch_loss);
    res.trace.validation_loss.push_back(val);
    if (val < best_val - cfg.early_stop_tolerance || res.trace.best_epoch < 0) {
      best_val = val;
      best = net;
      res.trace.best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement >= cfg.early_stop_patience) {
      res.trace.best_validation.push_back(best_val);
      res.trace.stopped_early = true;
      break;
    }
    res.trace.best_validation.push_back(best_val);
  }
  res.net = std::move(best);
  return res;
}

/// Nine single-output nets, one per quantile level, sharing one standardization.
struct QuantileNets {
  std::vector<DenseNet> nets;
  std::vector<TrainTrace> traces;

  [[nodiscard]] QuantileVector predict(std::span<const double> row) const {
    QuantileVector q{};
    for (std::size_t j = 0; j < nets.size(); ++j) q[j] = forward(nets[j], row, false).prediction[0];
    monotonize(q);
    return q;
  }

  [[nodiscard]] std::vector<QuantileVector> predict(const DenseMatrix& X) const {
    Eigen::MatrixXd cols(static_cast<Eigen::Index>(X.cols()), static_cast<Eigen::Index>(X.rows()));
    for (std::size_t i = 0; i < X.rows(); ++i) {
      for (std::size_t j = 0; j < X.cols(); ++j) cols(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = X(i, j);
    }
    std::vector<QuantileVector> out(X.rows());
    for (std::size_t j = 0; j < nets.size(); ++j) {
      const auto p = predict_rows(nets[j], cols);
      for (std::size_t i = 0; i < X.rows(); ++i) out[i][j] = p[i][0];
    }
    for (auto& q : out) monotonize(q);
    return out;
  }
};

/// `cfg.loss` is ignored; net j is trained on pinball at level j with its own seed.
inline QuantileNets train_quantile_nets(const DenseMatrix& X, std::span<const double> y, const TrainConfig& cfg,
                                        std::span<const int> time_key = {}) {
  cfg.validate();
  const Split split = temporal_split(X.rows(), time_key, cfg.validation_fraction);
  const Scaling shared = fit_scaling(X, y, split.train);
  const auto seeds = derive_seeds(cfg.seed, kNumQuantiles);
  QuantileNets out;
  for (std::size_t j = 0; j < kNumQuantiles; ++j) {
    TrainConfig c = cfg;
    c.loss = NetLoss::pinball(kQuantileLevels[j]);
    c.seed = seeds[j];
    auto r = train(X, y, c, time_key, &shared);
    out.nets.push_back(std::move(r.net));
    out.traces.push_back(std::move(r.trace));
  }
  return out;
}

struct GridSearchResult {
  TrainConfig best;
  std::size_t best_index = 0;
  std::vector<double> validation_losses;  // +inf for diverged points
};

/// Trains every grid point on the same split and keeps the lowest validation loss;
/// the earliest point wins ties. A point whose training diverges scores +inf.
inline GridSearchResult grid_search(const DenseMatrix& X, std::span<const double> y,
                                    const std::vector<TrainConfig>& grid, std::span<const int> time_key = {}) {
  if (grid.empty()) throw ConfigError("grid search needs at least one grid point");
  const Split split = temporal_split(X.rows(), time_key, grid.front().validation_fraction);
  const Scaling shared = fit_scaling(X, y, split.train);
  GridSearchResult res;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double v = std::numeric_limits<double>::infinity();
    try {
      v = train(X, y, grid[i], time_key, &shared).best_validation_loss();
    } catch (const NumericalError&) {
    }
    res.validation_losses.push_back(v);
    if (v < best) {
      best = v;
      res.best_index = i;
    }
  }
  res.best = grid[res.best_index];
  return res;
}

inline GridSearchResult grid_search(const DenseMatrix& X, std::span<const double> y, const HyperGrid& grid,
                                    const TrainConfig& base, std::span<const int> time_key = {}) {
  return grid_search(X, y, expand_grid(base, grid), time_key);
}

}  // namespace epiq::neural
