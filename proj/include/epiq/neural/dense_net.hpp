#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epiq/common/quantile.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/metrics/pinball.hpp"

namespace epiq::neural {

/// Affine maps applied around the network: inputs are standardized before the first
/// layer and the raw output r is reported as r * target_scale + target_offset.
struct Scaling {
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  double target_offset = 0.0;
  double target_scale = 1.0;
};

/// Fully connected network: ReLU hidden layers, identity output.
/// dropout_rates[l] is the inverted-dropout rate on the input of layer l, so entry 0
/// drops input features and the rest drop hidden activations.
struct DenseNet {
  std::vector<int> layer_dims;
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;
  std::vector<double> dropout_rates;
  Scaling scaling;

  [[nodiscard]] int input_dim() const { return layer_dims.front(); }
  [[nodiscard]] int output_dim() const { return layer_dims.back(); }
  [[nodiscard]] std::size_t n_layers() const { return weights.size(); }

  [[nodiscard]] std::size_t n_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
  }
};

/// Network with uniform Glorot weights in +-sqrt(6 / (fan_in + fan_out)), zero biases
/// and identity scaling.
inline DenseNet make_net(const std::vector<int>& layer_dims, std::vector<double> dropout_rates,
                         std::uint64_t seed) {
  if (layer_dims.size() < 2) throw std::invalid_argument("network needs input and output dimensions");
  for (int d : layer_dims) {
    if (d < 1) throw std::invalid_argument("layer dimensions must be positive");
  }
  DenseNet net;
  net.layer_dims = layer_dims;
  const std::size_t L = layer_dims.size() - 1;
  dropout_rates.resize(L, 0.0);
  net.dropout_rates = std::move(dropout_rates);
  Rng rng(seed);
  for (std::size_t l = 0; l < L; ++l) {
    const int in = layer_dims[l], out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd W(out, in);
    for (int j = 0; j < in; ++j) {
      for (int i = 0; i < out; ++i) W(i, j) = limit * (2.0 * uniform01(rng) - 1.0);
    }
    net.weights.push_back(std::move(W));
    net.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  net.scaling.input_mean = Eigen::VectorXd::Zero(layer_dims.front());
  net.scaling.input_scale = Eigen::VectorXd::Ones(layer_dims.front());
  return net;
}

/// Intermediate values of one forward pass, columns = examples.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;     // after dropout
  std::vector<Eigen::MatrixXd> pre_activations;  // z = W a + b
  std::vector<Eigen::MatrixXd> masks;            // empty when dropout was off
  bool train_mode = false;

  /// Raw (unscaled) network output.
  [[nodiscard]] const Eigen::MatrixXd& raw_output() const { return pre_activations.back(); }
};

struct Gradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
};

/// Batched forward pass on already standardized inputs (input_dim x batch).
inline ForwardCache forward_batch(const DenseNet& net, const Eigen::MatrixXd& X, bool train_mode, Rng* rng) {
  if (X.rows() != net.input_dim()) {
    throw std::invalid_argument("input has " + std::to_string(X.rows()) + " features, network expects " +
                                std::to_string(net.input_dim()));
  }
  ForwardCache c;
  c.train_mode = train_mode;
  Eigen::MatrixXd a = X;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const double rate = net.dropout_rates[l];
    if (train_mode && rate > 0.0) {
      if (!rng) throw std::invalid_argument("train-mode forward needs a random stream");
      Eigen::MatrixXd mask(a.rows(), a.cols());
      const double keep = 1.0 - rate;
      for (Eigen::Index j = 0; j < mask.cols(); ++j) {
        for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = uniform01(*rng) < rate ? 0.0 : 1.0 / keep;
      }
      a = a.cwiseProduct(mask);
      c.masks.push_back(std::move(mask));
    } else {
      c.masks.emplace_back();
    }
    c.layer_inputs.push_back(a);
    Eigen::MatrixXd z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    c.pre_activations.push_back(z);
    if (l + 1 < net.n_layers()) a = z.cwiseMax(0.0);
  }
  return c;
}

/// Parameter gradients given dL/d(raw output) (output_dim x batch), summed over the batch.
inline Gradients backward_batch(const DenseNet& net, const ForwardCache& c, const Eigen::MatrixXd& d_out) {
  Gradients g;
  const std::size_t L = net.n_layers();
  g.dW.resize(L);
  g.db.resize(L);
  Eigen::MatrixXd delta = d_out;
  for (std::size_t l = L; l-- > 0;) {
    g.dW[l] = delta * c.layer_inputs[l].transpose();
    g.db[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = net.weights[l].transpose() * delta;
    if (c.masks[l].size() > 0) back = back.cwiseProduct(c.masks[l]);
    const auto& z = c.pre_activations[l - 1];
    delta = back.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
  }
  return g;
}

inline Eigen::MatrixXd standardize(const DenseNet& net, const Eigen::MatrixXd& X_raw) {
  return ((X_raw.colwise() - net.scaling.input_mean).array().colwise() / net.scaling.input_scale.array()).matrix();
}

struct ForwardResult {
  std::vector<double> prediction;
  ForwardCache cache;
};

/// Single-example forward pass in original units. Dropout is applied only in
/// train_mode, with masks drawn from `seed`.
inline ForwardResult forward(const DenseNet& net, std::span<const double> row, bool train_mode,
                             std::uint64_t seed = 0) {
  if (static_cast<int>(row.size()) != net.input_dim()) {
    throw std::invalid_argument("input has " + std::to_string(row.size()) + " features, network expects " +
                                std::to_string(net.input_dim()));
  }
  Eigen::MatrixXd x(net.input_dim(), 1);
  for (int i = 0; i < net.input_dim(); ++i) x(i, 0) = row[static_cast<std::size_t>(i)];
  Rng rng(seed);
  ForwardResult r{{}, forward_batch(net, standardize(net, x), train_mode, &rng)};
  const auto& out = r.cache.raw_output();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    r.prediction.push_back(out(i, 0) * net.scaling.target_scale + net.scaling.target_offset);
  }
  return r;
}

/// Parameter gradients for one example given dL/d(prediction) in original units.
inline Gradients backward(const DenseNet& net, const ForwardCache& cache, std::span<const double> loss_grad) {
  Eigen::MatrixXd d(net.output_dim(), 1);
  for (int i = 0; i < net.output_dim(); ++i) d(i, 0) = loss_grad[static_cast<std::size_t>(i)] * net.scaling.target_scale;
  return backward_batch(net, cache, d);
}

/// Evaluation-mode predictions for raw rows (one prediction vector per row).
inline std::vector<std::vector<double>> predict_rows(const DenseNet& net, const Eigen::MatrixXd& X_raw_cols) {
  const auto c = forward_batch(net, standardize(net, X_raw_cols), false, nullptr);
  const auto& out = c.raw_output();
  std::vector<std::vector<double>> res(static_cast<std::size_t>(out.cols()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      res[static_cast<std::size_t>(j)].push_back(out(i, j) * net.scaling.target_scale + net.scaling.target_offset);
    }
  }
  return res;
}

/// Training objective.
struct NetLoss {
  enum class Kind {
    Mse,         // single output, (yhat - y)^2
    Pinball,     // single output, pinball at level q
    QuantileSet  // nine outputs, mean pinball over the standard levels
  };
  Kind kind = Kind::Mse;
  double q = 0.5;

  static NetLoss mse() { return {}; }
  static NetLoss pinball(double level) { return {Kind::Pinball, level}; }
  static NetLoss quantile_set() { return {Kind::QuantileSet, 0.5}; }

  [[nodiscard]] int outputs() const { return kind == Kind::QuantileSet ? static_cast<int>(kNumQuantiles) : 1; }

  /// Loss of one example.
  [[nodiscard]] double value(std::span<const double> pred, double y) const {
    switch (kind) {
      case Kind::Mse:
        return (pred[0] - y) * (pred[0] - y);
      case Kind::Pinball:
        return metrics::pinball_q(y, pred[0], q);
      case Kind::QuantileSet:
        return metrics::pinball_county(y, pred);
    }
    return 0.0;
  }

  /// dL/dpred for one example; written into `grad`.
  void gradient(std::span<const double> pred, double y, std::span<double> grad) const {
    switch (kind) {
      case Kind::Mse:
        grad[0] = 2.0 * (pred[0] - y);
        break;
      case Kind::Pinball:
        grad[0] = metrics::pinball_grad(y, pred[0], q);
        break;
      case Kind::QuantileSet:
        for (std::size_t j = 0; j < kNumQuantiles; ++j) {
          grad[j] = metrics::pinball_grad(y, pred[j], kQuantileLevels[j]) / static_cast<double>(kNumQuantiles);
        }
        break;
    }
  }
};

}  // namespace epiq::neural
