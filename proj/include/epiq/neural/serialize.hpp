#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "epiq/common/error.hpp"
#include "epiq/common/json_io.hpp"
#include "epiq/neural/dense_net.hpp"
#include "epiq/neural/train.hpp"

namespace epiq::neural {

inline constexpr int kNetFormatVersion = 1;

namespace detail {

inline nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

/// Weights are stored row-major, one array per layer.
inline nlohmann::json to_json(const DenseNet& net) {
  nlohmann::json weights = nlohmann::json::array(), biases = nlohmann::json::array();
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    std::vector<double> w;
    const auto& W = net.weights[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) w.push_back(W(i, j));
    }
    weights.push_back(w);
    biases.push_back(detail::vec_json(net.biases[l]));
  }
  return {{"format", "epiq.dense_net"},
          {"version", kNetFormatVersion},
          {"layer_dims", net.layer_dims},
          {"dropout_rates", net.dropout_rates},
          {"weights", weights},
          {"biases", biases},
          {"input_mean", detail::vec_json(net.scaling.input_mean)},
          {"input_scale", detail::vec_json(net.scaling.input_scale)},
          {"target_offset", net.scaling.target_offset},
          {"target_scale", net.scaling.target_scale}};
}

inline DenseNet net_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "epiq.dense_net") throw DataError("expected an 'epiq.dense_net' dump");
  if (j.value("version", -1) != kNetFormatVersion) {
    throw DataError("dense_net dump version " + std::to_string(j.value("version", -1)) + " is unsupported");
  }
  try {
    DenseNet net;
    net.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    net.dropout_rates = j.at("dropout_rates").get<std::vector<double>>();
    const std::size_t L = net.layer_dims.size() - 1;
    if (net.layer_dims.size() < 2 || net.dropout_rates.size() != L || j.at("weights").size() != L ||
        j.at("biases").size() != L) {
      throw DataError("dense_net dump: layer count mismatch");
    }
    for (std::size_t l = 0; l < L; ++l) {
      const int in = net.layer_dims[l], out = net.layer_dims[l + 1];
      const auto w = j.at("weights")[l].get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(in) * static_cast<std::size_t>(out)) {
        throw DataError("dense_net dump: weight shape mismatch in layer " + std::to_string(l));
      }
      Eigen::MatrixXd W(out, in);
      for (int r = 0; r < out; ++r) {
        for (int c = 0; c < in; ++c) W(r, c) = w[static_cast<std::size_t>(r * in + c)];
      }
      net.weights.push_back(std::move(W));
      net.biases.push_back(detail::vec_from(j.at("biases")[l]));
      if (net.biases.back().size() != out) throw DataError("dense_net dump: bias shape mismatch");
    }
    net.scaling.input_mean = detail::vec_from(j.at("input_mean"));
    net.scaling.input_scale = detail::vec_from(j.at("input_scale"));
    net.scaling.target_offset = j.at("target_offset").get<double>();
    net.scaling.target_scale = j.at("target_scale").get<double>();
    if (net.scaling.input_mean.size() != net.layer_dims.front() ||
        net.scaling.input_scale.size() != net.layer_dims.front()) {
      throw DataError("dense_net dump: standardization length mismatch");
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dense_net dump: ") + e.what());
  }
}

inline nlohmann::json to_json(const QuantileNets& q) {
  nlohmann::json nets = nlohmann::json::array();
  for (const auto& n : q.nets) nets.push_back(to_json(n));
  return {{"format", "epiq.quantile_nets"}, {"version", kNetFormatVersion}, {"nets", nets}};
}

inline QuantileNets quantile_nets_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "epiq.quantile_nets" || j.value("version", -1) != kNetFormatVersion) {
    throw DataError("expected an 'epiq.quantile_nets' dump of version " + std::to_string(kNetFormatVersion));
  }
  QuantileNets q;
  for (const auto& n : j.at("nets")) q.nets.push_back(net_from_json(n));
  if (q.nets.size() != kNumQuantiles) throw DataError("quantile_nets dump must hold nine nets");
  return q;
}

}  // namespace epiq::neural
