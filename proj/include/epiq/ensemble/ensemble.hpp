#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "epiq/common/error.hpp"
#include "epiq/common/matrix.hpp"
#include "epiq/ensemble/aggregation.hpp"
#include "epiq/metrics/forecast.hpp"
#include "epiq/neural/serialize.hpp"
#include "epiq/neural/train.hpp"

namespace epiq::ensemble {

struct EnsembleConfig {
  neural::TrainConfig train = [] {
    neural::TrainConfig c;
    c.loss = neural::NetLoss::quantile_set();
    c.hidden = {32, 16};
    c.input_dropout = 0.1;
    c.hidden_dropout = 0.1;
    c.learning_rate = 0.01;
    c.batch_size = 64;
    c.max_epochs = 300;
    c.early_stop_patience = 20;
    c.early_stop_tolerance = 1e-5;
    return c;
  }();
};

struct EnsembleNet {
  AggregationLayout layout;
  neural::DenseNet net;
  neural::TrainTrace trace;
};

inline DenseMatrix design_matrix(const std::vector<AggregationRow>& rows, const AggregationLayout& layout) {
  DenseMatrix X(rows.size(), layout.width());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto x = row_features(rows[i], layout);
    std::copy(x.begin(), x.end(), X.row(i).begin());
  }
  return X;
}

/// Nine-output net on mean pinball over the levels; validation is the last cutoff days.
inline EnsembleNet train_ensemble(const AggregationSet& set, const EnsembleConfig& cfg = {}) {
  if (set.rows.empty()) throw DataError("aggregation set is empty");
  if (cfg.train.loss.kind != neural::NetLoss::Kind::QuantileSet) {
    throw ConfigError("the ensemble must be trained on the nine-level pinball loss");
  }
  const DenseMatrix X = design_matrix(set.rows, set.layout);
  std::vector<double> y;
  std::vector<int> key;
  for (const auto& r : set.rows) {
    y.push_back(r.truth);
    key.push_back(r.cutoff.days_since_epoch());
  }
  auto res = neural::train(X, y, cfg.train, key);
  return {set.layout, std::move(res.net), std::move(res.trace)};
}

/// Forecasts for the given rows (truth ignored); outputs clamped at zero and sorted.
inline std::vector<metrics::QuantileForecast> ensemble_predict(const EnsembleNet& ens,
                                                               const std::vector<AggregationRow>& rows,
                                                               const AggregationLayout& layout) {
  ens.layout.require_same(layout);
  if (ens.net.output_dim() != static_cast<int>(kNumQuantiles)) throw ConfigError("ensemble net must have 9 outputs");
  std::vector<metrics::QuantileForecast> out;
  if (rows.empty()) return out;
  const DenseMatrix X = design_matrix(rows, layout);
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(X.cols()), static_cast<Eigen::Index>(X.rows()));
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < X.cols(); ++j) cols(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = X(i, j);
  }
  const auto pred = neural::predict_rows(ens.net, cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    metrics::QuantileForecast f;
    f.fips = rows[i].fips;
    f.date = rows[i].target_date;
    for (std::size_t j = 0; j < kNumQuantiles; ++j) f.q[j] = pred[i][j];
    metrics::sanitize(f);
    out.push_back(f);
  }
  return out;
}

inline nlohmann::json to_json(const EnsembleNet& e) {
  return {{"format", "epiq.ensemble"},
          {"version", kAggregationLayoutVersion},
          {"layout",
           {{"version", e.layout.version},
            {"models", e.layout.models},
            {"states", e.layout.states},
            {"n_clusters", e.layout.n_clusters},
            {"forecast_len", e.layout.forecast_len}}},
          {"net", neural::to_json(e.net)}};
}

inline EnsembleNet ensemble_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "epiq.ensemble") throw DataError("expected an 'epiq.ensemble' dump");
  try {
    EnsembleNet e;
    const auto& l = j.at("layout");
    e.layout.version = l.at("version").get<int>();
    if (e.layout.version != kAggregationLayoutVersion) {
      throw ConfigError("ensemble layout version " + std::to_string(e.layout.version) + " is unsupported");
    }
    e.layout.models = l.at("models").get<std::vector<std::string>>();
    e.layout.states = l.at("states").get<std::vector<std::string>>();
    e.layout.n_clusters = l.at("n_clusters").get<int>();
    e.layout.forecast_len = l.at("forecast_len").get<int>();
    e.net = neural::net_from_json(j.at("net"));
    if (static_cast<std::size_t>(e.net.input_dim()) != e.layout.width()) {
      throw DataError("ensemble net input width does not match its layout");
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("ensemble dump: ") + ex.what());
  }
}

}  // namespace epiq::ensemble
