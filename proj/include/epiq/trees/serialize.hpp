#pragma once

#include <string>

#include <json.hpp>

#include "epiq/common/error.hpp"
#include "epiq/common/json_io.hpp"
#include "epiq/trees/forest.hpp"
#include "epiq/trees/gbdt.hpp"

namespace epiq::trees {

inline constexpr int kTreeFormatVersion = 1;

inline nlohmann::json to_json(const RegressionTree& t) {
  nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                 left = nlohmann::json::array(), right = nlohmann::json::array(),
                 value = nlohmann::json::array(), count = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
    count.push_back(n.n_samples);
  }
  return {{"max_depth", t.max_depth}, {"min_samples_leaf", t.min_samples_leaf},
          {"n_features", t.n_features}, {"feature", feature}, {"threshold", threshold},
          {"left", left}, {"right", right}, {"value", value}, {"n_samples", count}};
}

inline RegressionTree tree_from_json(const nlohmann::json& j) {
  RegressionTree t;
  t.max_depth = j.at("max_depth").get<int>();
  t.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  t.n_features = j.at("n_features").get<std::size_t>();
  const auto& f = j.at("feature");
  t.nodes.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto& n = t.nodes[i];
    n.feature = f[i].get<int>();
    n.threshold = j.at("threshold")[i].get<double>();
    n.left = j.at("left")[i].get<int>();
    n.right = j.at("right")[i].get<int>();
    n.value = j.at("value")[i].get<double>();
    n.n_samples = j.at("n_samples")[i].get<std::size_t>();
    const auto limit = static_cast<int>(f.size());
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= limit || n.right >= limit)) {
      throw DataError("tree dump: node " + std::to_string(i) + " has invalid children");
    }
  }
  return t;
}

inline void check_header(const nlohmann::json& j, const std::string& format) {
  if (j.value("format", std::string{}) != format) throw DataError("expected a '" + format + "' dump");
  if (j.value("version", -1) != kTreeFormatVersion) {
    throw DataError(format + " dump version " + std::to_string(j.value("version", -1)) + " is unsupported");
  }
}

inline nlohmann::json to_json(const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(to_json(t));
  return {{"format", "epiq.forest"}, {"version", kTreeFormatVersion}, {"seeds", m.seeds},
          {"feature_fraction", m.feature_fraction}, {"bootstrap", m.bootstrap}, {"trees", trees}};
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
  check_header(j, "epiq.forest");
  ForestModel m;
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.feature_fraction = j.at("feature_fraction").get<double>();
  m.bootstrap = j.at("bootstrap").get<bool>();
  for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
  return m;
}

inline nlohmann::json to_json(const GbdtModel& m) {
  nlohmann::json quantiles = nlohmann::json::array();
  for (std::size_t q = 0; q < kNumQuantiles; ++q) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : m.runs[q]) {
      nlohmann::json trees = nlohmann::json::array();
      for (const auto& t : r.trees) trees.push_back(to_json(t));
      runs.push_back({{"seed", r.seed}, {"base_score", r.base_score}, {"trees", trees}});
    }
    quantiles.push_back({{"level", kQuantileLevels[q]}, {"runs", runs}});
  }
  return {{"format", "epiq.gbdt"}, {"version", kTreeFormatVersion}, {"fips", m.fips},
          {"learning_rate", m.learning_rate}, {"n_rounds", m.n_rounds}, {"fallback", m.fallback},
          {"quantiles", quantiles}};
}

inline GbdtModel gbdt_from_json(const nlohmann::json& j) {
  check_header(j, "epiq.gbdt");
  GbdtModel m;
  m.fips = j.at("fips").get<std::string>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.n_rounds = j.at("n_rounds").get<int>();
  m.fallback = j.at("fallback").get<bool>();
  const auto& qs = j.at("quantiles");
  if (qs.size() != kNumQuantiles) throw DataError("GBDT dump must hold 9 quantile levels");
  for (std::size_t q = 0; q < kNumQuantiles; ++q) {
    for (const auto& r : qs[q].at("runs")) {
      BoostRun run;
      run.seed = r.at("seed").get<std::uint64_t>();
      run.base_score = r.at("base_score").get<double>();
      for (const auto& t : r.at("trees")) run.trees.push_back(tree_from_json(t));
      m.runs[q].push_back(std::move(run));
    }
  }
  return m;
}

}  // namespace epiq::trees
