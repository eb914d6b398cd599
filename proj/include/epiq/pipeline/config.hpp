#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epiq/common/date.hpp"
#include "epiq/common/error.hpp"
#include "epiq/data/cleaning.hpp"
#include "epiq/data/features.hpp"
#include "epiq/ensemble/ensemble.hpp"
#include "epiq/pipeline/models.hpp"
#include "epiq/pipeline/synthetic.hpp"

namespace epiq::pipeline {

inline constexpr int kConfigVersion = 1;

struct RunConfig {
  int config_version = kConfigVersion;
  std::filesystem::path truth;
  std::filesystem::path mobility;
  std::filesystem::path statics;
  /// Truth used for scoring; defaults to `truth`.
  std::filesystem::path eval_truth;
  /// First forecast day (YYYY-MM-DD); empty means the day after the last truth day.
  std::string forecast_start;
  int forecast_len = 14;
  std::vector<int> lags{15, 16, 17, 18, 19, 20, 21};
  std::vector<std::string> models = model_names();
  bool ensemble = true;
  int aggregation_days = 28;
  double min_coverage = 0.8;
  int n_clusters = 6;
  double cluster_case_threshold = 10.0;
  data::DumpConfig dumps{};
  ModelsConfig model{};
  ensemble::EnsembleConfig ens{};
  std::vector<double> nn_grid_lr;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";

  WorldSpec synth{};
  int synth_days = 134;
  std::string synth_start = "2020-03-01";

  /// Counties for plot files; empty means all.
  std::vector<std::string> plot_fips;

  void validate() const {
    if (config_version != kConfigVersion) {
      throw ConfigError("config_version " + std::to_string(config_version) + " is not supported (expected " +
                        std::to_string(kConfigVersion) + ")");
    }
    data::validate_lags(lags, forecast_len);
    const auto& known = model_names();
    std::set<std::string> seen;
    for (const auto& m : models) {
      if (std::find(known.begin(), known.end(), m) == known.end()) throw ConfigError("unknown model '" + m + "'");
      if (!seen.insert(m).second) throw ConfigError("model '" + m + "' listed twice");
    }
    if (aggregation_days < 1) throw ConfigError("aggregation_days must be >= 1");
    if (!(min_coverage >= 0.0 && min_coverage <= 1.0)) throw ConfigError("min_coverage must lie in [0, 1]");
    if (n_clusters < 1) throw ConfigError("n_clusters must be >= 1");
    if (!forecast_start.empty()) (void)parse_date(forecast_start);
    ens.train.validate();
    model.nn.train.validate();
    model.qnn.validate();
  }

  static Date parse_date(const std::string& s) {
    try {
      return Date::parse(s);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
};

/// Registers every config key as a long option; config files use the same names
/// (`key = value`, TOML or INI syntax) and command-line flags override them.
inline void bind_options(CLI::App& app, RunConfig& c) {
  auto& m = c.model;
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--config_version", c.config_version, "config schema version")->capture_default_str();
  app.add_option("--truth", c.truth, "cumulative deaths/cases CSV (date,county,state,fips,cases,deaths)");
  app.add_option("--mobility", c.mobility, "mobility CSV (date,fips,m50_index)");
  app.add_option("--statics", c.statics, "static county features CSV (fips,...)");
  app.add_option("--eval_truth", c.eval_truth, "truth CSV used for scoring (default: --truth)");
  app.add_option("--forecast_start", c.forecast_start, "first forecast day, YYYY-MM-DD");
  app.add_option("--forecast_len", c.forecast_len)->capture_default_str();
  app.add_option("--lags", c.lags)->capture_default_str();
  app.add_option("--models", c.models)->capture_default_str();
  app.add_option("--ensemble", c.ensemble, "train and apply the ensemble")->capture_default_str();
  app.add_option("--aggregation_days", c.aggregation_days)->capture_default_str();
  app.add_option("--min_coverage", c.min_coverage)->capture_default_str();
  app.add_option("--n_clusters", c.n_clusters)->capture_default_str();
  app.add_option("--cluster_case_threshold", c.cluster_case_threshold)->capture_default_str();
  app.add_option("--dump_abs_min", c.dumps.abs_min)->capture_default_str();
  app.add_option("--dump_ratio", c.dumps.ratio)->capture_default_str();
  app.add_option("--dump_trailing_days", c.dumps.trailing_days)->capture_default_str();

  app.add_option("--phi_window", m.seirqd.converter.phi.window)->capture_default_str();
  app.add_option("--phi_min", m.seirqd.converter.phi.phi_min)->capture_default_str();
  app.add_option("--phi_max", m.seirqd.converter.phi.phi_max)->capture_default_str();

  app.add_option("--seirqd_restarts", m.seirqd.fit.restarts)->capture_default_str();
  app.add_option("--seirqd_max_iters", m.seirqd.fit.max_iters)->capture_default_str();
  app.add_option("--seirqd_severity_threshold", m.seirqd.fit.severity_threshold)->capture_default_str();
  app.add_option("--seirqd_default_population", m.seirqd.default_population)->capture_default_str();
  app.add_option("--seirqd_warm_start", m.seirqd.warm_start)->capture_default_str();

  app.add_option("--gp_window", m.gp.gp.window, "trailing days for the GP fit, 0 = all")->capture_default_str();
  app.add_option("--gp_restarts", m.gp.gp.optimize.restarts)->capture_default_str();
  app.add_option("--gp_max_iters", m.gp.gp.optimize.bfgs.max_iters)->capture_default_str();

  app.add_option("--forest_trees", m.forest.forest.n_trees)->capture_default_str();
  app.add_option("--forest_depth", m.forest.forest.tree.max_depth)->capture_default_str();
  app.add_option("--forest_min_leaf", m.forest.forest.tree.min_samples_leaf)->capture_default_str();
  app.add_option("--forest_feature_fraction", m.forest.forest.tree.feature_fraction)->capture_default_str();
  app.add_option("--forest_clip", m.forest.clip.multiplier)->capture_default_str();
  app.add_option("--forest_moving_window", m.forest_moving.window)->capture_default_str();
  app.add_option("--forest_moving_trees", m.forest_moving.forest.n_trees)->capture_default_str();

  app.add_option("--gbdt_rounds", m.gbdt.n_rounds)->capture_default_str();
  app.add_option("--gbdt_lr", m.gbdt.learning_rate)->capture_default_str();
  app.add_option("--gbdt_depth", m.gbdt.max_depth)->capture_default_str();
  app.add_option("--gbdt_min_leaf", m.gbdt.min_samples_leaf)->capture_default_str();
  app.add_option("--gbdt_runs", m.gbdt.n_runs)->capture_default_str();
  app.add_option("--gbdt_subsample", m.gbdt.subsample)->capture_default_str();

  auto net_opts = [&app](const std::string& p, neural::TrainConfig& t) {
    app.add_option("--" + p + "_lr", t.learning_rate)->capture_default_str();
    app.add_option("--" + p + "_batch", t.batch_size)->capture_default_str();
    app.add_option("--" + p + "_epochs", t.max_epochs)->capture_default_str();
    app.add_option("--" + p + "_patience", t.early_stop_patience)->capture_default_str();
    app.add_option("--" + p + "_tolerance", t.early_stop_tolerance)->capture_default_str();
    app.add_option("--" + p + "_input_dropout", t.input_dropout)->capture_default_str();
    app.add_option("--" + p + "_hidden_dropout", t.hidden_dropout)->capture_default_str();
    app.add_option("--" + p + "_hidden", t.hidden)->capture_default_str();
  };
  net_opts("nn", m.nn.train);
  net_opts("qnn", m.qnn);
  net_opts("ens", c.ens.train);
  app.add_option("--nn_grid_lr", c.nn_grid_lr, "learning rates for the nn grid search (empty: no search)");

  app.add_option("--seed", c.seed, "master seed")->capture_default_str();
  app.add_option("--out", c.out, "output directory")->capture_default_str();

  app.add_option("--synth_counties", c.synth.n_counties)->capture_default_str();
  app.add_option("--synth_states", c.synth.n_states)->capture_default_str();
  app.add_option("--synth_days", c.synth_days)->capture_default_str();
  app.add_option("--synth_start", c.synth_start)->capture_default_str();
  app.add_option("--synth_phi", c.synth.noise.phi)->capture_default_str();
  app.add_option("--synth_dump_probability", c.synth.noise.dump_probability)->capture_default_str();
  app.add_option("--synth_mobility_missing", c.synth.noise.mobility_missing)->capture_default_str();

  app.add_option("--plot_fips", c.plot_fips, "counties for plot files (default: all)");
}

/// Copies shared settings into the per-model configs after parsing.
inline void finalize(RunConfig& c) {
  auto& m = c.model;
  m.gp.converter = m.seirqd.converter;
  m.nn.converter = m.seirqd.converter;
  m.forest_moving.forest.tree = m.forest.forest.tree;
  m.forest_moving.clip = m.forest.clip;
  m.nn.train.grid.reset();
  if (!c.nn_grid_lr.empty()) m.nn.train.grid = neural::HyperGrid{c.nn_grid_lr, {}, {}, {}};
  c.ens.train.loss = neural::NetLoss::quantile_set();
  c.synth.seed = c.seed;
  c.synth.start = RunConfig::parse_date(c.synth_start);
  if (c.eval_truth.empty()) c.eval_truth = c.truth;
}

/// Parses a config file alone (no command line).
inline RunConfig load_config(const std::filesystem::path& path) {
  RunConfig c;
  CLI::App app{"epiq config"};
  bind_options(app, c);
  app.set_config("--config", path.string(), "config file", true);
  try {
    app.parse(std::vector<std::string>{});
  } catch (const CLI::ParseError& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  finalize(c);
  c.validate();
  return c;
}

/// Resolved configuration as config-file text; the manifest hashes this.
inline std::string config_to_text(const RunConfig& c) {
  RunConfig copy = c;
  CLI::App app{"epiq config"};
  bind_options(app, copy);
  app.parse(std::vector<std::string>{});
  return app.config_to_str(true, false);
}

}  // namespace epiq::pipeline
