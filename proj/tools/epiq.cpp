// Command-line front end: one subcommand per pipeline stage plus `run` and `synth`.
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "epiq/epiq.hpp"

namespace {

using epiq::pipeline::RunConfig;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const epiq::ConfigError*>(&e)) return 1;
  if (dynamic_cast<const epiq::NumericalError*>(&e)) return 3;
  return 2;
}

void print_scores(const std::vector<epiq::metrics::ModelScores>& scores) {
  std::cout << "model,pinball,rmse\n";
  for (const auto& s : scores) {
    std::cout << s.model << ',' << epiq::csv::fmt(s.periods.front().pinball) << ','
              << epiq::csv::fmt(s.periods.front().rmse) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"epiq: county-level quantile forecasting of daily deaths"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file (key = value, TOML/INI)");
  epiq::pipeline::bind_options(app, cfg);

  auto* ingest = app.add_subcommand("ingest", "load truth and mobility up to the forecast start");
  auto* clean = app.add_subcommand("clean", "redistribute dumps and impute mobility");
  auto* cluster = app.add_subcommand("cluster", "dm/dt histogram features and k-means labels");
  auto* fit = app.add_subcommand("fit", "fit a model (or all) and forecast the forecast period");
  std::string fit_target = "all";
  fit->add_option("model", fit_target, "model name or 'all'")->capture_default_str();
  auto* aggregate = app.add_subcommand("aggregate", "build the ensemble aggregation set");
  auto* ens = app.add_subcommand("ensemble", "train the ensemble on the aggregation set");
  auto* predict = app.add_subcommand("predict", "ensemble forecast from the fitted models' forecasts");
  auto* evaluate = app.add_subcommand("evaluate", "score forecasts (pinball, RMSE)");
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic world (truth, mobility, statics)");
  auto* plot = app.add_subcommand("plotdata", "per-county plot tables");
  auto* run = app.add_subcommand("run", "the whole pipeline");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    epiq::pipeline::finalize(cfg);
    if (synth->parsed()) {
      const auto world = epiq::pipeline::make_world(cfg.synth);
      const auto files = epiq::pipeline::write_synthetic(cfg.out, world, cfg.synth_days);
      std::cout << "wrote " << files.truth.string() << ", " << files.mobility.string() << ", "
                << files.statics.string() << ", " << files.world.string() << '\n';
      return 0;
    }
    cfg.validate();
    if (ingest->parsed()) epiq::pipeline::stage_ingest(cfg);
    if (clean->parsed()) epiq::pipeline::stage_clean(cfg);
    if (cluster->parsed()) epiq::pipeline::stage_cluster(cfg);
    if (fit->parsed()) {
      if (fit_target == "all") {
        for (const auto& m : cfg.models) epiq::pipeline::stage_fit(cfg, m);
      } else {
        epiq::pipeline::stage_fit(cfg, fit_target);
      }
    }
    if (aggregate->parsed()) {
      const auto set = epiq::pipeline::stage_aggregate(cfg);
      std::cout << "aggregation rows: " << set.rows.size() << " (coverage " << set.coverage.coverage() << ")\n";
    }
    if (ens->parsed()) epiq::pipeline::stage_ensemble(cfg);
    if (predict->parsed()) epiq::pipeline::stage_predict(cfg);
    if (evaluate->parsed()) print_scores(epiq::pipeline::stage_evaluate(cfg));
    if (plot->parsed()) epiq::pipeline::stage_plotdata(cfg);
    if (run->parsed()) {
      const auto res = epiq::pipeline::run(cfg);
      if (res.evaluated) print_scores(res.scores);
    }
    if (!run->parsed()) epiq::pipeline::write_manifest(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
