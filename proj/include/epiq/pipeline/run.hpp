#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "epiq/clustering/dmdt.hpp"
#include "epiq/clustering/kmeans.hpp"
#include "epiq/common/csv.hpp"
#include "epiq/common/error.hpp"
#include "epiq/common/hash.hpp"
#include "epiq/common/json_io.hpp"
#include "epiq/data/cleaning.hpp"
#include "epiq/data/features.hpp"
#include "epiq/data/io.hpp"
#include "epiq/ensemble/aggregation.hpp"
#include "epiq/ensemble/ensemble.hpp"
#include "epiq/metrics/evaluate.hpp"
#include "epiq/metrics/forecast.hpp"
#include "epiq/pipeline/config.hpp"
#include "epiq/pipeline/models.hpp"
#include "epiq/pipeline/synthetic.hpp"

namespace epiq::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

/// Artifact locations under the output directory.
struct Paths {
  std::filesystem::path root;
  [[nodiscard]] std::filesystem::path ingested() const { return root / "ingest" / "series.csv"; }
  [[nodiscard]] std::filesystem::path cleaned() const { return root / "clean" / "series.csv"; }
  [[nodiscard]] std::filesystem::path clusters() const { return root / "cluster" / "clusters.csv"; }
  [[nodiscard]] std::filesystem::path centroids() const { return root / "cluster" / "centroids.csv"; }
  [[nodiscard]] std::filesystem::path model_dir(const std::string& m) const { return root / "models" / m; }
  [[nodiscard]] std::filesystem::path model_forecast(const std::string& m) const {
    return model_dir(m) / "forecast.csv";
  }
  [[nodiscard]] std::filesystem::path aggregation() const { return root / "aggregate" / "aggregation.csv"; }
  [[nodiscard]] std::filesystem::path ensemble_model() const { return root / "ensemble" / "ensemble.json"; }
  [[nodiscard]] std::filesystem::path ensemble_forecast() const { return root / "forecasts" / "ensemble.csv"; }
  [[nodiscard]] std::filesystem::path table() const { return root / "evaluate" / "table.csv"; }
  [[nodiscard]] std::filesystem::path county_table() const { return root / "evaluate" / "per_county.csv"; }
  [[nodiscard]] std::filesystem::path plot_dir() const { return root / "plotdata"; }
  [[nodiscard]] std::filesystem::path manifest() const { return root / "manifest.json"; }
};

/// Reruns `fn`, prefixing any failure with the stage name while keeping its category.
template <class F>
auto in_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("stage '" + stage + "': " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("stage '" + stage + "': " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage '" + stage + "': " + e.what());
  } catch (const CLI::Error&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("stage '" + stage + "': " + e.what());
  }
}

/// Training data ends the day before the forecast period.
inline Date forecast_start(const RunConfig& cfg, const std::vector<data::CountySeries>& series) {
  if (!cfg.forecast_start.empty()) return RunConfig::parse_date(cfg.forecast_start);
  Date last{0};
  for (const auto& s : series) last = std::max(last, s.last_date());
  return last + 1;
}

inline DateRange forecast_period(const RunConfig& cfg, const std::vector<data::CountySeries>& series) {
  const Date start = forecast_start(cfg, series);
  return {start, start + cfg.forecast_len - 1};
}

/// Aggregation cutoffs: the last `aggregation_days` days whose whole forecast window
/// still lies inside the training data.
inline std::vector<Date> aggregation_cutoffs(const RunConfig& cfg, Date train_end) {
  std::vector<Date> out;
  const Date last = train_end - cfg.forecast_len;
  for (int k = cfg.aggregation_days - 1; k >= 0; --k) out.push_back(last - k);
  return out;
}

// ---------------------------------------------------------------- stages

/// Raw daily series with mobility attached, up to and including the last training day.
inline std::vector<data::CountySeries> stage_ingest(const RunConfig& cfg) {
  return in_stage("ingest", [&] {
    if (cfg.truth.empty()) throw ConfigError("no truth file configured");
    data::IngestReport rep;
    auto series = data::load_ground_truth(cfg.truth, &rep);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    if (series.empty()) throw DataError("truth file has no counties");
    if (!cfg.mobility.empty()) data::attach_mobility(series, cfg.mobility);
    const Date train_end = forecast_start(cfg, series) - 1;
    for (auto& s : series) s = s.truncated(train_end);
    std::erase_if(series, [](const data::CountySeries& s) { return s.size() == 0; });
    data::write_cleaned(Paths{cfg.out}.ingested(), series);
    return series;
  });
}

inline std::map<std::string, std::string> county_states(const RunConfig& cfg) {
  // State names come from the truth file; the cleaned CSV does not carry them.
  std::map<std::string, std::string> out;
  for (const auto& s : data::load_ground_truth(cfg.truth)) out[s.fips] = s.state;
  return out;
}

inline std::vector<data::CountySeries> load_stage_series(const std::filesystem::path& path,
                                                         const std::map<std::string, std::string>& states) {
  return data::load_cleaned(path, states);
}

inline std::vector<data::CountySeries> stage_clean(const RunConfig& cfg) {
  return in_stage("clean", [&] {
    const auto raw = load_stage_series(Paths{cfg.out}.ingested(), county_states(cfg));
    auto cleaned = data::clean_all(raw, cfg.dumps);
    data::write_cleaned(Paths{cfg.out}.cleaned(), cleaned);
    return cleaned;
  });
}

inline std::vector<data::CountySeries> cleaned_series(const RunConfig& cfg) {
  return load_stage_series(Paths{cfg.out}.cleaned(), county_states(cfg));
}

inline clustering::ClusterAssignment stage_cluster(const RunConfig& cfg) {
  return in_stage("cluster", [&] {
    const auto series = cleaned_series(cfg);
    const auto features = clustering::county_features(series, cfg.cluster_case_threshold);
    clustering::KMeansConfig kc;
    kc.k = cfg.n_clusters;
    kc.seed = named_seed(cfg.seed, "cluster");
    auto a = clustering::kmeans(features, kc);
    if (a.k_reduced) std::cerr << "warning: k reduced to " << a.centroids.size() << " distinct feature vectors\n";
    clustering::write_assignments(Paths{cfg.out}.clusters(), a);
    clustering::write_centroids(Paths{cfg.out}.centroids(), a);
    return a;
  });
}

inline data::StaticTable load_statics(const RunConfig& cfg) {
  return cfg.statics.empty() ? data::StaticTable{} : data::load_static_features(cfg.statics);
}

inline ModelData model_data(const RunConfig& cfg) {
  ModelData d;
  d.series = cleaned_series(cfg);
  d.statics = load_statics(cfg);
  d.clusters = clustering::load_assignments(Paths{cfg.out}.clusters());
  d.layout = data::make_layout(d.series, d.statics, cfg.lags, cfg.forecast_len, cfg.n_clusters);
  return d;
}

/// Fits the named model on all training data and writes its forecast for the
/// forecast period plus its diagnostics.
inline std::vector<metrics::QuantileForecast> stage_fit(const RunConfig& cfg, const std::string& model) {
  return in_stage("fit " + model, [&] {
    const auto d = model_data(cfg);
    const Date train_end = forecast_start(cfg, d.series) - 1;
    auto m = make_model(model, cfg.model, cfg.seed);
    auto fc = m->forecast(d, train_end);
    const Paths p{cfg.out};
    metrics::write_forecasts(p.model_forecast(model), fc);
    m->save_artifacts(p.model_dir(model));
    return fc;
  });
}

inline std::map<std::string, ensemble::CountyInfo> county_info(const ModelData& d) {
  std::map<std::string, ensemble::CountyInfo> out;
  for (const auto& s : d.series) {
    auto it = d.clusters.find(s.fips);
    out[s.fips] = {s.state, it == d.clusters.end() ? 0 : it->second};
  }
  return out;
}

inline ensemble::AggregationSet stage_aggregate(const RunConfig& cfg) {
  return in_stage("aggregate", [&] {
    const auto d = model_data(cfg);
    const Date train_end = forecast_start(cfg, d.series) - 1;
    std::vector<std::unique_ptr<ForecastModel>> owned;
    std::vector<ensemble::RegisteredModel> reg;
    for (const auto& name : cfg.models) {
      owned.push_back(make_model(name, cfg.model, cfg.seed));
      ForecastModel* m = owned.back().get();
      reg.push_back({name, [m, &d](Date c) { return m->forecast(d, c); }});
    }
    auto set = ensemble::build_aggregation_set(reg, d.series, county_info(d), aggregation_cutoffs(cfg, train_end),
                                               cfg.forecast_len, cfg.n_clusters, cfg.min_coverage);
    ensemble::write_aggregation_set(Paths{cfg.out}.aggregation(), set);
    return set;
  });
}

inline ensemble::EnsembleNet stage_ensemble(const RunConfig& cfg) {
  return in_stage("ensemble", [&] {
    const auto set = ensemble::read_aggregation_set(Paths{cfg.out}.aggregation());
    ensemble::EnsembleConfig ec = cfg.ens;
    ec.train.seed = named_seed(cfg.seed, "ensemble");
    auto net = ensemble::train_ensemble(set, ec);
    save_json(Paths{cfg.out}.ensemble_model(), ensemble::to_json(net));
    return net;
  });
}

/// Ensemble forecast for the forecast period from the models' stored forecasts.
inline std::vector<metrics::QuantileForecast> stage_predict(const RunConfig& cfg) {
  return in_stage("predict", [&] {
    const Paths p{cfg.out};
    const auto ens = ensemble::ensemble_from_json(load_json(p.ensemble_model()));
    const auto d = model_data(cfg);
    const Date train_end = forecast_start(cfg, d.series) - 1;
    ensemble::AggregationLayout layout = ens.layout;
    std::map<std::pair<std::string, Date>, std::vector<QuantileVector>> cells;
    for (std::size_t m = 0; m < layout.models.size(); ++m) {
      for (const auto& f : metrics::read_forecasts(p.model_forecast(layout.models[m]))) {
        auto& v = cells[{f.fips, f.date}];
        if (v.size() == m) v.push_back(f.q);
      }
    }
    const auto info = county_info(d);
    std::set<std::string> states;
    for (const auto& [f, ci] : info) states.insert(ci.state);
    ensemble::AggregationLayout current = layout;
    current.states.assign(states.begin(), states.end());
    current.forecast_len = cfg.forecast_len;
    current.n_clusters = cfg.n_clusters;
    std::vector<ensemble::AggregationRow> rows;
    for (const auto& s : d.series) {
      for (int h = 1; h <= cfg.forecast_len; ++h) {
        auto it = cells.find({s.fips, train_end + h});
        if (it == cells.end() || it->second.size() != layout.models.size()) {
          throw DataError("model forecasts missing for " + s.fips + " on " + (train_end + h).str());
        }
        ensemble::AggregationRow r;
        r.fips = s.fips;
        r.cutoff = train_end;
        r.target_date = train_end + h;
        r.days_into_forecast = h;
        r.state = info.at(s.fips).state;
        r.cluster = info.at(s.fips).cluster;
        r.model_q = it->second;
        rows.push_back(std::move(r));
      }
    }
    auto fc = ensemble::ensemble_predict(ens, rows, current);
    metrics::write_forecasts(p.ensemble_forecast(), fc);
    return fc;
  });
}

/// Scores every available forecast file plus the all-zeros baseline.
inline std::vector<metrics::ModelScores> stage_evaluate(const RunConfig& cfg) {
  return in_stage("evaluate", [&] {
    const Paths p{cfg.out};
    const auto truth = data::load_ground_truth(cfg.eval_truth.empty() ? cfg.truth : cfg.eval_truth);
    const auto train = cleaned_series(cfg);
    const DateRange period = forecast_period(cfg, train);
    std::vector<std::pair<std::string, std::filesystem::path>> files;
    for (const auto& m : cfg.models) files.emplace_back(m, p.model_forecast(m));
    if (cfg.ensemble) files.emplace_back("ensemble", p.ensemble_forecast());
    std::vector<metrics::ModelScores> scores;
    for (const auto& [name, path] : files) {
      if (!std::filesystem::exists(path)) {
        std::cerr << "warning: no forecast for " << name << " at " << path.string() << '\n';
        continue;
      }
      scores.push_back({name, {metrics::evaluate(metrics::read_forecasts(path), truth, period)}});
    }
    std::vector<metrics::QuantileForecast> zeros;
    for (const auto& s : train) {
      for (Date dd = period.first; dd <= period.last; dd += 1) zeros.push_back({s.fips, dd, QuantileVector{}});
    }
    scores.push_back({"zeros", {metrics::evaluate(zeros, truth, period)}});
    metrics::write_table_report(p.table(), scores);
    metrics::write_county_report(p.county_table(), scores);
    return scores;
  });
}

/// Per-county plot table: the last 10 training days (truth only) followed by the
/// forecast days with all nine bands; truth is blank where unknown.
inline void emit_plotdata(const std::filesystem::path& dir, const std::vector<metrics::QuantileForecast>& forecasts,
                          const std::vector<data::CountySeries>& history,
                          const std::vector<data::CountySeries>& truth, const std::vector<std::string>& fips_list,
                          int history_days = 10) {
  std::map<std::string, std::vector<const metrics::QuantileForecast*>> by_fips;
  for (const auto& f : forecasts) by_fips[f.fips].push_back(&f);
  std::map<std::string, const data::CountySeries*> hist, tru;
  for (const auto& s : history) hist[s.fips] = &s;
  for (const auto& s : truth) tru[s.fips] = &s;
  std::vector<std::string> wanted = fips_list;
  if (wanted.empty()) {
    for (const auto& [f, v] : by_fips) wanted.push_back(f);
  }
  for (const auto& fips : wanted) {
    auto fit = by_fips.find(fips);
    auto hit = hist.find(fips);
    if (fit == by_fips.end() || hit == hist.end()) {
      std::cerr << "warning: no forecast or history for " << fips << ", skipped\n";
      continue;
    }
    auto fc = fit->second;
    std::sort(fc.begin(), fc.end(), [](const auto* a, const auto* b) { return a->date < b->date; });
    const auto& h = *hit->second;
    const data::CountySeries* t = tru.contains(fips) ? tru[fips] : nullptr;
    auto truth_at = [&](Date d) -> std::string {
      if (t) {
        if (auto i = t->index_of(d)) return csv::fmt(t->daily_deaths[*i]);
      }
      return "";
    };
    csv::Writer w(dir / (fips + ".csv"));
    std::vector<std::string> header{"date", "kind", "truth"};
    for (const auto& c : metrics::forecast_header()) {
      if (c.size() == 3 && c[0] == 'q') header.push_back(c);
    }
    w.row(header);
    const std::size_t n = h.size();
    const std::size_t first = n > static_cast<std::size_t>(history_days) ? n - static_cast<std::size_t>(history_days) : 0;
    for (std::size_t i = first; i < n; ++i) {
      std::vector<std::string> r{h.date(i).str(), "history", csv::fmt(h.daily_deaths[i])};
      r.resize(header.size());
      w.row(r);
    }
    for (const auto* f : fc) {
      std::vector<std::string> r{f->date.str(), "forecast", truth_at(f->date)};
      for (double v : f->q) r.push_back(csv::fmt(v));
      w.row(r);
    }
  }
}

inline void stage_plotdata(const RunConfig& cfg) {
  in_stage("plotdata", [&] {
    const Paths p{cfg.out};
    const auto path = cfg.ensemble ? p.ensemble_forecast() : p.model_forecast(cfg.models.front());
    const auto truth = data::load_ground_truth(cfg.eval_truth.empty() ? cfg.truth : cfg.eval_truth);
    emit_plotdata(p.plot_dir(), metrics::read_forecasts(path), cleaned_series(cfg), truth, cfg.plot_fips);
  });
}

/// Lists every file under the output directory (except the manifest) with its
/// SHA-256, plus the resolved-config hash, seed and tool version.
inline void write_manifest(const RunConfig& cfg) {
  const Paths p{cfg.out};
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(p.root)) {
    if (e.is_regular_file() && e.path() != p.manifest()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& f : files) {
    artifacts.push_back({{"path", std::filesystem::relative(f, p.root).generic_string()}, {"sha256", sha256_file(f)}});
  }
  const std::string text = config_to_text(cfg);
  save_json(p.manifest(), {{"format", "epiq.manifest"},
                           {"version", 1},
                           {"tool_version", kToolVersion},
                           {"config_sha256", sha256_hex(text)},
                           {"seed", cfg.seed},
                           {"models", cfg.models},
                           {"artifacts", artifacts}});
}

struct RunResult {
  std::vector<metrics::ModelScores> scores;
  bool evaluated = false;
};

/// Whole pipeline. Evaluation runs when the scoring truth covers the forecast period.
inline RunResult run(const RunConfig& cfg) {
  cfg.validate();
  const auto raw = stage_ingest(cfg);
  stage_clean(cfg);
  stage_cluster(cfg);
  for (const auto& m : cfg.models) stage_fit(cfg, m);
  if (cfg.ensemble) {
    stage_aggregate(cfg);
    stage_ensemble(cfg);
    stage_predict(cfg);
  }
  RunResult res;
  const auto truth = data::load_ground_truth(cfg.eval_truth.empty() ? cfg.truth : cfg.eval_truth);
  const DateRange period = forecast_period(cfg, raw);
  const bool covered = std::any_of(truth.begin(), truth.end(), [&](const auto& s) { return s.last_date() >= period.last; });
  if (covered) {
    res.scores = stage_evaluate(cfg);
    res.evaluated = true;
  }
  stage_plotdata(cfg);
  write_manifest(cfg);
  return res;
}

}  // namespace epiq::pipeline
