#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "epiq/common/date.hpp"
#include "epiq/common/error.hpp"
#include "epiq/common/json_io.hpp"
#include "epiq/common/matrix.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/data/features.hpp"
#include "epiq/data/series.hpp"
#include "epiq/gp/gp.hpp"
#include "epiq/metrics/forecast.hpp"
#include "epiq/neural/serialize.hpp"
#include "epiq/neural/train.hpp"
#include "epiq/quantilegen/negbin.hpp"
#include "epiq/seirqd/fit.hpp"
#include "epiq/trees/forest.hpp"
#include "epiq/trees/gbdt.hpp"
#include "epiq/trees/serialize.hpp"

namespace epiq::pipeline {

/// Everything a model may look at. Series are cleaned; models truncate them at the
/// cutoff they are asked to forecast from.
struct ModelData {
  std::vector<data::CountySeries> series;
  data::StaticTable statics;
  std::map<std::string, int> clusters;
  data::FeatureLayout layout;
};

/// Uniform model contract: forecasts for the forecast_len days after `cutoff`, one
/// sanitized 9-quantile vector per county and day, using data up to the cutoff only.
class ForecastModel {
 public:
  virtual ~ForecastModel() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  virtual std::vector<metrics::QuantileForecast> forecast(const ModelData& data, Date cutoff) = 0;
  /// Diagnostics of the most recent forecast() call.
  virtual void save_artifacts(const std::filesystem::path& /*dir*/) const {}
};

inline std::vector<data::CountySeries> truncate_all(const std::vector<data::CountySeries>& series, Date cutoff) {
  std::vector<data::CountySeries> out;
  out.reserve(series.size());
  for (const auto& s : series) out.push_back(s.truncated(cutoff));
  return out;
}

inline double county_max(const data::CountySeries& s) {
  double m = 0.0;
  for (double v : s.daily_deaths) m = std::max(m, v);
  return m;
}

/// Adds zero forecasts for any (county, day) a model could not produce, e.g. when a
/// county's history is shorter than the largest lag.
inline void complete_forecasts(std::vector<metrics::QuantileForecast>& fc, const std::vector<data::CountySeries>& series,
                               Date cutoff, int forecast_len) {
  std::map<std::pair<std::string, Date>, bool> have;
  for (const auto& f : fc) have[{f.fips, f.date}] = true;
  for (const auto& s : series) {
    for (int h = 1; h <= forecast_len; ++h) {
      if (!have.contains({s.fips, cutoff + h})) fc.push_back({s.fips, cutoff + h, QuantileVector{}});
    }
  }
  for (auto& f : fc) metrics::sanitize(f);
  std::sort(fc.begin(), fc.end(), [](const auto& a, const auto& b) {
    return a.fips != b.fips ? a.fips < b.fips : a.date < b.date;
  });
}

/// Feature rows in matrix form.
struct RowMatrix {
  DenseMatrix X;
  std::vector<double> y;
  std::vector<int> day;
  std::vector<std::string> fips;
  std::vector<Date> dates;
};

inline RowMatrix to_matrix(const std::vector<data::FeatureRow>& rows, const data::FeatureBlocks& blocks) {
  RowMatrix m;
  std::vector<std::vector<double>> xs;
  xs.reserve(rows.size());
  for (const auto& r : rows) {
    xs.push_back(data::dense_features(r, blocks));
    m.y.push_back(r.target.value_or(0.0));
    m.day.push_back(r.target_date.days_since_epoch());
    m.fips.push_back(r.fips);
    m.dates.push_back(r.target_date);
  }
  m.X = DenseMatrix::from_rows(xs);
  return m;
}

// ---------------------------------------------------------------- SEIR-QD

struct SeirModelConfig {
  seirqd::FitConfig fit{};
  /// Used when the static table has no population column.
  double default_population = 1e5;
  /// Start each county's fit from its fit at the previous cutoff.
  bool warm_start = true;
  quantilegen::ConverterConfig converter{};
  std::uint64_t seed = 0;
};

class SeirModel final : public ForecastModel {
 public:
  explicit SeirModel(SeirModelConfig cfg) : cfg_(std::move(cfg)) {}
  [[nodiscard]] std::string name() const override { return "seirqd"; }

  std::vector<metrics::QuantileForecast> forecast(const ModelData& data, Date cutoff) override {
    records_.clear();
    std::vector<metrics::QuantileForecast> out;
    const auto series = truncate_all(data.series, cutoff);
    const int fl = data.layout.forecast_len;
    for (const auto& s : series) {
      // Fit from the first day with a confirmed case.
      std::size_t first = 0;
      while (first < s.size() && s.daily_cases[first] <= 0.0) ++first;
      data::CountySeries fit_series = s;
      fit_series.daily_deaths.assign(s.daily_deaths.begin() + static_cast<std::ptrdiff_t>(first), s.daily_deaths.end());
      fit_series.daily_cases.assign(s.daily_cases.begin() + static_cast<std::ptrdiff_t>(first), s.daily_cases.end());
      fit_series.start = s.start + static_cast<int>(first);
      std::vector<double> means(static_cast<std::size_t>(fl), 0.0);
      if (fit_series.size() >= 14) {
        const double N = data.statics.get(s.fips, "population").value_or(cfg_.default_population);
        seirqd::FitConfig fc = cfg_.fit;
        fc.seed = named_seed(cfg_.seed, s.fips);
        if (cfg_.warm_start) {
          auto it = previous_.find(s.fips);
          if (it != previous_.end()) fc.warm_start = it->second;
        }
        auto res = seirqd::fit(fit_series, N, fc);
        previous_[s.fips] = res.params;
        means = seirqd::predict_mean_deaths(res.params, N, static_cast<int>(fit_series.size()), fl);
        records_.push_back({s.fips, std::move(res)});
      }
      auto q = quantilegen::meanforecast_to_quantiles(means, s, cfg_.converter);
      out.insert(out.end(), q.begin(), q.end());
    }
    complete_forecasts(out, series, cutoff, fl);
    return out;
  }

  void save_artifacts(const std::filesystem::path& dir) const override {
    seirqd::write_params(dir / "seirqd_params.csv", records_);
  }

 private:
  SeirModelConfig cfg_;
  std::map<std::string, seirqd::SeirQdParams> previous_;
  std::vector<seirqd::ParamRecord> records_;
};

// ---------------------------------------------------------------- GP

struct GpModelConfig {
  gp::GpConfig gp{};
  quantilegen::ConverterConfig converter{};
  std::uint64_t seed = 0;
};

class GpModel final : public ForecastModel {
 public:
  explicit GpModel(GpModelConfig cfg) : cfg_(std::move(cfg)) {}
  [[nodiscard]] std::string name() const override { return "gp"; }

  std::vector<metrics::QuantileForecast> forecast(const ModelData& data, Date cutoff) override {
    fits_.clear();
    std::vector<metrics::QuantileForecast> out;
    const auto series = truncate_all(data.series, cutoff);
    const int fl = data.layout.forecast_len;
    for (const auto& s : series) {
      if (s.size() < 2) continue;
      gp::GpConfig c = cfg_.gp;
      c.optimize.seed = named_seed(cfg_.seed, s.fips);
      auto fit = gp::fit_gp_county(s, c);
      const auto means = gp::gp_forecast_mean(fit, fl);
      auto q = quantilegen::meanforecast_to_quantiles(means, s, cfg_.converter);
      out.insert(out.end(), q.begin(), q.end());
      fits_.push_back(std::move(fit));
    }
    complete_forecasts(out, series, cutoff, fl);
    return out;
  }

  void save_artifacts(const std::filesystem::path& dir) const override {
    gp::write_hyperparams(dir / "gp_hyperparams.csv", fits_);
  }

 private:
  GpModelConfig cfg_;
  std::vector<gp::GpCountyFit> fits_;
};

// ---------------------------------------------------------------- forests

struct ForestModelConfig {
  trees::ForestConfig forest{};
  trees::ClipConfig clip{};
  /// Trailing training window in days for the moving variant; 0 uses all rows.
  int window = 0;
};

/// Pooled random forest over all counties; with a window it is the "moving" variant,
/// retrained on the most recent target days only.
class ForestForecaster final : public ForecastModel {
 public:
  ForestForecaster(std::string name, ForestModelConfig cfg) : name_(std::move(name)), cfg_(std::move(cfg)) {}
  [[nodiscard]] std::string name() const override { return name_; }

  std::vector<metrics::QuantileForecast> forecast(const ModelData& data, Date cutoff) override {
    const auto series = truncate_all(data.series, cutoff);
    auto rows = data::build_feature_rows(series, data.statics, data.clusters, data.layout);
    if (cfg_.window > 0) {
      std::erase_if(rows, [&](const data::FeatureRow& r) { return r.target_date <= cutoff - cfg_.window; });
    }
    std::vector<metrics::QuantileForecast> out;
    if (!rows.empty()) {
      const auto m = to_matrix(rows, {});
      model_ = trees::fit_forest(m.X, m.y, cfg_.forest);
      std::map<std::string, double> cmax;
      for (const auto& s : series) cmax[s.fips] = county_max(s);
      for (const auto& r : data::build_forecast_rows(series, data.statics, data.clusters, data.layout)) {
        const auto x = data::dense_features(r);
        out.push_back({r.fips, r.target_date, trees::forest_quantiles(model_, x, cmax[r.fips], cfg_.clip)});
      }
    }
    complete_forecasts(out, series, cutoff, data.layout.forecast_len);
    return out;
  }

  void save_artifacts(const std::filesystem::path& dir) const override {
    save_json(dir / (name_ + ".json"), trees::to_json(model_));
  }

 private:
  std::string name_;
  ForestModelConfig cfg_;
  trees::ForestModel model_;
};

// ---------------------------------------------------------------- GBDT

inline constexpr data::FeatureBlocks kCountyBlocks{true, true, false, false, false};

class GbdtForecaster final : public ForecastModel {
 public:
  explicit GbdtForecaster(trees::GbdtConfig cfg) : cfg_(cfg) {}
  [[nodiscard]] std::string name() const override { return "gbdt"; }

  std::vector<metrics::QuantileForecast> forecast(const ModelData& data, Date cutoff) override {
    models_.clear();
    const auto series = truncate_all(data.series, cutoff);
    std::vector<metrics::QuantileForecast> out;
    for (const auto& s : series) {
      const std::vector<data::CountySeries> one{s};
      const auto rows = data::build_feature_rows(one, data.statics, data.clusters, data.layout);
      if (rows.empty()) continue;
      const auto m = to_matrix(rows, kCountyBlocks);
      trees::GbdtConfig c = cfg_;
      c.seed = named_seed(cfg_.seed, s.fips);
      auto model = trees::fit_county_gbdt(s.fips, m.X, m.y, c);
      for (const auto& r : data::build_forecast_rows(one, data.statics, data.clusters, data.layout)) {
        out.push_back({r.fips, r.target_date, model.predict(data::dense_features(r, kCountyBlocks))});
      }
      models_.push_back(std::move(model));
    }
    complete_forecasts(out, series, cutoff, data.layout.forecast_len);
    return out;
  }

  void save_artifacts(const std::filesystem::path& dir) const override {
    nlohmann::json all = nlohmann::json::array();
    for (const auto& m : models_) all.push_back(trees::to_json(m));
    save_json(dir / "gbdt.json", {{"format", "epiq.gbdt_set"}, {"version", trees::kTreeFormatVersion}, {"models", all}});
  }

 private:
  trees::GbdtConfig cfg_;
  std::vector<trees::GbdtModel> models_;
};

// ---------------------------------------------------------------- neural

struct NnModelConfig {
  neural::TrainConfig train{};
  quantilegen::ConverterConfig converter{};
};

/// Pooled mean-predicting network; means go through the negative-binomial converter.
/// With a grid in the train config, the grid point with the best validation loss is used.
class NnForecaster final : public ForecastModel {
 public:
  explicit NnForecaster(NnModelConfig cfg) : cfg_(std::move(cfg)) {}
  [[nodiscard]] std::string name() const override { return "nn"; }

  std::vector<metrics::QuantileForecast> forecast(const ModelData& data, Date cutoff) override {
    const auto series = truncate_all(data.series, cutoff);
    const auto rows = data::build_feature_rows(series, data.statics, data.clusters, data.layout);
    std::vector<metrics::QuantileForecast> out;
    if (rows.size() >= 2) {
      const auto m = to_matrix(rows, {});
      neural::TrainConfig tc = cfg_.train;
      tc.loss = neural::NetLoss::mse();
      if (tc.grid) tc = neural::grid_search(m.X, m.y, *tc.grid, tc, m.day).best;
      net_ = neural::train(m.X, m.y, tc, m.day).net;
      std::map<std::string, std::vector<double>> means;
      for (const auto& r : data::build_forecast_rows(series, data.statics, data.clusters, data.layout)) {
        const double mu = neural::forward(net_, data::dense_features(r), false).prediction[0];
        auto& v = means[r.fips];
        v.resize(static_cast<std::size_t>(data.layout.forecast_len), 0.0);
        v[static_cast<std::size_t>(*r.days_into_forecast - 1)] = std::max(0.0, mu);
      }
      for (const auto& s : series) {
        auto it = means.find(s.fips);
        if (it == means.end()) continue;
        auto q = quantilegen::meanforecast_to_quantiles(it->second, s, cfg_.converter);
        out.insert(out.end(), q.begin(), q.end());
      }
    }
    complete_forecasts(out, series, cutoff, data.layout.forecast_len);
    return out;
  }

  void save_artifacts(const std::filesystem::path& dir) const override {
    save_json(dir / "nn.json", neural::to_json(net_));
  }

 private:
  NnModelConfig cfg_;
  neural::DenseNet net_;
};

/// Nine pooled pinball networks, one per quantile level.
class QnnForecaster final : public ForecastModel {
 public:
  explicit QnnForecaster(neural::TrainConfig cfg) : cfg_(std::move(cfg)) {}
  [[nodiscard]] std::string name() const override { return "qnn"; }

  std::vector<metrics::QuantileForecast> forecast(const ModelData& data, Date cutoff) override {
    const auto series = truncate_all(data.series, cutoff);
    const auto rows = data::build_feature_rows(series, data.statics, data.clusters, data.layout);
    std::vector<metrics::QuantileForecast> out;
    if (rows.size() >= 2) {
      const auto m = to_matrix(rows, {});
      nets_ = neural::train_quantile_nets(m.X, m.y, cfg_, m.day);
      const auto frows = data::build_forecast_rows(series, data.statics, data.clusters, data.layout);
      const auto fm = to_matrix(frows, {});
      const auto qs = nets_.predict(fm.X);
      for (std::size_t i = 0; i < frows.size(); ++i) out.push_back({frows[i].fips, frows[i].target_date, qs[i]});
    }
    complete_forecasts(out, series, cutoff, data.layout.forecast_len);
    return out;
  }

  void save_artifacts(const std::filesystem::path& dir) const override {
    if (!nets_.nets.empty()) save_json(dir / "qnn.json", neural::to_json(nets_));
  }

 private:
  neural::TrainConfig cfg_;
  neural::QuantileNets nets_;
};

// ---------------------------------------------------------------- registry

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"seirqd", "gp", "forest", "forest_moving", "gbdt", "nn", "qnn"};
  return names;
}

struct ModelsConfig {
  SeirModelConfig seirqd{};
  GpModelConfig gp{};
  ForestModelConfig forest{};
  ForestModelConfig forest_moving = [] {
    ForestModelConfig c;
    c.window = 45;
    return c;
  }();
  trees::GbdtConfig gbdt{};
  NnModelConfig nn{};
  neural::TrainConfig qnn{};
};

/// Instantiates a model with a seed derived from the master seed and the model name,
/// so enabling or disabling one model leaves the others' seeds unchanged.
inline std::unique_ptr<ForecastModel> make_model(const std::string& name, const ModelsConfig& cfg,
                                                 std::uint64_t master_seed) {
  const std::uint64_t seed = named_seed(master_seed, name);
  if (name == "seirqd") {
    auto c = cfg.seirqd;
    c.seed = seed;
    return std::make_unique<SeirModel>(c);
  }
  if (name == "gp") {
    auto c = cfg.gp;
    c.seed = seed;
    return std::make_unique<GpModel>(c);
  }
  if (name == "forest" || name == "forest_moving") {
    auto c = name == "forest" ? cfg.forest : cfg.forest_moving;
    c.forest.seed = seed;
    return std::make_unique<ForestForecaster>(name, c);
  }
  if (name == "gbdt") {
    auto c = cfg.gbdt;
    c.seed = seed;
    return std::make_unique<GbdtForecaster>(c);
  }
  if (name == "nn") {
    auto c = cfg.nn;
    c.train.seed = seed;
    return std::make_unique<NnForecaster>(c);
  }
  if (name == "qnn") {
    auto c = cfg.qnn;
    c.seed = seed;
    return std::make_unique<QnnForecaster>(c);
  }
  throw ConfigError("unknown model '" + name + "'");
}

}  // namespace epiq::pipeline
