#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epiq/common/quantile.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/common/stats.hpp"
#include "epiq/data/series.hpp"
#include "epiq/metrics/forecast.hpp"

namespace epiq::quantilegen {

/// Negative binomial with mean mu and dispersion phi: Var = mu + mu^2 / phi.
struct NbSpec {
  double mu = 0.0;
  double phi = 1.0;

  [[nodiscard]] double variance() const { return mu + mu * mu / phi; }
};

struct PhiConfig {
  /// Trailing days of history used for the dispersion estimate.
  int window = 14;
  double phi_min = 0.1;
  double phi_max = 1e6;
};

/// Moment estimate of phi from the sample variance v of a recent window:
/// phi = mu^2 / (v - mu) when overdispersed, phi_max otherwise; clamped to
/// [phi_min, phi_max].
inline double estimate_phi(std::span<const double> recent, double mu, const PhiConfig& cfg = {}) {
  if (recent.size() < 2) throw std::invalid_argument("dispersion window needs at least 2 values");
  const double v = sample_variance(recent);
  const double phi = v > mu ? mu * mu / (v - mu) : cfg.phi_max;
  return std::clamp(phi, cfg.phi_min, cfg.phi_max);
}

/// log P(D = k) evaluated by the ratio recurrence from k = 0.
class NbPmf {
 public:
  explicit NbPmf(const NbSpec& s)
      : phi_(s.phi), log_q_(std::log(s.mu / (s.phi + s.mu))), log_pmf_(-s.phi * std::log1p(s.mu / s.phi)) {}

  [[nodiscard]] double log_pmf() const { return log_pmf_; }
  [[nodiscard]] long k() const { return k_; }

  void advance() {
    ++k_;
    log_pmf_ += std::log((static_cast<double>(k_) - 1.0 + phi_) / static_cast<double>(k_)) + log_q_;
  }

 private:
  double phi_;
  double log_q_;  // log(1 - p), p = phi / (phi + mu)
  double log_pmf_;
  long k_ = 0;
};

/// Exact inverse-CDF quantiles: for each level the smallest count k with
/// CDF(k) >= level, found by summing the probability mass upward from zero.
inline QuantileVector nb_quantiles(const NbSpec& spec,
                                   std::span<const double, kNumQuantiles> levels = kQuantileLevels) {
  if (spec.mu < 0.0 || !std::isfinite(spec.mu)) {
    throw std::invalid_argument("negative binomial mean must be finite and >= 0");
  }
  if (!(spec.phi > 0.0) || !std::isfinite(spec.phi)) {
    throw std::invalid_argument("negative binomial dispersion must be finite and > 0");
  }
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (!(levels[j] > 0.0 && levels[j] < 1.0) || (j > 0 && levels[j] <= levels[j - 1])) {
      throw std::invalid_argument("quantile levels must be strictly increasing in (0,1)");
    }
  }
  QuantileVector out{};
  if (spec.mu == 0.0) return out;

  // Far beyond any level we can reach in double precision.
  const double sd = std::sqrt(spec.variance());
  const auto k_cap = static_cast<long>(spec.mu + 60.0 * sd + 1000.0);
  NbPmf pmf(spec);
  double cdf = std::exp(pmf.log_pmf());
  for (std::size_t j = 0; j < levels.size(); ++j) {
    while (cdf < levels[j] && pmf.k() < k_cap) {
      pmf.advance();
      cdf += std::exp(pmf.log_pmf());
    }
    out[j] = static_cast<double>(pmf.k());
  }
  return out;
}

/// One draw by the gamma-Poisson mixture.
inline double nb_sample(const NbSpec& spec, Rng& rng) {
  if (spec.mu == 0.0) return 0.0;
  std::gamma_distribution<double> gamma(spec.phi, spec.mu / spec.phi);
  std::poisson_distribution<long> poisson(gamma(rng));
  return static_cast<double>(poisson(rng));
}

/// Quantiles from Monte Carlo draws instead of the exact inverse CDF.
inline QuantileVector nb_sampled_quantiles(const NbSpec& spec, std::size_t draws, Rng& rng) {
  std::vector<double> s(draws);
  for (auto& v : s) v = nb_sample(spec, rng);
  return empirical_quantiles(std::move(s));
}

struct ConverterConfig {
  PhiConfig phi{};
  /// Use sampled instead of exact quantiles.
  bool sample = false;
  std::size_t sample_draws = 10000;
  std::uint64_t seed = 0;
};

/// Dispersion for one county: a single phi from the trailing window of cleaned daily
/// deaths, matched to that window's own mean. Short or empty history gives phi_max.
inline double county_phi(const data::CountySeries& history, const PhiConfig& cfg = {}) {
  const std::size_t n = history.daily_deaths.size();
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(0, cfg.window)));
  if (w < 2) return cfg.phi_max;
  std::span<const double> recent(history.daily_deaths.data() + (n - w), w);
  return estimate_phi(recent, mean(recent), cfg);
}

/// Turns a daily mean forecast starting the day after the history ends into quantile
/// forecasts. Negative means are clamped to zero.
inline std::vector<metrics::QuantileForecast> meanforecast_to_quantiles(
    std::span<const double> means, const data::CountySeries& history, const ConverterConfig& cfg = {}) {
  const double phi = county_phi(history, cfg.phi);
  Rng rng(cfg.seed);
  std::vector<metrics::QuantileForecast> out;
  out.reserve(means.size());
  const Date first = history.size() ? history.last_date() + 1 : history.start;
  for (std::size_t h = 0; h < means.size(); ++h) {
    const NbSpec spec{std::max(0.0, means[h]), phi};
    metrics::QuantileForecast f;
    f.fips = history.fips;
    f.date = first + static_cast<int>(h);
    f.q = cfg.sample ? nb_sampled_quantiles(spec, cfg.sample_draws, rng) : nb_quantiles(spec);
    monotonize(f.q);
    out.push_back(f);
  }
  return out;
}

}  // namespace epiq::quantilegen
