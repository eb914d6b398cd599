#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "epiq/common/csv.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/data/series.hpp"
#include "epiq/optim/nelder_mead.hpp"
#include "epiq/seirqd/model.hpp"

namespace epiq::seirqd {

struct LossWeights {
  double cases = 0.8;
  double deaths = 0.2;
};

/// Box constraints on the fitted parameters. E0 and I0 are bounded by
/// `max_initial_fraction * N`.
struct ParamBounds {
  std::array<double, 5> rate_lower{1e-3, 0.02, 0.01, 1e-3, 1e-5};
  std::array<double, 5> rate_upper{3.0, 1.0, 1.0, 1.0, 0.5};
  double max_initial_fraction = 1.0;
};

struct FitConfig {
  /// Used while cumulative deaths are below `severity_threshold`.
  LossWeights early{0.8, 0.2};
  /// Used once cumulative deaths reach `severity_threshold`.
  LossWeights severe{0.2, 0.8};
  double severity_threshold = 50.0;
  int max_iters = 3000;
  double tolerance = 1e-12;
  int restarts = 5;
  std::uint64_t seed = 0;
  ParamBounds bounds{};
  /// Report fits on the sigma >= q_rate branch; see canonicalize().
  bool canonical_order = true;
  /// Earlier fit of the same county (e.g. at the previous cutoff). When it scores
  /// better than the default guess, the first restart starts there.
  std::optional<SeirQdParams> warm_start;
};

struct FitResult {
  SeirQdParams params;
  bool converged = false;
  double loss = 0.0;
  double initial_loss = 0.0;
  LossWeights weights;
  int evaluations = 0;
  /// Best objective after every accepted iteration, across restarts.
  std::vector<double> trace;
};

/// Weights applied for a county with `cumulative_deaths` so far.
inline LossWeights effective_weights(const FitConfig& cfg, double cumulative_deaths) {
  return cumulative_deaths >= cfg.severity_threshold ? cfg.severe : cfg.early;
}

/// Observed cumulative targets and the anchors they imply.
struct FitTargets {
  std::vector<double> cum_cases;
  std::vector<double> cum_deaths;
  double case_scale = 1.0;
  double death_scale = 1.0;
};

inline FitTargets make_targets(const data::CountySeries& series) {
  FitTargets t;
  t.cum_cases = data::cumulative(series.daily_cases);
  t.cum_deaths = data::cumulative(series.daily_deaths);
  const double mc = *std::max_element(t.cum_cases.begin(), t.cum_cases.end());
  const double md = *std::max_element(t.cum_deaths.begin(), t.cum_deaths.end());
  t.case_scale = mc > 0 ? mc : 1.0;
  t.death_scale = md > 0 ? md : 1.0;
  return t;
}

/// Weighted sum of squared errors on cumulative cases and deaths, each normalized by
/// the square of its training-window maximum.
inline double fit_loss(const SeirQdParams& p, double N, const FitTargets& t, LossWeights w) {
  const int n = static_cast<int>(t.cum_cases.size());
  const auto traj = integrate(p, N, std::max(1, n - 1));
  double sse_c = 0.0, sse_d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double ec = traj[static_cast<std::size_t>(i)].confirmed() - t.cum_cases[static_cast<std::size_t>(i)];
    const double ed = traj[static_cast<std::size_t>(i)].D - t.cum_deaths[static_cast<std::size_t>(i)];
    sse_c += ec * ec;
    sse_d += ed * ed;
  }
  return w.cases * sse_c / (t.case_scale * t.case_scale) + w.deaths * sse_d / (t.death_scale * t.death_scale);
}

namespace detail {

// Optimizer coordinates: logs of the five rates, log1p of E0 and I0.
inline std::vector<double> to_coords(const SeirQdParams& p) {
  return {std::log(p.beta), std::log(p.sigma), std::log(p.q_rate), std::log(p.gamma),
          std::log(p.mu),   std::log1p(p.E0),  std::log1p(p.I0)};
}

inline SeirQdParams from_coords(const std::vector<double>& z, const SeirQdParams& anchors) {
  SeirQdParams p = anchors;
  p.beta = std::exp(z[0]);
  p.sigma = std::exp(z[1]);
  p.q_rate = std::exp(z[2]);
  p.gamma = std::exp(z[3]);
  p.mu = std::exp(z[4]);
  p.E0 = std::expm1(z[5]);
  p.I0 = std::expm1(z[6]);
  return p;
}

}  // namespace detail

/// The observed series (cumulative confirmed = Q + R + D, and D) are invariant under
/// swapping the E->I and I->Q rates: (beta, sigma, q) -> (beta sigma / q, q, sigma) with
/// I0' = q I0 / sigma and E0' = E0 + I0 - I0'. This maps a sigma < q_rate solution onto
/// the equivalent sigma >= q_rate one. Returns false (leaving `p` unchanged) when the
/// image would leave the parameter box.
inline bool canonicalize(SeirQdParams& p, const ParamBounds& bounds) {
  if (p.sigma >= p.q_rate) return true;
  SeirQdParams c = p;
  c.beta = p.beta * p.sigma / p.q_rate;
  c.sigma = p.q_rate;
  c.q_rate = p.sigma;
  c.I0 = p.q_rate * p.I0 / p.sigma;
  c.E0 = p.E0 + p.I0 - c.I0;
  if (c.E0 < 0.0 || c.beta < bounds.rate_lower[0] || c.beta > bounds.rate_upper[0] ||
      c.sigma > bounds.rate_upper[1] || c.q_rate < bounds.rate_lower[2]) {
    return false;
  }
  p = c;
  return true;
}

/// Default starting point for a county: the fixed rates of SeirQdParams, I0 equal to
/// the active cases on the first day (at least 1) and E0 = 2 I0.
inline SeirQdParams initial_guess(const data::CountySeries& series) {
  SeirQdParams p;
  const double c0 = series.daily_cases.empty() ? 0.0 : series.daily_cases.front();
  const double d0 = series.daily_deaths.empty() ? 0.0 : series.daily_deaths.front();
  p.Q0 = std::max(0.0, c0 - d0);
  p.D0 = std::max(0.0, d0);
  p.R0 = 0.0;
  p.I0 = std::max(1.0, p.Q0);
  p.E0 = 2.0 * p.I0;
  return p;
}

/// Least-squares calibration by restarted Nelder-Mead in log coordinates. The first
/// simplex starts at the initial guess; later ones start from the best point found so
/// far, shifted by a seeded random perturbation.
inline FitResult fit(const data::CountySeries& series, double N, const FitConfig& cfg = {}) {
  if (series.size() < 14) throw std::invalid_argument("SEIR-QD fit needs at least 14 days of data");
  if (!(N > 0.0)) throw std::invalid_argument("population must be positive");
  const FitTargets targets = make_targets(series);
  FitResult res;
  res.weights = effective_weights(cfg, targets.cum_deaths.back());
  if (res.weights.cases + res.weights.deaths <= 0.0) {
    throw std::invalid_argument("loss weights must not both be zero");
  }

  const SeirQdParams guess = initial_guess(series);
  const double init_cap = cfg.bounds.max_initial_fraction * N;
  std::vector<double> lo(7), hi(7);
  for (std::size_t i = 0; i < 5; ++i) {
    lo[i] = std::log(cfg.bounds.rate_lower[i]);
    hi[i] = std::log(cfg.bounds.rate_upper[i]);
  }
  lo[5] = lo[6] = 0.0;
  hi[5] = hi[6] = std::log1p(std::max(0.0, init_cap - guess.Q0 - guess.D0) / 2.0);

  auto objective = [&](const std::vector<double>& z) {
    try {
      return fit_loss(detail::from_coords(z, guess), N, targets, res.weights);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<double> best = detail::to_coords(guess);
  for (std::size_t i = 0; i < best.size(); ++i) best[i] = std::clamp(best[i], lo[i], hi[i]);
  const std::vector<double> origin = best;
  double best_f = objective(best);
  res.initial_loss = best_f;
  bool warm = false;
  if (cfg.warm_start) {
    auto zw = detail::to_coords(*cfg.warm_start);
    for (std::size_t i = 0; i < zw.size(); ++i) zw[i] = std::clamp(zw[i], lo[i], hi[i]);
    const double fw = objective(zw);
    if (fw < best_f) {
      best = zw;
      best_f = fw;
      warm = true;
    }
  }
  Rng rng(cfg.seed);
  const std::vector<double> step{0.4, 0.4, 0.4, 0.4, 0.4, 0.7, 0.7};
  optim::NelderMeadOptions opt;
  opt.max_iters = cfg.max_iters;
  opt.ftol = cfg.tolerance;
  opt.xtol = 1e-7;
  bool converged = false;
  for (int r = 0; r < std::max(1, cfg.restarts); ++r) {
    // Odd restarts polish the incumbent; even ones explore around the initial guess.
    std::vector<double> start = (r % 2 == 1 || (r == 0 && warm)) ? best : origin;
    if (r > 0) {
      const double amp = (r % 2 == 1) ? 0.15 : 0.6;
      for (std::size_t i = 0; i < start.size(); ++i) {
        start[i] = std::clamp(start[i] + amp * (2.0 * uniform01(rng) - 1.0), lo[i], hi[i]);
      }
    }
    const auto nm = optim::nelder_mead(objective, start, lo, hi, step, opt);
    res.evaluations += nm.evaluations;
    for (double v : nm.trace) res.trace.push_back(std::min(v, best_f));
    if (nm.fx <= best_f) {
      best_f = nm.fx;
      best = nm.x;
    }
    converged = nm.converged;
  }
  res.params = detail::from_coords(best, guess);
  if (cfg.canonical_order) canonicalize(res.params, cfg.bounds);
  res.loss = best_f;
  res.converged = converged;
  return res;
}

/// Expected daily deaths for the `forecast_len` days after a training window of
/// `train_len` days: increments of D continuing the fitted trajectory.
inline std::vector<double> predict_mean_deaths(const SeirQdParams& p, double N, int train_len,
                                               int forecast_len) {
  const auto traj = integrate(p, N, train_len - 1 + forecast_len);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(forecast_len));
  for (int h = 1; h <= forecast_len; ++h) {
    const auto t = static_cast<std::size_t>(train_len - 1 + h);
    out.push_back(std::max(0.0, traj[t].D - traj[t - 1].D));
  }
  return out;
}

/// Row of the fitted-parameter dump.
struct ParamRecord {
  std::string fips;
  FitResult fit;
};

inline void write_params(const std::filesystem::path& path, const std::vector<ParamRecord>& records) {
  csv::Writer w(path);
  w.row({"fips", "beta", "sigma", "q_rate", "gamma", "mu", "E0", "I0", "converged", "loss"});
  for (const auto& r : records) {
    const auto& p = r.fit.params;
    w.row({r.fips, csv::fmt(p.beta), csv::fmt(p.sigma), csv::fmt(p.q_rate), csv::fmt(p.gamma),
           csv::fmt(p.mu), csv::fmt(p.E0), csv::fmt(p.I0), r.fit.converged ? "1" : "0",
           csv::fmt(r.fit.loss)});
  }
}

}  // namespace epiq::seirqd
