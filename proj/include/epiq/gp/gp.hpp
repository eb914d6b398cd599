#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "epiq/common/csv.hpp"
#include "epiq/common/error.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/common/stats.hpp"
#include "epiq/data/series.hpp"
#include "epiq/optim/box_bfgs.hpp"

namespace epiq::gp {

/// Constant + rational-quadratic kernel with additive observation noise.
struct RqKernelParams {
  double const_value = 0.1;
  double amplitude = 1.0;
  double length_scale = 14.0;
  double alpha_mix = 1.0;
  double noise = 0.1;

  [[nodiscard]] std::array<double, 5> to_array() const {
    return {const_value, amplitude, length_scale, alpha_mix, noise};
  }
  static RqKernelParams from_array(std::span<const double> a) { return {a[0], a[1], a[2], a[3], a[4]}; }

  void validate() const {
    for (double v : to_array()) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("kernel parameters must be finite and > 0");
    }
  }
};

inline double kernel_eval(const RqKernelParams& p, double x1, double x2) {
  const double d = x1 - x2;
  return p.const_value +
         p.amplitude * std::pow(1.0 + d * d / (2.0 * p.alpha_mix * p.length_scale * p.length_scale), -p.alpha_mix);
}

/// Noise-free kernel matrix; symmetric by construction.
inline Eigen::MatrixXd kernel_matrix(const RqKernelParams& p, std::span<const double> xs) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = kernel_eval(p, xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = K(j, i) = kernel_eval(p, xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)]);
    }
  }
  return K;
}

inline constexpr std::array<double, 3> kJitterLadder{1e-8, 1e-6, 1e-4};

/// Cholesky factor of K + noise*I. When that fails, jitter from kJitterLadder is
/// added in turn; the jitter used is reported.
struct Factor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

inline Factor factorize(const RqKernelParams& p, std::span<const double> xs, const std::string& label = "") {
  Eigen::MatrixXd A = kernel_matrix(p, xs);
  A.diagonal().array() += p.noise;
  Factor f;
  f.llt.compute(A);
  if (f.llt.info() == Eigen::Success) return f;
  for (double j : kJitterLadder) {
    Eigen::MatrixXd B = A;
    B.diagonal().array() += j;
    f.llt.compute(B);
    f.jitter = j;
    if (f.llt.info() == Eigen::Success) return f;
  }
  throw NumericalError("kernel matrix is not positive definite" + (label.empty() ? "" : " for county " + label) +
                       " after jitter " + std::to_string(kJitterLadder.back()));
}

inline double log_marginal_likelihood(const RqKernelParams& p, std::span<const double> xs,
                                      std::span<const double> ys, const std::string& label = "") {
  if (xs.size() != ys.size()) throw std::invalid_argument("inputs and targets differ in length");
  if (xs.empty()) throw std::invalid_argument("marginal likelihood needs training points");
  const Factor f = factorize(p, xs, label);
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const Eigen::VectorXd alpha = f.llt.solve(y);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) logdet += 2.0 * std::log(f.llt.matrixLLT()(i, i));
  const double n = static_cast<double>(ys.size());
  return -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

/// Conditioned GP. Targets may have been standardized; mean() and variance() report
/// in the original units via y_offset / y_scale.
struct GpPosterior {
  RqKernelParams params;
  std::vector<double> xs;
  Eigen::VectorXd alpha;
  Factor factor;
  double y_offset = 0.0;
  double y_scale = 1.0;

  [[nodiscard]] Eigen::VectorXd cross(double x) const {
    Eigen::VectorXd k(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) k(static_cast<Eigen::Index>(i)) = kernel_eval(params, x, xs[i]);
    return k;
  }

  [[nodiscard]] double mean(double x) const { return cross(x).dot(alpha) * y_scale + y_offset; }

  /// Latent-function variance, clamped at zero.
  [[nodiscard]] double variance(double x) const {
    const Eigen::VectorXd k = cross(x);
    const double v = kernel_eval(params, x, x) - k.dot(factor.llt.solve(k));
    return std::max(0.0, v) * y_scale * y_scale;
  }
};

inline GpPosterior condition(const RqKernelParams& p, std::span<const double> xs, std::span<const double> ys,
                             const std::string& label = "") {
  if (xs.size() != ys.size() || xs.empty()) throw std::invalid_argument("need matching, non-empty inputs and targets");
  GpPosterior post;
  post.params = p;
  post.xs.assign(xs.begin(), xs.end());
  post.factor = factorize(p, xs, label);
  post.alpha = post.factor.llt.solve(Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())));
  return post;
}

struct HyperBounds {
  RqKernelParams lower{1e-4, 1e-4, 1.0, 0.1, 1e-6};
  RqKernelParams upper{1e4, 1e4, 200.0, 100.0, 10.0};
};

struct OptimizeConfig {
  int restarts = 3;
  std::uint64_t seed = 0;
  /// Half-width, in log units, of the box around init from which later restarts start.
  double restart_spread = 1.5;
  optim::BoxBfgsOptions bfgs{};
  HyperBounds bounds{};
};

struct RestartRecord {
  RqKernelParams start;
  double initial_lml = 0.0;
  double final_lml = 0.0;
  bool failed = false;
};

struct OptimizeResult {
  RqKernelParams params;
  double lml = 0.0;
  double init_lml = 0.0;
  bool fell_back = false;
  std::vector<RestartRecord> restarts;
};

/// Maximizes the log marginal likelihood in log-parameter space. Restart 0 starts at
/// init, the rest at seeded points around it; the best end point is kept, and init
/// itself is returned if nothing beats it.
inline OptimizeResult optimize_hyperparams(std::span<const double> xs, std::span<const double> ys,
                                           const RqKernelParams& init, const OptimizeConfig& cfg = {},
                                           const std::string& label = "") {
  init.validate();
  std::vector<double> lo, hi;
  for (double v : cfg.bounds.lower.to_array()) lo.push_back(std::log(v));
  for (double v : cfg.bounds.upper.to_array()) hi.push_back(std::log(v));
  auto lml_at = [&](const std::vector<double>& z) {
    std::array<double, 5> a{};
    for (std::size_t i = 0; i < 5; ++i) a[i] = std::exp(z[i]);
    try {
      return log_marginal_likelihood(RqKernelParams::from_array(a), xs, ys, label);
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  std::vector<double> z0;
  for (double v : init.to_array()) z0.push_back(std::log(v));

  OptimizeResult res;
  res.params = init;
  res.init_lml = lml_at(z0);
  res.lml = res.init_lml;
  Rng rng(cfg.seed);
  bool any_ok = false;
  for (int r = 0; r < std::max(1, cfg.restarts); ++r) {
    std::vector<double> start = z0;
    if (r > 0) {
      for (std::size_t i = 0; i < 5; ++i) start[i] += cfg.restart_spread * (2.0 * uniform01(rng) - 1.0);
    }
    for (std::size_t i = 0; i < 5; ++i) start[i] = std::clamp(start[i], lo[i], hi[i]);
    RestartRecord rec;
    std::array<double, 5> sa{};
    for (std::size_t i = 0; i < 5; ++i) sa[i] = std::exp(start[i]);
    rec.start = RqKernelParams::from_array(sa);
    rec.initial_lml = lml_at(start);
    const auto opt = optim::box_bfgs([&](const std::vector<double>& z) { return -lml_at(z); }, start, lo, hi, cfg.bfgs);
    rec.final_lml = -opt.fx;
    rec.failed = !std::isfinite(rec.final_lml);
    if (!rec.failed) {
      any_ok = true;
      if (rec.final_lml > res.lml || !std::isfinite(res.lml)) {
        std::array<double, 5> a{};
        for (std::size_t i = 0; i < 5; ++i) a[i] = std::exp(opt.x[i]);
        res.params = RqKernelParams::from_array(a);
        res.lml = rec.final_lml;
      }
    }
    res.restarts.push_back(rec);
  }
  res.fell_back = !any_ok;
  return res;
}

struct GpConfig {
  /// Trailing days used for fitting; 0 means the whole series.
  int window = 0;
  RqKernelParams init{};
  OptimizeConfig optimize{};
};

struct GpCountyFit {
  std::string fips;
  GpPosterior posterior;
  OptimizeResult optimization;
  /// Day index (relative to the training window) of the first forecast day.
  double first_forecast_x = 0.0;
};

/// Fits a time-indexed GP on standardized daily deaths of one county.
inline GpCountyFit fit_gp_county(const data::CountySeries& s, const GpConfig& cfg = {}) {
  const std::size_t n = s.daily_deaths.size();
  if (n < 2) throw DataError("county " + s.fips + " has fewer than two days for the GP fit");
  const std::size_t w = cfg.window > 0 ? std::min(n, static_cast<std::size_t>(cfg.window)) : n;
  std::vector<double> xs(w), ys(s.daily_deaths.end() - static_cast<std::ptrdiff_t>(w), s.daily_deaths.end());
  for (std::size_t i = 0; i < w; ++i) xs[i] = static_cast<double>(i);
  const double m = mean(ys);
  const double sd = std::sqrt(std::max(0.0, sample_variance(ys)));
  const double scale = sd > 1e-12 ? sd : 1.0;
  for (double& y : ys) y = (y - m) / scale;

  GpCountyFit fit;
  fit.fips = s.fips;
  fit.optimization = optimize_hyperparams(xs, ys, cfg.init, cfg.optimize, s.fips);
  fit.posterior = condition(fit.optimization.params, xs, ys, s.fips);
  fit.posterior.y_offset = m;
  fit.posterior.y_scale = scale;
  fit.first_forecast_x = static_cast<double>(w);
  return fit;
}

/// Posterior mean at the given inputs, clamped at zero.
inline std::vector<double> gp_predict_mean(const GpPosterior& post, std::span<const double> days) {
  std::vector<double> out;
  out.reserve(days.size());
  for (double d : days) out.push_back(std::max(0.0, post.mean(d)));
  return out;
}

/// Mean forecast for the `horizon` days following the training window.
inline std::vector<double> gp_forecast_mean(const GpCountyFit& fit, int horizon) {
  std::vector<double> days;
  for (int h = 0; h < horizon; ++h) days.push_back(fit.first_forecast_x + h);
  return gp_predict_mean(fit.posterior, days);
}

inline void write_hyperparams(const std::filesystem::path& path, const std::vector<GpCountyFit>& fits) {
  csv::Writer w(path);
  w.row({"fips", "const_value", "amplitude", "length_scale", "alpha_mix", "noise", "log_marginal_likelihood"});
  for (const auto& f : fits) {
    const auto& p = f.optimization.params;
    w.row({f.fips, csv::fmt(p.const_value), csv::fmt(p.amplitude), csv::fmt(p.length_scale), csv::fmt(p.alpha_mix),
           csv::fmt(p.noise), csv::fmt(f.optimization.lml)});
  }
}

}  // namespace epiq::gp
