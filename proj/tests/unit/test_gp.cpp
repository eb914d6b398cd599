#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "epiq/gp/gp.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace epiq;
using namespace epiq::gp;

namespace {

oracle::RqParams as_oracle(const RqKernelParams& p) {
  return {p.const_value, p.amplitude, p.length_scale, p.alpha_mix, p.noise};
}

RqKernelParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  return {0.01 + u(rng), 0.1 + 2 * u(rng), 0.5 + 10 * u(rng), 0.2 + 5 * u(rng), 0.01 + u(rng)};
}

}  // namespace

TEST(Kernel, ZeroDistance) {
  const RqKernelParams p{0.3, 1.7, 5, 2, 0.1};
  EXPECT_DOUBLE_EQ(kernel_eval(p, 4, 4), 2.0);
}

TEST(Kernel, DecaysToConstant) {
  const RqKernelParams p{0.3, 1.7, 5, 2, 0.1};
  EXPECT_NEAR(kernel_eval(p, 0, 1e7), 0.3, 1e-9);
}

TEST(Kernel, LargeMixtureApproachesSquaredExponential) {
  const RqKernelParams p{0.0, 1.0, 3.0, 1e6, 0.1};
  EXPECT_NEAR(kernel_eval(p, 0, 3), std::exp(-0.5), 1e-3);
}

TEST(Lml, SinglePointClosedForm) {
  const RqKernelParams p{0.2, 0.3, 1, 1, 0.5};
  const std::vector<double> xs{0}, ys{0};
  EXPECT_NEAR(log_marginal_likelihood(p, xs, ys), -0.5 * std::log(2 * std::numbers::pi), 1e-14);
}

TEST(Lml, MatchesDenseInverse) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 200; ++t) {
    const auto p = random_params(rng);
    const std::size_t n = 1 + rng() % 5;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(static_cast<double>(i) * 1.5 + u(rng));
      ys.push_back(u(rng));
    }
    const double xstar = u(rng) * 3;
    const auto ref = oracle::gp_dense(as_oracle(p), xs, ys, xstar);
    EXPECT_NEAR(log_marginal_likelihood(p, xs, ys), ref.lml, 1e-8);
    const auto post = condition(p, xs, ys);
    EXPECT_NEAR(post.mean(xstar), ref.mean, 1e-8);
    EXPECT_NEAR(post.variance(xstar), ref.variance, 1e-8);
  }
}

TEST(Lml, LogDetGrowsWithNoise) {
  const std::vector<double> xs{0, 1, 2.5, 4}, zeros(4, 0.0);
  double prev = INFINITY;
  for (double noise : {0.01, 0.1, 1.0, 10.0}) {
    const RqKernelParams p{0.1, 1, 2, 1, noise};
    // with y = 0 the likelihood is -logdet/2 - n log(2 pi)/2
    const double lml = log_marginal_likelihood(p, xs, zeros);
    EXPECT_LT(lml, prev);
    prev = lml;
  }
}

TEST(Factorize, JitterRescuesSingularMatrix) {
  const RqKernelParams p{1.0, 1.0, 1e3, 1.0, 1e-300};
  const std::vector<double> xs{0, 0, 0};
  const auto f = factorize(p, xs);
  EXPECT_GT(f.jitter, 0.0);
}

TEST(Optimize, ImprovesEveryRestart) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> xs, ys;
  for (int i = 0; i < 40; ++i) {
    xs.push_back(i);
    ys.push_back(std::sin(i / 5.0) + 0.2 * g(rng));
  }
  OptimizeConfig cfg;
  cfg.restarts = 4;
  cfg.seed = 2;
  const auto r = optimize_hyperparams(xs, ys, RqKernelParams{}, cfg);
  EXPECT_GE(r.lml, r.init_lml);
  ASSERT_EQ(r.restarts.size(), 4u);
  for (const auto& rec : r.restarts) EXPECT_GE(rec.final_lml, rec.initial_lml);
  EXPECT_NEAR(r.lml, log_marginal_likelihood(r.params, xs, ys), 1e-9);
}

TEST(Optimize, StartingAtOptimumStaysThere) {
  std::vector<double> xs, ys;
  for (int i = 0; i < 30; ++i) {
    xs.push_back(i);
    ys.push_back(std::cos(i / 4.0));
  }
  OptimizeConfig cfg;
  cfg.restarts = 1;
  cfg.bfgs.max_iters = 500;
  const auto first = optimize_hyperparams(xs, ys, RqKernelParams{}, cfg);
  const auto again = optimize_hyperparams(xs, ys, first.params, cfg);
  EXPECT_NEAR(again.lml, first.lml, 1e-4 * (1 + std::abs(first.lml)));
}

TEST(Optimize, RecoversLengthScaleOfSampledPath) {
  const RqKernelParams truth{0.05, 1.0, 8.0, 2.0, 0.01};
  std::vector<double> xs;
  for (int i = 0; i < 50; ++i) xs.push_back(i);
  Eigen::MatrixXd K = kernel_matrix(truth, xs);
  K.diagonal().array() += truth.noise;
  const Eigen::MatrixXd L = K.llt().matrixL();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 1);
  Eigen::VectorXd z(50);
  for (auto& v : z) v = g(rng);
  const Eigen::VectorXd y = L * z;
  const std::vector<double> ys(y.data(), y.data() + 50);

  // likelihood-surface scan over length_scale with the other parameters at truth
  double best_ell = 0, best = -INFINITY;
  for (double ell = 1; ell <= 60; ell += 0.25) {
    RqKernelParams p = truth;
    p.length_scale = ell;
    const double l = log_marginal_likelihood(p, xs, ys);
    if (l > best) {
      best = l;
      best_ell = ell;
    }
  }
  OptimizeConfig cfg;
  cfg.restarts = 3;
  cfg.seed = 1;
  const auto r = optimize_hyperparams(xs, ys, RqKernelParams{}, cfg);
  EXPECT_LT(std::abs(std::log(r.params.length_scale / truth.length_scale)), std::log(2.0));
  EXPECT_LT(std::abs(std::log(r.params.length_scale / best_ell)), std::log(2.0));
}

TEST(Posterior, ZeroTargetsGiveZeroMean) {
  const std::vector<double> xs{0, 1, 2, 3}, ys(4, 0.0);
  const auto post = condition(RqKernelParams{}, xs, ys);
  for (double v : gp_predict_mean(post, std::vector<double>{4, 5, 6})) EXPECT_EQ(v, 0.0);
}

TEST(Posterior, InterpolatesAsNoiseVanishes) {
  const RqKernelParams p{0.1, 1.0, 1.0, 1.0, 1e-12};
  const std::vector<double> xs{0, 3, 6, 9}, ys{1.0, -0.5, 2.0, 0.25};
  const auto post = condition(p, xs, ys);
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(post.mean(xs[i]), ys[i], 1e-6);
}

TEST(Posterior, VarianceNonNegative) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 20);
  const std::vector<double> xs{0, 1, 2, 3, 4}, ys{1, 2, 1, 0, 1};
  const auto post = condition(RqKernelParams{}, xs, ys);
  for (int t = 0; t < 100; ++t) EXPECT_GE(post.variance(u(rng)), 0.0);
}

TEST(CountyFit, ForecastsInOriginalUnits) {
  std::vector<double> d;
  for (int i = 0; i < 40; ++i) d.push_back(10 + (i % 3));
  const auto s = fixture::series("01001", d);
  GpConfig cfg;
  cfg.optimize.restarts = 1;
  const auto fit = fit_gp_county(s, cfg);
  const auto fc = gp_forecast_mean(fit, 14);
  ASSERT_EQ(fc.size(), 14u);
  for (double v : fc) EXPECT_NEAR(v, 11.0, 2.0);
  EXPECT_EQ(fit.first_forecast_x, 40.0);
}

TEST(CountyFit, HyperparameterDump) {
  fixture::TempDir dir("gp");
  const auto s = fixture::series("01001", {1, 2, 3, 2, 1, 2, 3, 2});
  GpConfig cfg;
  cfg.optimize.restarts = 1;
  write_hyperparams(dir / "h.csv", {fit_gp_county(s, cfg)});
  const auto t = csv::Table::read(dir / "h.csv");
  EXPECT_EQ(t.header().front(), "fips");
  EXPECT_EQ(t.header().back(), "log_marginal_likelihood");
  EXPECT_EQ(t.rows().at(0).at(0), "01001");
}
