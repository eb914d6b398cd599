#include <gtest/gtest.h>

#include <random>

#include "epiq/seirqd/fit.hpp"
#include "epiq/seirqd/model.hpp"
#include "fixtures.hpp"

using namespace epiq;
using namespace epiq::seirqd;

namespace {

SeirQdParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  SeirQdParams p;
  p.beta = 0.05 + 1.5 * u(rng);
  p.sigma = 0.05 + 0.9 * u(rng);
  p.q_rate = 0.02 + 0.9 * u(rng);
  p.gamma = 0.01 + 0.3 * u(rng);
  p.mu = 0.0005 + 0.05 * u(rng);
  p.E0 = 100 * u(rng);
  p.I0 = 50 * u(rng);
  p.Q0 = 20 * u(rng);
  p.R0 = 5 * u(rng);
  p.D0 = 2 * u(rng);
  return p;
}

/// Noise-free daily series from known parameters, anchored at zero confirmed counts.
data::CountySeries world_series(const SeirQdParams& p, double N, int days) {
  const auto traj = integrate(p, N, days - 1);
  std::vector<double> deaths(static_cast<std::size_t>(days)), cases(static_cast<std::size_t>(days));
  for (int t = 0; t < days; ++t) {
    const auto i = static_cast<std::size_t>(t);
    deaths[i] = t ? traj[i].D - traj[i - 1].D : traj[0].D;
    cases[i] = t ? traj[i].confirmed() - traj[i - 1].confirmed() : traj[0].confirmed();
  }
  return fixture::series("01001", deaths, cases);
}

}  // namespace

TEST(SeirRhs, DiseaseFreeEquilibrium) {
  SeirQdParams p;
  p.beta = 0;
  const auto d = seirqd_rhs({1000, 0, 0, 0, 0, 0}, p, 1000);
  for (double v : {d.S, d.E, d.I, d.Q, d.R, d.D}) EXPECT_EQ(v, 0.0);
}

TEST(SeirRhs, HandComputedInfection) {
  SeirQdParams p;
  p.beta = 0.5;
  const auto d = seirqd_rhs({999, 0, 1, 0, 0, 0}, p, 1000);
  EXPECT_NEAR(d.S, -0.4995, 1e-15);
}

TEST(SeirRhs, ComponentsSumToZero) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1000);
  for (int t = 0; t < 200; ++t) {
    const auto p = random_params(rng);
    const SeirQdState x{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    const auto d = seirqd_rhs(x, p, x.total() + 1);
    EXPECT_NEAR(d.total(), 0.0, 1e-10 * (1 + std::abs(d.S)));
  }
}

TEST(SeirIntegrate, ZeroRatesGiveConstantTrajectory) {
  SeirQdParams p{0, 0, 0, 0, 0, 10, 5, 3, 2, 1};
  const auto traj = integrate(p, 1000, 30);
  for (const auto& x : traj) {
    EXPECT_EQ(x.E, 10);
    EXPECT_EQ(x.D, 1);
    EXPECT_EQ(x.S, 979);
  }
}

TEST(SeirIntegrate, ConservesPopulationAndDeathsMonotone) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_params(rng);
    const double N = 1e4 + 1e6 * std::uniform_real_distribution<double>(0, 1)(rng);
    const auto traj = integrate(p, N, 120);
    ASSERT_EQ(traj.size(), 121u);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      EXPECT_LE(std::abs(traj[i].total() - N), 1e-6 * N);
      if (i) EXPECT_GE(traj[i].D, traj[i - 1].D);
    }
  }
}

TEST(SeirIntegrate, RejectsBadInputs) {
  SeirQdParams p;
  EXPECT_THROW(integrate(p, 0, 10), std::invalid_argument);
  EXPECT_THROW(integrate(p, 100, 0), std::invalid_argument);
  p.E0 = 200;
  EXPECT_THROW(integrate(p, 100, 10), std::invalid_argument);
}

TEST(SeirFit, SeverityWeights) {
  FitConfig cfg;
  const auto early = effective_weights(cfg, cfg.severity_threshold - 1);
  const auto severe = effective_weights(cfg, cfg.severity_threshold);
  EXPECT_GT(early.cases, early.deaths);
  EXPECT_GT(severe.deaths, severe.cases);
}

TEST(SeirFit, RecoversBetaAndMuFromNoiseFreeSeries) {
  SeirQdParams truth{0.45, 0.3, 0.15, 0.07, 0.01, 40, 10, 0, 0, 0};
  const double N = 2e5;
  const auto s = world_series(truth, N, 100);
  FitConfig cfg;
  cfg.seed = 3;
  const auto r = fit(s, N, cfg);
  EXPECT_LE(r.loss, r.initial_loss);
  EXPECT_NEAR(r.params.beta / truth.beta, 1.0, 0.05);
  EXPECT_NEAR(r.params.mu / truth.mu, 1.0, 0.05);
}

TEST(SeirFit, CanonicalizeKeepsObservables) {
  SeirQdParams p{0.6, 0.1, 0.3, 0.05, 0.01, 30, 12, 0, 0, 0};
  SeirQdParams c = p;
  ASSERT_TRUE(canonicalize(c, ParamBounds{}));
  EXPECT_GE(c.sigma, c.q_rate);
  const auto a = integrate(p, 1e5, 80), b = integrate(c, 1e5, 80);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].confirmed(), b[i].confirmed(), 1e-6 * (1 + a[i].confirmed()));
    EXPECT_NEAR(a[i].D, b[i].D, 1e-6 * (1 + a[i].D));
  }
}

TEST(SeirFit, ShortSeriesRejected) {
  EXPECT_THROW(fit(fixture::series("01001", std::vector<double>(10, 1)), 1e4), std::invalid_argument);
}

TEST(SeirPredict, ZeroMortalityGivesZeroDeaths) {
  SeirQdParams p{0.5, 0.3, 0.2, 0.05, 0.0, 30, 10, 5, 0, 0};
  for (double v : predict_mean_deaths(p, 1e5, 40, 14)) EXPECT_EQ(v, 0.0);
}

TEST(SeirPredict, ContinuesTheTrainingTrajectory) {
  SeirQdParams p{0.5, 0.3, 0.2, 0.05, 0.02, 30, 10, 5, 0, 0};
  const auto traj = integrate(p, 1e5, 60);
  const auto fc = predict_mean_deaths(p, 1e5, 40, 14);
  ASSERT_EQ(fc.size(), 14u);
  for (int h = 1; h <= 14; ++h) {
    EXPECT_DOUBLE_EQ(fc[static_cast<std::size_t>(h - 1)],
                     traj[static_cast<std::size_t>(39 + h)].D - traj[static_cast<std::size_t>(38 + h)].D);
  }
}
