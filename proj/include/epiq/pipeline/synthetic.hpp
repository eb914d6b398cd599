#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "epiq/common/date.hpp"
#include "epiq/common/json_io.hpp"
#include "epiq/common/rng.hpp"
#include "epiq/data/io.hpp"
#include "epiq/data/series.hpp"
#include "epiq/quantilegen/negbin.hpp"
#include "epiq/seirqd/model.hpp"

namespace epiq::pipeline {

/// One synthetic county: SEIR-QD dynamics whose transmission rate drops to
/// beta * beta_drop on day change_day, as after a stay-at-home order.
struct SyntheticCounty {
  std::string fips;
  std::string state;
  double population = 1e5;
  seirqd::SeirQdParams params;
  int change_day = 60;
  double beta_drop = 0.5;
};

struct NoiseSpec {
  /// NB dispersion of observed daily counts; <= 0 means noise-free rounding.
  double phi = 20.0;
  /// Per-day probability that reporting withholds deaths and dumps them at once.
  double dump_probability = 0.0;
  /// Days accumulated into one dump (bounded by the previous dump).
  int dump_window = 7;
  /// Dumps only start after this many days.
  int dump_min_day = 20;
  /// Multiplicative reporting factor per weekday, Monday first.
  std::array<double, 7> weekday_factor{1, 1, 1, 1, 1, 1, 1};
  /// Fraction of mobility observations left missing.
  double mobility_missing = 0.0;
};

struct SyntheticWorld {
  Date start = Date::from_ymd(2020, 3, 1);
  std::vector<SyntheticCounty> counties;
  NoiseSpec noise;
  std::uint64_t seed = 0;
};

struct WorldSpec {
  int n_counties = 40;
  int n_states = 4;
  Date start = Date::from_ymd(2020, 3, 1);
  NoiseSpec noise{20.0, 0.02, 7, 20, {1.05, 1.05, 1.05, 1.0, 1.0, 0.85, 0.8}, 0.05};
  std::uint64_t seed = 0;
};

namespace detail {

inline double draw(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }
inline double draw_log(Rng& rng, double lo, double hi) { return std::exp(draw(rng, std::log(lo), std::log(hi))); }

}  // namespace detail

/// Seeded world with county parameters spread over plausible ranges.
inline SyntheticWorld make_world(const WorldSpec& spec) {
  SyntheticWorld w;
  w.start = spec.start;
  w.noise = spec.noise;
  w.seed = spec.seed;
  Rng rng(spec.seed);
  for (int c = 0; c < spec.n_counties; ++c) {
    SyntheticCounty k;
    const int st = c % std::max(1, spec.n_states);
    const std::string county = std::to_string(1 + 2 * (c / std::max(1, spec.n_states)));
    k.fips = std::to_string(10 + st) + std::string(3 - std::min<std::size_t>(3, county.size()), '0') + county;
    k.state = "State" + std::string(1, static_cast<char>('A' + st));
    k.population = detail::draw_log(rng, 3e4, 1e6);
    auto& p = k.params;
    p.beta = detail::draw(rng, 0.3, 0.5);
    p.sigma = detail::draw(rng, 0.2, 0.35);
    p.q_rate = detail::draw(rng, 0.12, 0.2);
    p.gamma = detail::draw(rng, 0.05, 0.1);
    p.mu = detail::draw(rng, 0.0005, 0.002);
    p.E0 = std::round(detail::draw(rng, 5, 40));
    p.I0 = std::round(detail::draw(rng, 2, 20));
    k.change_day = static_cast<int>(detail::draw(rng, 30, 70));
    k.beta_drop = detail::draw(rng, 0.3, 0.7);
    w.counties.push_back(k);
  }
  return w;
}

/// Noise-free expected daily deaths and confirmed cases (increments of D and Q+R+D),
/// for days 0 .. days-1; day 0 reports the initial compartments.
struct ExpectedCounts {
  std::vector<double> deaths;
  std::vector<double> cases;
};

inline ExpectedCounts expected_counts(const SyntheticCounty& c, int days) {
  std::vector<seirqd::SeirQdState> traj;
  const int first_leg = std::clamp(c.change_day, 1, std::max(1, days));
  traj = seirqd::integrate(c.params, c.population, first_leg);
  if (days > first_leg) {
    const auto& x = traj.back();
    seirqd::SeirQdParams p2 = c.params;
    p2.beta *= c.beta_drop;
    p2.E0 = x.E;
    p2.I0 = x.I;
    p2.Q0 = x.Q;
    p2.R0 = x.R;
    p2.D0 = x.D;
    auto tail = seirqd::integrate(p2, c.population, days - first_leg);
    traj.insert(traj.end(), tail.begin() + 1, tail.end());
  }
  ExpectedCounts e;
  for (int t = 0; t < days; ++t) {
    const auto i = static_cast<std::size_t>(t);
    e.deaths.push_back(t == 0 ? traj[0].D : traj[i].D - traj[i - 1].D);
    e.cases.push_back(t == 0 ? traj[0].confirmed() : traj[i].confirmed() - traj[i - 1].confirmed());
  }
  return e;
}

/// Moves the last `window` days (not crossing the previous dump) into day `d`.
inline void inject_dump(std::vector<double>& v, std::size_t d, int window, std::size_t floor_index) {
  double acc = 0.0;
  const std::size_t first = d + 1 >= static_cast<std::size_t>(window) ? d + 1 - static_cast<std::size_t>(window) : 0;
  for (std::size_t i = std::max(first, floor_index); i < d; ++i) {
    acc += v[i];
    v[i] = 0.0;
  }
  v[d] += acc;
}

/// Observed series for every county: weekday factors, then NB (or rounding) noise,
/// then dumps; mobility tracks the transmission drop.
inline std::vector<data::CountySeries> generate_synthetic(const SyntheticWorld& world, int days) {
  std::vector<data::CountySeries> out;
  const auto seeds = derive_seeds(world.seed ^ 0x5eedULL, world.counties.size());
  for (std::size_t k = 0; k < world.counties.size(); ++k) {
    const auto& c = world.counties[k];
    Rng rng(seeds[k]);
    const auto e = expected_counts(c, days);
    data::CountySeries s;
    s.fips = c.fips;
    s.state = c.state;
    s.start = world.start;
    auto observe = [&](double mean) {
      mean = std::max(0.0, mean);
      if (world.noise.phi <= 0.0) return std::round(mean);
      return quantilegen::nb_sample({mean, world.noise.phi}, rng);
    };
    for (int t = 0; t < days; ++t) {
      const double f = world.noise.weekday_factor[static_cast<std::size_t>((world.start + t).weekday())];
      s.daily_deaths.push_back(observe(e.deaths[static_cast<std::size_t>(t)] * f));
      s.daily_cases.push_back(observe(e.cases[static_cast<std::size_t>(t)] * f));
      const double base = t < c.change_day ? 100.0 : 100.0 * (0.4 + 0.6 * c.beta_drop);
      const double m = std::round(base + 4.0 * (2.0 * uniform01(rng) - 1.0));
      const bool missing = uniform01(rng) < world.noise.mobility_missing;
      s.mobility.push_back(missing ? std::nullopt : std::optional<double>(m));
    }
    if (world.noise.dump_probability > 0.0) {
      std::size_t last_dump = 0;
      for (int t = world.noise.dump_min_day; t < days; ++t) {
        if (uniform01(rng) < world.noise.dump_probability) {
          inject_dump(s.daily_deaths, static_cast<std::size_t>(t), world.noise.dump_window, last_dump);
          last_dump = static_cast<std::size_t>(t) + 1;
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline data::StaticTable world_statics(const SyntheticWorld& world) {
  data::StaticTable t;
  t.names = {"population", "log_population"};
  for (const auto& c : world.counties) t.by_fips[c.fips] = {c.fips, {c.population, std::log(c.population)}};
  return t;
}

inline nlohmann::json world_to_json(const SyntheticWorld& w) {
  nlohmann::json counties = nlohmann::json::array();
  for (const auto& c : w.counties) {
    const auto& p = c.params;
    counties.push_back({{"fips", c.fips}, {"state", c.state}, {"population", c.population},
                        {"beta", p.beta}, {"sigma", p.sigma}, {"q_rate", p.q_rate}, {"gamma", p.gamma},
                        {"mu", p.mu}, {"E0", p.E0}, {"I0", p.I0}, {"change_day", c.change_day},
                        {"beta_drop", c.beta_drop}});
  }
  const auto& n = w.noise;
  return {{"format", "epiq.synthetic_world"}, {"version", 1}, {"start", w.start.str()}, {"seed", w.seed},
          {"noise",
           {{"phi", n.phi}, {"dump_probability", n.dump_probability}, {"dump_window", n.dump_window},
            {"dump_min_day", n.dump_min_day}, {"weekday_factor", n.weekday_factor},
            {"mobility_missing", n.mobility_missing}}},
          {"counties", counties}};
}

struct SyntheticFiles {
  std::filesystem::path truth, mobility, statics, world;
};

/// Writes truth (cumulative, NYT schema), mobility, statics and the world description.
inline SyntheticFiles write_synthetic(const std::filesystem::path& dir, const SyntheticWorld& world, int days) {
  const auto series = generate_synthetic(world, days);
  SyntheticFiles f{dir / "truth.csv", dir / "mobility.csv", dir / "statics.csv", dir / "world.json"};
  data::write_ground_truth(f.truth, series);
  data::write_mobility(f.mobility, series);
  data::write_static_features(f.statics, world_statics(world));
  save_json(f.world, world_to_json(world));
  return f;
}

}  // namespace epiq::pipeline
