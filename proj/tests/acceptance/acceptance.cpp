// Acceptance run: one PASS/FAIL line per criterion with its tolerance and runtime budget.
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include <CLI11.hpp>

#include "epiq/epiq.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace epiq;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string num(double v, int digits = 3) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

// ------------------------------------------------------------------ 1

Outcome metric_oracle() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0, 200);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    QuantileVector q;
    for (auto& v : q) v = u(rng);
    std::sort(q.begin(), q.end());
    const double y = i % 10 == 0 ? 0.0 : std::round(u(rng));
    worst = std::max(worst, std::abs(metrics::pinball_county(y, q) - oracle::pinball9(y, q)));
  }
  return {worst <= 1e-12, "1000 cells, max |diff| " + num(worst) + " <= 1e-12"};
}

// ------------------------------------------------------------------ 2

seirqd::SeirQdParams random_seir(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  seirqd::SeirQdParams p;
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

Outcome conservation() {
  std::mt19937_64 rng(202);
  int dump_bad = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(20 + rng() % 200);
    double cum = 0;
    for (auto& x : v) {
      const int kind = static_cast<int>(rng() % 20);
      x = kind == 0 ? static_cast<double>(rng() % 500) : kind == 1 ? -static_cast<double>(rng() % 5) : static_cast<double>(rng() % 8);
      if (cum + x < 0) x = -cum;
      cum += x;
    }
    const auto out = data::redistribute_dumps(std::span<const double>(v), data::DumpConfig{});
    if (std::accumulate(out.begin(), out.end(), 0.0) != std::accumulate(v.begin(), v.end(), 0.0)) ++dump_bad;
  }
  double worst = 0;
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_seir(rng);
    const double N = 1e4 + 1e6 * u(rng);
    for (const auto& x : seirqd::integrate(p, N, 120)) worst = std::max(worst, std::abs(x.total() - N) / N);
  }
  return {dump_bad == 0 && worst <= 1e-6, "dump totals off in " + std::to_string(dump_bad) +
                                               "/100 series; SEIR max |sum - N| / N " + num(worst) + " <= 1e-6"};
}

// ------------------------------------------------------------------ 3

Outcome gradient_check() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<neural::NetLoss> losses{neural::NetLoss::mse()};
  for (double q : kQuantileLevels) losses.push_back(neural::NetLoss::pinball(q));
  double worst = 0;
  std::size_t checked = 0;
  int empty = 0;
  for (int t = 0; t < 100; ++t) {
    auto net = neural::make_net({5, 8, 6, 1}, {0.1, 0.2, 0.2}, rng());
    for (int i = 0; i < 5; ++i) {
      net.scaling.input_mean(i) = u(rng);
      net.scaling.input_scale(i) = 0.5 + std::abs(u(rng));
    }
    net.scaling.target_offset = u(rng);
    net.scaling.target_scale = 0.5 + std::abs(u(rng));
    std::vector<double> x(5);
    for (auto& v : x) v = u(rng);
    const bool train_mode = t % 2 == 0;
    const std::uint64_t mask_seed = rng();
    const double yhat = neural::forward(net, x, train_mode, mask_seed).prediction[0];
    const double y = yhat + (u(rng) > 0 ? 1 : -1) * (2e-3 + std::abs(u(rng)));
    for (const auto& loss : losses) {
      const auto rep = gradcheck::check(net, x, y, loss, train_mode, mask_seed);
      worst = std::max(worst, rep.max_rel_error);
      checked += rep.checked;
      if (rep.checked == 0) ++empty;
    }
  }
  return {worst < 1e-4 && empty == 0, "100 points x 10 losses, " + std::to_string(checked) +
                                          " parameters, max rel error " + num(worst) + " < 1e-4"};
}

// ------------------------------------------------------------------ 4

Outcome nb_exactness() {
  int bad = 0;
  for (double mu : {0.1, 1.0, 10.0, 100.0}) {
    for (double phi : {0.5, 5.0, 50.0}) {
      const auto q = quantilegen::nb_quantiles({mu, phi});
      for (std::size_t j = 0; j < kNumQuantiles; ++j) {
        const double level = kQuantileLevels[j];
        if (!(oracle::nb_cdf(mu, phi, q[j] - 1) < level && level <= oracle::nb_cdf(mu, phi, q[j]) + 1e-12)) ++bad;
      }
    }
  }
  Rng rng(404);
  const quantilegen::NbSpec spec{10.0, 5.0};
  const int n = 400000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = quantilegen::nb_sample(spec, rng);
    s += x;
    s2 += x * x;
  }
  const double m = s / n, v = s2 / n - m * m;
  const double em = std::abs(m / spec.mu - 1), ev = std::abs(v / spec.variance() - 1);
  return {bad == 0 && em <= 0.02 && ev <= 0.02, std::to_string(bad) + "/108 grid cells off; MC mean err " + num(em) +
                                                    ", var err " + num(ev) + " <= 0.02"};
}

// ------------------------------------------------------------------ 5

Outcome tree_oracle() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(-3, 3);
  int mismatches = 0;
  const std::vector<std::size_t> features{0, 1};
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 7;
    const bool ints = t % 2 == 0;
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({ints ? static_cast<double>(rng() % 4) : u(rng), ints ? static_cast<double>(rng() % 4) : u(rng)});
      y.push_back(ints ? static_cast<double>(rng() % 5) : u(rng));
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const int min_leaf = 1 + static_cast<int>(rng() % 2);
    const auto X = DenseMatrix::from_rows(rows);
    const auto greedy = trees::best_split(X, y, idx, trees::TreeLoss::mse(), min_leaf, features);
    const auto cands = oracle::all_splits(rows, y, min_leaf);
    double best = 0;
    for (const auto& c : cands) best = std::max(best, c.gain);
    const double tol = 1e-9 * (1 + oracle::sse(y));
    if (best <= 1e-12 * (1 + oracle::sse(y))) {
      if (greedy.found) ++mismatches;
      continue;
    }
    bool listed = false;
    for (const auto& c : cands) {
      listed = listed || (c.feature == greedy.feature && c.threshold == greedy.threshold && std::abs(c.gain - best) <= tol);
    }
    if (!greedy.found || std::abs(greedy.gain - best) > tol || !listed) ++mismatches;
  }
  int increases = 0, fits = 0;
  for (int t = 0; t < 6; ++t) {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 80; ++i) {
      rows.push_back({u(rng), u(rng), u(rng)});
      y.push_back(std::max(0.0, 3 + rows.back()[0] * 2 + u(rng)));
    }
    trees::GbdtConfig cfg;
    cfg.n_rounds = 40;
    cfg.n_runs = 2;
    cfg.seed = static_cast<std::uint64_t>(t);
    const auto m = trees::fit_county_gbdt("01001", DenseMatrix::from_rows(rows), y, cfg);
    for (const auto& runs : m.runs) {
      for (const auto& r : runs) {
        ++fits;
        for (std::size_t k = 1; k < r.loss_trace.size(); ++k) {
          if (r.loss_trace[k] > r.loss_trace[k - 1] + 1e-12) ++increases;
        }
      }
    }
  }
  return {mismatches == 0 && increases == 0, std::to_string(mismatches) + "/200 split mismatches; " +
                                                 std::to_string(increases) + " loss increases over " +
                                                 std::to_string(fits) + " boosting fits"};
}

// ------------------------------------------------------------------ 6

Outcome gp_oracle() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(0, 1), w(-2, 2);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const gp::RqKernelParams p{0.01 + u(rng), 0.1 + 2 * u(rng), 0.5 + 10 * u(rng), 0.2 + 5 * u(rng), 0.01 + u(rng)};
    const std::size_t n = 1 + rng() % 5;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(static_cast<double>(i) * 1.5 + w(rng));
      ys.push_back(w(rng));
    }
    const double xstar = 3 * w(rng);
    const auto ref = oracle::gp_dense({p.const_value, p.amplitude, p.length_scale, p.alpha_mix, p.noise}, xs, ys, xstar);
    const auto post = gp::condition(p, xs, ys);
    worst = std::max({worst, std::abs(gp::log_marginal_likelihood(p, xs, ys) - ref.lml),
                      std::abs(post.mean(xstar) - ref.mean), std::abs(post.variance(xstar) - ref.variance)});
  }
  int worse = 0, restarts = 0;
  std::normal_distribution<double> g(0, 1);
  for (int t = 0; t < 4; ++t) {
    std::vector<double> xs, ys;
    for (int i = 0; i < 40; ++i) {
      xs.push_back(i);
      ys.push_back(std::sin(i / (3.0 + t)) * (1 + t) + 0.2 * g(rng));
    }
    gp::OptimizeConfig cfg;
    cfg.restarts = 4;
    cfg.seed = static_cast<std::uint64_t>(t);
    const auto r = gp::optimize_hyperparams(xs, ys, gp::RqKernelParams{}, cfg);
    for (const auto& rec : r.restarts) {
      ++restarts;
      if (rec.final_lml < rec.initial_lml) ++worse;
    }
  }
  return {worst <= 1e-8 && worse == 0 && restarts > 0,
          "200 cases, max |diff| " + num(worst) + " <= 1e-8; " + std::to_string(worse) + "/" +
              std::to_string(restarts) + " restarts ended below their start"};
}

// ------------------------------------------------------------------ 7

Outcome clustering_oracle() {
  using namespace clustering;
  std::mt19937_64 rng(707);
  int dmdt_bad = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(2 + rng() % 150);
    for (auto& x : v) x = static_cast<double>(rng() % 40) - (t % 3 == 0 ? 20.0 : 0.0);
    const auto h = dmdt_histogram(v);
    const auto ref = oracle::dmdt(v);
    for (std::size_t r = 0; r < kBins; ++r) {
      for (std::size_t c = 0; c < kBins; ++c) dmdt_bad += h.grid[r][c] != ref[r][c];
    }
  }
  double pool_err = 0;
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    DmDtHistogram h;
    for (auto& r : h.grid) {
      for (auto& c : r) c = 10 * u(rng);
    }
    const auto p = pool_and_flatten(h);
    const auto ref = oracle::pool(h.grid);
    for (std::size_t i = 0; i < 16; ++i) pool_err = std::max(pool_err, std::abs(p[i] - ref[i]));
  }
  auto features = [](const std::vector<PooledVector>& v) {
    std::vector<ClusterFeature> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back({std::to_string(10000 + i), v[i], false});
    return out;
  };
  int inertia_up = 0;
  for (int t = 0; t < 20; ++t) {
    std::vector<PooledVector> v(60);
    for (auto& x : v) {
      for (auto& c : x) c = u(rng) * u(rng);
    }
    KMeansConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(t);
    const auto a = kmeans(features(v), cfg);
    for (std::size_t k = 1; k < a.inertia_trace.size(); ++k) inertia_up += a.inertia_trace[k] > a.inertia_trace[k - 1] + 1e-12;
  }
  int blob_bad = 0;
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  for (int t = 0; t < 20; ++t) {
    std::vector<PooledVector> v;
    std::vector<int> blob;
    for (int i = 0; i < 30; ++i) {
      PooledVector x{};
      const int b = static_cast<int>(rng() % 2);
      for (auto& c : x) c = b + jitter(rng);
      v.push_back(x);
      blob.push_back(b);
    }
    KMeansConfig cfg;
    cfg.k = 2;
    cfg.seed = static_cast<std::uint64_t>(t);
    const auto a = kmeans(features(v), cfg);
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = 0; j < v.size(); ++j) blob_bad += (a.labels[i] == a.labels[j]) != (blob[i] == blob[j]);
    }
  }
  return {dmdt_bad == 0 && pool_err <= 1e-14 && inertia_up == 0 && blob_bad == 0,
          "dmdt cell mismatches " + std::to_string(dmdt_bad) + " over 50 series; pooling max err " + num(pool_err) +
              "; inertia increases " + std::to_string(inertia_up) + "; blob pair mismatches " + std::to_string(blob_bad)};
}

// ------------------------------------------------------------------ 8

Outcome seir_round_trip() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_beta = 0, worst_mu = 0;
  int off = 0;
  for (int w = 0; w < 10; ++w) {
    seirqd::SeirQdParams p;
    p.beta = 0.3 + 0.25 * u(rng);
    p.sigma = 0.2 + 0.15 * u(rng);
    p.q_rate = 0.1 + 0.08 * u(rng);
    p.gamma = 0.05 + 0.05 * u(rng);
    p.mu = 0.002 + 0.02 * u(rng);
    p.E0 = std::round(10 + 40 * u(rng));
    p.I0 = std::round(5 + 15 * u(rng));
    const double N = std::round(1e5 + 4e5 * u(rng));
    const int days = 100;
    const auto traj = seirqd::integrate(p, N, days - 1);
    data::CountySeries s;
    s.fips = "01001";
    s.start = Date::from_ymd(2020, 3, 1);
    for (int t = 0; t < days; ++t) {
      const auto i = static_cast<std::size_t>(t);
      s.daily_deaths.push_back(t ? traj[i].D - traj[i - 1].D : traj[0].D);
      s.daily_cases.push_back(t ? traj[i].confirmed() - traj[i - 1].confirmed() : traj[0].confirmed());
    }
    s.mobility.assign(s.daily_deaths.size(), std::nullopt);
    seirqd::FitConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(w);
    const auto r = seirqd::fit(s, N, cfg);
    const double eb = std::abs(r.params.beta / p.beta - 1), em = std::abs(r.params.mu / p.mu - 1);
    worst_beta = std::max(worst_beta, eb);
    worst_mu = std::max(worst_mu, em);
    off += eb > 0.05 || em > 0.05;
  }
  return {off == 0, "10 worlds, max rel error beta " + num(worst_beta) + ", mu " + num(worst_mu) + " <= 0.05"};
}

// ------------------------------------------------------------------ 9

struct Bench {
  std::filesystem::path cli, config, work;
};

int sh(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    out[std::filesystem::relative(e.path(), root).generic_string()] = os.str();
  }
  return out;
}

Outcome synthetic_end_to_end(const Bench& b) {
  std::filesystem::remove_all(b.work);
  std::filesystem::create_directories(b.work);
  const std::string cd = "cd " + quoted(b.work) + " && ";
  const std::string log = " >>" + quoted(b.work / "cli.log") + " 2>&1";
  const std::string base = quoted(b.cli);
  if (sh(cd + base + " synth --config " + quoted(b.config) + " --out world" + log) != 0) {
    return {false, "synth exited nonzero, see " + (b.work / "cli.log").string()};
  }
  for (const char* out : {"run_a", "run_b"}) {
    if (sh(cd + base + " run --config " + quoted(b.config) + " --out out" + log) != 0) {
      return {false, "run exited nonzero, see " + (b.work / "cli.log").string()};
    }
    std::filesystem::rename(b.work / "out", b.work / out);
  }
  const auto a = tree_contents(b.work / "run_a"), c = tree_contents(b.work / "run_b");
  bool identical = a.size() == c.size();
  for (const auto& [path, bytes] : a) identical = identical && c.contains(path) && c.at(path) == bytes;

  std::map<std::string, double> score;
  std::ifstream in(b.work / "run_a" / "evaluate" / "table.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto f = csv::split_line(line);
    if (f.size() >= 2) score[f[0]] = std::stod(f[1]);
  }
  if (!score.contains("ensemble") || !score.contains("zeros")) return {false, "evaluation table is incomplete"};
  double best = std::numeric_limits<double>::infinity();
  bool below_zeros = true;
  std::string models;
  for (const auto& [name, v] : score) {
    if (name == "ensemble" || name == "zeros") continue;
    best = std::min(best, v);
    below_zeros = below_zeros && v < score["zeros"];
    models += " " + name + "=" + num(v, 4);
  }
  const bool dominant = score["ensemble"] <= 1.05 * best;
  return {identical && dominant && below_zeros,
          std::string(identical ? "reruns byte-identical" : "reruns differ") + " (" + std::to_string(a.size()) +
              " files); ensemble " + num(score["ensemble"], 4) + " vs 1.05 x best " + num(1.05 * best, 4) +
              "; zeros " + num(score["zeros"], 4) + ";" + models};
}

// ------------------------------------------------------------------ 10

Outcome leakage_guard() {
  std::mt19937_64 rng(1010);
  int wrong = 0;
  const std::vector<data::CountySeries> series{[] {
    data::CountySeries s;
    s.fips = "01001";
    s.start = Date::from_ymd(2020, 3, 1);
    s.daily_deaths.assign(120, 1.0);
    s.daily_cases.assign(120, 1.0);
    s.mobility.assign(120, std::nullopt);
    return s;
  }()};
  for (int t = 0; t < 2000; ++t) {
    const int h = 1 + static_cast<int>(rng() % 40);
    const int lag = 1 + static_cast<int>(rng() % 80);
    std::vector<int> lags{h + 1 + static_cast<int>(rng() % 10), lag};
    std::shuffle(lags.begin(), lags.end(), rng);
    bool rejected = false;
    try {
      data::validate_lags(lags, h);
    } catch (const ConfigError&) {
      rejected = true;
    }
    bool layout_rejected = false;
    try {
      (void)data::make_layout(series, {}, lags, h, 0);
    } catch (const ConfigError&) {
      layout_rejected = true;
    }
    const bool leaks = lag < h + 1;
    wrong += rejected != leaks || layout_rejected != leaks;
  }
  return {wrong == 0, std::to_string(wrong) + "/2000 lag sets misjudged"};
}

}  // namespace

int main(int argc, char** argv) {
  Bench bench;
  bench.config = EPIQ_BENCHMARK_CONFIG;
  std::filesystem::path work = std::filesystem::temp_directory_path() / "epiq_acceptance";
  std::vector<int> only;
  CLI::App app{"epiq acceptance checks"};
  app.add_option("--cli", bench.cli, "path to the epiq executable")->required();
  app.add_option("--config", bench.config, "benchmark config")->capture_default_str();
  app.add_option("--work", work, "scratch directory")->capture_default_str();
  app.add_option("--only", only, "criterion ids to run (default: all)");
  CLI11_PARSE(app, argc, argv);
  bench.cli = std::filesystem::absolute(bench.cli);
  bench.config = std::filesystem::absolute(bench.config);
  bench.work = std::filesystem::absolute(work) / "benchmark";

  const std::vector<Criterion> criteria{
      {1, "metric oracle", 1, metric_oracle},
      {2, "conservation", 10, conservation},
      {3, "gradient check", 30, gradient_check},
      {4, "NB exactness", 30, nb_exactness},
      {5, "tree oracle", 60, tree_oracle},
      {6, "GP oracle", 30, gp_oracle},
      {7, "clustering oracle", 10, clustering_oracle},
      {8, "SEIR round-trip", 300, seir_round_trip},
      {9, "synthetic end-to-end", 900, [&] { return synthetic_end_to_end(bench); }},
      {10, "leakage guard", 1, leakage_guard},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.ok && secs < c.budget_s;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << std::setw(2) << c.id << ". " << c.name << ": " << o.detail
              << " [" << std::fixed << std::setprecision(2) << secs << " s < " << std::setprecision(0) << c.budget_s
              << " s]" << std::defaultfloat << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
