#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace epiq::optim {

struct NelderMeadOptions {
  int max_iters = 2000;
  /// Converged when the spread of simplex values is below ftol * (|f_best| + 1e-12)
  /// and the simplex diameter is below xtol.
  double ftol = 1e-10;
  double xtol = 1e-8;
};

struct NelderMeadResult {
  std::vector<double> x;
  double fx = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  /// Best objective value after every iteration.
  std::vector<double> trace;
};

/// Box-constrained Nelder-Mead: every trial point is projected onto [lower, upper].
/// Non-finite objective values are treated as +inf.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const std::vector<double>& lower,
                                    const std::vector<double>& upper, const std::vector<double>& step,
                                    const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  NelderMeadResult res;
  auto project = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  };
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  project(x0);
  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& v = simplex[i + 1];
    v[i] += step[i];
    if (v[i] > upper[i]) v[i] = x0[i] - step[i];
    project(v);
  }
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto along = [&](double t, std::vector<double>& out) {
    // out = centroid + t * (centroid - worst)
    for (std::size_t i = 0; i < n; ++i) out[i] = centroid[i] + t * (centroid[i] - simplex[order[n]][i]);
    project(out);
  };

  for (res.iterations = 0; res.iterations < opt.max_iters; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const std::size_t best = order[0], worst = order[n], second = order[n - 1];

    double diameter = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        diameter = std::max(diameter, std::abs(simplex[order[k]][i] - simplex[best][i]));
      }
    }
    if (std::abs(fv[worst] - fv[best]) <= opt.ftol * (std::abs(fv[best]) + 1e-12) &&
        diameter <= opt.xtol) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[order[k]][i];
    }
    for (auto& c : centroid) c /= static_cast<double>(n);

    along(1.0, trial);
    const double fr = eval(trial);
    if (fr < fv[best]) {
      along(2.0, trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        simplex[worst] = trial2;
        fv[worst] = fe;
      } else {
        simplex[worst] = trial;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      simplex[worst] = trial;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      along(outside ? 0.5 : -0.5, trial2);
      const double fc = eval(trial2);
      if (fc < (outside ? fr : fv[worst])) {
        simplex[worst] = trial2;
        fv[worst] = fc;
      } else {
        for (std::size_t k = 1; k <= n; ++k) {
          auto& v = simplex[order[k]];
          for (std::size_t i = 0; i < n; ++i) v[i] = simplex[best][i] + 0.5 * (v[i] - simplex[best][i]);
          fv[order[k]] = eval(v);
        }
      }
    }
    res.trace.push_back(*std::min_element(fv.begin(), fv.end()));
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  res.x = simplex[best];
  res.fx = fv[best];
  return res;
}

}  // namespace epiq::optim
