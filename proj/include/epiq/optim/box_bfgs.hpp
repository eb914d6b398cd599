#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace epiq::optim {

struct BoxBfgsOptions {
  int max_iters = 100;
  /// Stop when the projected gradient's infinity norm falls below this.
  double gtol = 1e-5;
  /// Stop when an accepted step improves f by less than ftol * (|f| + 1).
  double ftol = 1e-10;
  /// Central-difference step.
  double fd_step = 1e-5;
};

struct BoxBfgsResult {
  std::vector<double> x;
  double fx = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> trace;
};

/// Projected quasi-Newton minimization on a box with central-difference gradients.
/// Every accepted step satisfies an Armijo decrease, so the trace is non-increasing.
/// Falls back to steepest descent whenever the BFGS direction fails to descend.
inline BoxBfgsResult box_bfgs(const std::function<double(const std::vector<double>&)>& f,
                              std::vector<double> x, const std::vector<double>& lower,
                              const std::vector<double>& upper, const BoxBfgsOptions& opt = {}) {
  const std::size_t n = x.size();
  BoxBfgsResult res;
  auto eval = [&](const std::vector<double>& p) {
    ++res.evaluations;
    const double v = f(p);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  auto project = [&](std::vector<double>& p) {
    for (std::size_t i = 0; i < n; ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
  };
  auto gradient = [&](std::vector<double> p, double fp) {
    std::vector<double> g(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = p[i];
      const double hi = std::min(opt.fd_step, upper[i] - xi), lo = std::min(opt.fd_step, xi - lower[i]);
      double fplus = fp, fminus = fp;
      if (hi > 0) {
        p[i] = xi + hi;
        fplus = eval(p);
      }
      if (lo > 0) {
        p[i] = xi - lo;
        fminus = eval(p);
      }
      p[i] = xi;
      if (hi > 0 || lo > 0) g[i] = (fplus - fminus) / (hi + lo);
      if (!std::isfinite(g[i])) g[i] = 0.0;
    }
    return g;
  };
  auto projected_grad_norm = [&](const std::vector<double>& p, const std::vector<double>& g) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double moved = std::clamp(p[i] - g[i], lower[i], upper[i]) - p[i];
      m = std::max(m, std::abs(moved));
    }
    return m;
  };

  project(x);
  double fx = eval(x);
  std::vector<double> g = gradient(x, fx);
  std::vector<double> H(n * n, 0.0);
  auto reset_h = [&] {
    std::fill(H.begin(), H.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
  };
  reset_h();

  for (res.iterations = 0; res.iterations < opt.max_iters; ++res.iterations) {
    if (!std::isfinite(fx) || projected_grad_norm(x, g) < opt.gtol) {
      res.converged = std::isfinite(fx);
      break;
    }
    // Variables pinned at a bound with the gradient pushing outward are frozen.
    std::vector<char> active(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      active[i] = (x[i] <= lower[i] && g[i] > 0) || (x[i] >= upper[i] && g[i] < 0);
    }
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (!active[j]) d[i] -= H[i * n + j] * g[j];
      }
    }
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += d[i] * g[i];
    if (!(slope < 0.0)) {
      reset_h();
      for (std::size_t i = 0; i < n; ++i) d[i] = active[i] ? 0.0 : -g[i];
    }

    double t = 1.0;
    std::vector<double> xn(n);
    double fn = fx;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + t * d[i];
      project(xn);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (xn[i] - x[i]);
      fn = eval(xn);
      if (fn <= fx + 1e-4 * decrease && fn < fx) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
    const std::vector<double> gn = gradient(xn, fn);
    std::vector<double> s(n), y(n);
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xn[i] - x[i];
      y[i] = gn[i] - g[i];
      sy += s[i] * y[i];
    }
    if (sy > 1e-12) {
      std::vector<double> Hy(n, 0.0);
      double yHy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) Hy[i] += H[i * n + j] * y[j];
        yHy += y[i] * Hy[i];
      }
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          H[i * n + j] += (1.0 + yHy * rho) * rho * s[i] * s[j] - rho * (Hy[i] * s[j] + s[i] * Hy[j]);
        }
      }
    }
    const double improvement = fx - fn;
    x = xn;
    g = gn;
    fx = fn;
    res.trace.push_back(fx);
    if (improvement < opt.ftol * (std::abs(fx) + 1.0)) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.fx = fx;
  return res;
}

}  // namespace epiq::optim
