#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "epiq/common/error.hpp"

namespace epiq::seirqd {

/// Compartment counts.
struct SeirQdState {
  double S = 0, E = 0, I = 0, Q = 0, R = 0, D = 0;

  [[nodiscard]] double total() const { return S + E + I + Q + R + D; }
  /// Cumulative confirmed cases: everyone who has entered quarantine.
  [[nodiscard]] double confirmed() const { return Q + R + D; }

  SeirQdState operator+(const SeirQdState& o) const {
    return {S + o.S, E + o.E, I + o.I, Q + o.Q, R + o.R, D + o.D};
  }
  SeirQdState operator*(double k) const { return {S * k, E * k, I * k, Q * k, R * k, D * k}; }
};

/// Rates are per day. E0 and I0 are fitted; Q0, R0 and D0 anchor the start of the
/// trajectory to the observed counts on the first training day.
struct SeirQdParams {
  double beta = 0.5;
  double sigma = 0.2;
  double q_rate = 0.1;
  double gamma = 0.05;
  double mu = 0.01;
  double E0 = 0.0;
  double I0 = 0.0;
  double Q0 = 0.0;
  double R0 = 0.0;
  double D0 = 0.0;
};

/// dS = -beta S I / N, dE = beta S I / N - sigma E, dI = sigma E - q I,
/// dQ = q I - (gamma + mu) Q, dR = gamma Q, dD = mu Q.
inline SeirQdState seirqd_rhs(const SeirQdState& x, const SeirQdParams& p, double N) {
  if (!(N > 0.0)) throw std::invalid_argument("population must be positive");
  const double infection = p.beta * x.S * x.I / N;
  const double onset = p.sigma * x.E;
  const double quarantine = p.q_rate * x.I;
  const double recovery = p.gamma * x.Q;
  const double death = p.mu * x.Q;
  return {-infection,
          infection - onset,
          onset - quarantine,
          quarantine - recovery - death,
          recovery,
          death};
}

inline SeirQdState initial_state(const SeirQdParams& p, double N) {
  SeirQdState x{0.0, p.E0, p.I0, p.Q0, p.R0, p.D0};
  x.S = N - (x.E + x.I + x.Q + x.R + x.D);
  if (x.S < 0.0) throw std::invalid_argument("initial compartments exceed the population");
  return x;
}

inline constexpr int kStepsPerDay = 4;

/// Fixed-step RK4 trajectory sampled once per day: element t is the state at day t,
/// t = 0 ... days. Negative round-off is clamped to zero after each step.
inline std::vector<SeirQdState> integrate(const SeirQdParams& p, double N, int days,
                                          int steps_per_day = kStepsPerDay) {
  if (days < 1) throw std::invalid_argument("horizon must be >= 1 day");
  if (!(N > 0.0)) throw std::invalid_argument("population must be positive");
  const double h = 1.0 / steps_per_day;
  std::vector<SeirQdState> out;
  out.reserve(static_cast<std::size_t>(days) + 1);
  SeirQdState x = initial_state(p, N);
  out.push_back(x);
  for (int day = 0; day < days; ++day) {
    for (int k = 0; k < steps_per_day; ++k) {
      const SeirQdState k1 = seirqd_rhs(x, p, N);
      const SeirQdState k2 = seirqd_rhs(x + k1 * (h / 2), p, N);
      const SeirQdState k3 = seirqd_rhs(x + k2 * (h / 2), p, N);
      const SeirQdState k4 = seirqd_rhs(x + k3 * h, p, N);
      x = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
      for (double* c : {&x.S, &x.E, &x.I, &x.Q, &x.R, &x.D}) {
        if (!std::isfinite(*c)) {
          throw NumericalError("SEIR-QD integration produced a non-finite state at day " +
                               std::to_string(day) + " substep " + std::to_string(k));
        }
        if (*c < 0.0) *c = 0.0;
      }
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace epiq::seirqd
