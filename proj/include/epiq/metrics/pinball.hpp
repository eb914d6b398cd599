#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "epiq/common/quantile.hpp"

namespace epiq::metrics {

/// Quantile (pinball) loss of prediction `yhat` for truth `y` at level q.
inline double pinball_q(double y, double yhat, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("quantile level must lie in (0,1), got " + std::to_string(q));
  }
  return y >= yhat ? (y - yhat) * q : (yhat - y) * (1.0 - q);
}

/// Mean pinball loss over the nine standard levels.
inline double pinball_county(double y, std::span<const double> qf) {
  if (qf.size() != kNumQuantiles) {
    throw std::invalid_argument("quantile forecast must have 9 entries, got " +
                                std::to_string(qf.size()));
  }
  double total = 0.0;
  for (std::size_t j = 0; j < kNumQuantiles; ++j) total += pinball_q(y, qf[j], kQuantileLevels[j]);
  return total / static_cast<double>(kNumQuantiles);
}

inline double pinball_county(double y, const QuantileVector& qf) {
  return pinball_county(y, std::span<const double>(qf.data(), qf.size()));
}

/// d pinball_q / d yhat. At the kink the y < yhat branch is used.
inline double pinball_grad(double y, double yhat, double q) { return y > yhat ? -q : 1.0 - q; }

}  // namespace epiq::metrics
