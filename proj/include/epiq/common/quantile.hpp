#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace epiq {

inline constexpr std::size_t kNumQuantiles = 9;
inline constexpr std::array<double, kNumQuantiles> kQuantileLevels{0.1, 0.2, 0.3, 0.4, 0.5,
                                                                   0.6, 0.7, 0.8, 0.9};

/// Quantile estimates ordered by level 0.1 ... 0.9.
using QuantileVector = std::array<double, kNumQuantiles>;

/// Removes quantile crossings by sorting ascending.
inline void monotonize(QuantileVector& q) { std::sort(q.begin(), q.end()); }

inline QuantileVector monotonized(QuantileVector q) {
  monotonize(q);
  return q;
}

/// Index of the empirical q-quantile order statistic in a sorted sample of size n:
/// the ceil(q*n)-th smallest value. This order statistic minimizes the summed
/// pinball loss over the sample.
inline std::size_t quantile_rank(double q, std::size_t n) {
  if (n == 0) throw std::invalid_argument("quantile of empty sample");
  const double pos = std::ceil(q * static_cast<double>(n) - 1e-9);
  const auto k = static_cast<std::size_t>(std::max(1.0, pos));
  return std::min(k, n) - 1;
}

/// Empirical q-quantile; reorders `values`.
inline double empirical_quantile_inplace(std::span<double> values, double q) {
  const std::size_t k = quantile_rank(q, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

inline double empirical_quantile(std::vector<double> values, double q) {
  return empirical_quantile_inplace(values, q);
}

/// All nine empirical quantiles of a sample.
inline QuantileVector empirical_quantiles(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  QuantileVector out{};
  for (std::size_t j = 0; j < kNumQuantiles; ++j) {
    out[j] = values[quantile_rank(kQuantileLevels[j], values.size())];
  }
  return out;
}

}  // namespace epiq
