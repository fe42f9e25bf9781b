#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "surplus.hpp"

namespace bassre {

/// Dvoretzky-Kiefer-Wolfowitz band: P(KS > eps) <= alpha for n samples.
inline double dkw_epsilon(std::size_t n, double alpha) {
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

/// Kolmogorov-Smirnov distance between the empirical law of `sorted` and a reference
/// law given by its right-continuous CDF and the CDF's left limit.
inline double ks_distance(std::span<const double> sorted, const std::function<double(double)>& cdf,
                          const std::function<double(double)>& cdf_left) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double x = sorted[i];
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == x) ++j;
    const double emp_left = static_cast<double>(i) / n;
    const double emp_right = static_cast<double>(j) / n;
    d = std::max({d, std::abs(emp_right - cdf(x)), std::abs(emp_left - cdf_left(x))});
    i = j;
  }
  return d;
}

/// KS distance between two empirical (uniform-weight) laws, e.g. a sample and the
/// discrete law placing mass 1/n on each quantile-grid value.
inline double ks_distance_discrete(std::span<const double> sorted_a, std::span<const double> sorted_b) {
  const double na = static_cast<double>(sorted_a.size());
  const double nb = static_cast<double>(sorted_b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sorted_a.size() || j < sorted_b.size()) {
    double x;
    if (j >= sorted_b.size() || (i < sorted_a.size() && sorted_a[i] <= sorted_b[j])) x = sorted_a[i];
    else x = sorted_b[j];
    while (i < sorted_a.size() && sorted_a[i] <= x) ++i;
    while (j < sorted_b.size() && sorted_b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline double ks_distance_to_grid(std::span<const double> sorted, const QuantileGrid& grid) {
  return ks_distance_discrete(sorted, grid.span());
}

}  // namespace bassre
