#pragma once

// Euclidean projections onto the convex sets used by the solver.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "core.hpp"
#include "riskfun.hpp"

namespace bassre {

/// Least-squares non-decreasing fit (pool adjacent violators). Preserves the sum.
inline std::vector<double> isotonic_regression(std::span<const double> y) {
  std::vector<double> level;
  std::vector<std::size_t> count;
  level.reserve(y.size());
  count.reserve(y.size());
  for (double v : y) {
    level.push_back(v);
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const std::size_t c1 = count[count.size() - 2], c2 = count.back();
      const double merged = (level[level.size() - 2] * c1 + level.back() * c2) / static_cast<double>(c1 + c2);
      level.pop_back();
      count.pop_back();
      level.back() = merged;
      count.back() = c1 + c2;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t b = 0; b < level.size(); ++b) out.insert(out.end(), count[b], level[b]);
  return out;
}

/// Projection onto {q : q_{i+1} - q_i <= q_m[i+1] - q_m[i]}, i.e. q - q_m non-increasing.
inline std::vector<double> project_dominated_increments(std::span<const double> y, std::span<const double> q_m) {
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = q_m[i] - y[i];
  auto iso = isotonic_regression(r);
  for (std::size_t i = 0; i < y.size(); ++i) iso[i] = q_m[i] - iso[i];
  return iso;
}

namespace detail {

// prox of mu*(beta ||z|| - a.z) at y: shrink(y + mu a, mu beta)
inline void norm_cone_prox(std::span<const double> y, std::span<const double> a, double beta, double mu,
                           std::vector<double>& z) {
  z.resize(y.size());
  double nrm = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    z[i] = y[i] + mu * a[i];
    nrm += z[i] * z[i];
  }
  nrm = std::sqrt(nrm);
  const double scale = nrm > 0.0 ? std::max(0.0, 1.0 - mu * beta / nrm) : 0.0;
  for (double& v : z) v *= scale;
}

}  // namespace detail

/// Projection onto {x : alpha ||x - anchor|| <= a.x - b}.
///
/// With y = x - anchor the KKT point is z(mu) = shrink(y + mu a, mu alpha) for the
/// multiplier mu >= 0 solving g(z(mu)) = 0, g(z) = alpha ||z|| - a.z + b'. The map
/// mu -> g(z(mu)) is non-increasing, so mu is found by bracketing and bisection.
inline std::vector<double> project_norm_cone(const NormCone& cone, std::span<const double> x, double tol = 1e-12) {
  const std::size_t n = x.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - cone.anchor[i];
  const double b_shift = cone.b - dot(cone.a, cone.anchor);
  auto g = [&](const std::vector<double>& z) { return cone.alpha * norm2(z) - dot(cone.a, z) + b_shift; };
  if (g(y) <= 0.0) return std::vector<double>(x.begin(), x.end());

  const double a_norm = norm2(cone.a);
  if (a_norm == 0.0) throw Error("norm cone with zero normal has no interior");
  std::vector<double> z;
  double lo = 0.0, hi = 1.0 / (a_norm * a_norm);
  for (int it = 0;; ++it) {
    detail::norm_cone_prox(y, cone.a, cone.alpha, hi, z);
    if (g(z) <= 0.0) break;
    lo = hi;
    hi *= 2.0;
    if (it > 200) throw Error("norm cone is empty (alpha >= ||a||)");
  }
  const double scale = std::max({1.0, norm2(y), std::abs(b_shift)});
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    detail::norm_cone_prox(y, cone.a, cone.alpha, mid, z);
    const double gm = g(z);
    if (gm <= 0.0) hi = mid;
    else lo = mid;
    if (std::abs(gm) <= tol * scale && gm <= 0.0) break;
    if (hi - lo <= 1e-17 * hi) break;
  }
  detail::norm_cone_prox(y, cone.a, cone.alpha, hi, z);
  for (std::size_t i = 0; i < n; ++i) z[i] += cone.anchor[i];
  return z;
}

inline std::vector<double> project(const ConvexSetDescriptor& set, std::span<const double> q) {
  return std::visit(
      [&](const auto& s) -> std::vector<double> {
        using T = std::decay_t<decltype(s)>;
        std::vector<double> out(q.begin(), q.end());
        if constexpr (std::is_same_v<T, Hyperplane> || std::is_same_v<T, Halfspace>) {
          require(s.a.size() == q.size(), "projection: dimension mismatch");
          const double aa = dot(s.a, s.a);
          if (aa == 0.0) return out;
          double excess = dot(s.a, q) - s.b;
          if constexpr (std::is_same_v<T, Halfspace>) excess = std::max(0.0, excess);
          if (excess == 0.0) return out;
          const double f = excess / aa;
          for (std::size_t i = 0; i < q.size(); ++i) out[i] -= f * s.a[i];
          return out;
        } else if constexpr (std::is_same_v<T, Ball>) {
          require(s.center.size() == q.size(), "projection: dimension mismatch");
          double d = 0.0;
          for (std::size_t i = 0; i < q.size(); ++i) d += (q[i] - s.center[i]) * (q[i] - s.center[i]);
          d = std::sqrt(d);
          if (d <= s.radius) return out;
          const double f = s.radius / d;
          for (std::size_t i = 0; i < q.size(); ++i) out[i] = s.center[i] + f * (q[i] - s.center[i]);
          return out;
        } else {
          require(s.a.size() == q.size() && s.anchor.size() == q.size(), "projection: dimension mismatch");
          return project_norm_cone(s, q);
        }
      },
      set);
}

}  // namespace bassre
