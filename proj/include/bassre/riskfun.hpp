#pragma once

// Risk and moment functionals on quantile grids, the reinsurance surcharge, and
// the encoding of each terminal-law constraint as convex sets for the solver.
//
// All functionals use the cell convention of QuantileGrid: the value at level p is
// the entry with 1-based index ceil(p*n), and p*n must be an integer.

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "core.hpp"
#include "surplus.hpp"

namespace bassre {

struct VarianceConstraint {
  double k = 0.0;
};
/// Q(p) - alpha * ||Q - Q_M|| >= c
struct VaRConstraint {
  double p = 0.0;
  double c = 0.0;
  double alpha = 0.0;
};
/// (1/p) int_0^p Q - alpha * ||Q - Q_M|| >= c
struct ESConstraint {
  double p = 0.0;
  double c = 0.0;
  double alpha = 0.0;
};
/// Groeneveld-Meeden skewness at level u is >= k.
struct SkewGMConstraint {
  double u = 0.25;
  double k = 0.0;
};
/// sup over u_grid of the Groeneveld-Meeden skewness is >= k.
struct SkewSupConstraint {
  double k = 0.0;
  std::vector<double> u_grid;
};
/// Pearson's median skewness 3(mean - median)/sd is >= k.
struct SkewPearson2Constraint {
  double k = 0.0;
};
/// (mean - median) / E|X - median| >= k.
struct SkewIntConstraint {
  double k = 0.0;
};
/// Ruppert kurtosis (Q(1-u) - Q(u)) / (Q(1-v) - Q(v)) <= k.
struct KurtConstraint {
  double u = 0.1;
  double v = 0.25;
  double k = 1.0;
};

using ConstraintSpec = std::variant<VarianceConstraint, VaRConstraint, ESConstraint, SkewGMConstraint,
                                    SkewSupConstraint, SkewPearson2Constraint, SkewIntConstraint, KurtConstraint>;

/// Default level grid for the supremum skewness: 0.025, 0.05, ..., 0.475.
inline std::vector<double> default_skew_u_grid() {
  std::vector<double> u;
  for (int i = 1; i <= 19; ++i) u.push_back(0.025 * i);
  return u;
}

inline std::string constraint_name(const ConstraintSpec& c) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, VarianceConstraint>) return "variance";
        else if constexpr (std::is_same_v<T, VaRConstraint>) return "var";
        else if constexpr (std::is_same_v<T, ESConstraint>) return "es";
        else if constexpr (std::is_same_v<T, SkewGMConstraint>) return "skew_gm";
        else if constexpr (std::is_same_v<T, SkewSupConstraint>) return "skew_sup";
        else if constexpr (std::is_same_v<T, SkewPearson2Constraint>) return "skew_pearson2";
        else if constexpr (std::is_same_v<T, SkewIntConstraint>) return "skew_int";
        else return "kurt";
      },
      c);
}

inline void validate_constraint(const ConstraintSpec& c) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, VarianceConstraint>) {
          require(is_finite(s.k) && s.k > 0.0, "variance bound k must be > 0");
        } else if constexpr (std::is_same_v<T, VaRConstraint> || std::is_same_v<T, ESConstraint>) {
          require(s.p > 0.0 && s.p < 1.0, "level p must lie in (0,1)");
          require(is_finite(s.c), "threshold c must be finite");
          require(is_finite(s.alpha) && s.alpha >= 0.0, "surcharge alpha must be >= 0");
        } else if constexpr (std::is_same_v<T, SkewGMConstraint>) {
          require(s.u > 0.0 && s.u < 0.5, "skewness level u must lie in (0,1/2)");
          require(s.k >= -1.0 && s.k <= 1.0, "skewness bound k must lie in [-1,1]");
        } else if constexpr (std::is_same_v<T, SkewSupConstraint>) {
          require(s.k >= -1.0 && s.k <= 1.0, "skewness bound k must lie in [-1,1]");
          require(!s.u_grid.empty(), "u_grid must be non-empty");
          for (std::size_t i = 0; i < s.u_grid.size(); ++i) {
            require(s.u_grid[i] > 0.0 && s.u_grid[i] < 0.5, "u_grid entries must lie in (0,1/2)");
            if (i > 0) require(s.u_grid[i] > s.u_grid[i - 1], "u_grid must be strictly increasing");
          }
        } else if constexpr (std::is_same_v<T, SkewPearson2Constraint> || std::is_same_v<T, SkewIntConstraint>) {
          require(is_finite(s.k), "skewness bound k must be finite");
        } else {
          require(s.u > 0.0 && s.u < s.v && s.v < 0.5, "kurtosis levels need 0 < u < v < 1/2");
          require(is_finite(s.k) && s.k > 0.0, "kurtosis bound k must be > 0");
        }
      },
      c);
}

/// Discrete L2(0,1) norm sqrt((1/n) sum (q_i - r_i)^2).
inline double l2_distance(std::span<const double> q, std::span<const double> r) {
  require(q.size() == r.size(), "grids have different sizes");
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) acc += (q[i] - r[i]) * (q[i] - r[i]);
  return std::sqrt(acc / static_cast<double>(q.size()));
}

/// Reinsurance surcharge h(t) = (alpha t / T) * ||Q - Q_M||_{L2(0,1)}.
inline double surcharge(const SurplusSpec& spec, const QuantileGrid& q, const QuantileGrid& q_m, double t) {
  if (q.size() != q_m.size()) throw InvalidArgument("surcharge: grids have different sizes");
  require(t >= 0.0 && t <= spec.horizon * (1.0 + 1e-12), "surcharge time must lie in [0, T]");
  return spec.surcharge_alpha * t / spec.horizon * l2_distance(q.span(), q_m.span());
}

namespace detail {

// 0-based index of the level-p cell.
inline std::size_t cell(double p, std::size_t n, const char* what) {
  const std::size_t j = integral_level(p, n, what);
  if (j < 1 || j > n) throw IncompatibleGrid(std::string(what) + " falls outside the grid");
  return j - 1;
}

inline double skew_gm_slack(std::span<const double> q, double u, double k) {
  const std::size_t n = q.size();
  const double hi = q[cell(1.0 - u, n, "1-u")];
  const double lo = q[cell(u, n, "u")];
  const double mid = q[cell(0.5, n, "1/2")];
  if (hi - lo <= 0.0) return k <= 0.0 ? 0.0 : -k;  // point mass: skewness 0
  return (hi + lo - 2.0 * mid) - k * (hi - lo);
}

}  // namespace detail

/// Signed slack of a constraint at q; feasible iff slack >= -1e-9.
/// `q_m` anchors the surcharge norm of the VaR/ES constraints.
inline double evaluate(const ConstraintSpec& c, std::span<const double> q, std::span<const double> q_m) {
  const std::size_t n = q.size();
  require(n >= 2, "grid size must be >= 2");
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, VarianceConstraint>) {
          return s.k - dot(q, q) / static_cast<double>(n);
        } else if constexpr (std::is_same_v<T, VaRConstraint>) {
          return q[detail::cell(s.p, n, "p")] - s.alpha * l2_distance(q, q_m) - s.c;
        } else if constexpr (std::is_same_v<T, ESConstraint>) {
          const std::size_t m = detail::cell(s.p, n, "p") + 1;
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i) acc += q[i];
          return acc / static_cast<double>(m) - s.alpha * l2_distance(q, q_m) - s.c;
        } else if constexpr (std::is_same_v<T, SkewGMConstraint>) {
          return detail::skew_gm_slack(q, s.u, s.k);
        } else if constexpr (std::is_same_v<T, SkewSupConstraint>) {
          double best = -std::numeric_limits<double>::infinity();
          for (double u : s.u_grid) best = std::max(best, detail::skew_gm_slack(q, u, s.k));
          return best;
        } else if constexpr (std::is_same_v<T, SkewPearson2Constraint>) {
          const double mid = q[detail::cell(0.5, n, "1/2")];
          return 3.0 * (mean_of(q) - mid) - s.k * std::sqrt(variance_of(q));
        } else if constexpr (std::is_same_v<T, SkewIntConstraint>) {
          const double mid = q[detail::cell(0.5, n, "1/2")];
          double abs_dev = 0.0;
          for (double x : q) abs_dev += std::abs(x - mid);
          return (mean_of(q) - mid) - s.k * abs_dev / static_cast<double>(n);
        } else {
          const double outer = q[detail::cell(1.0 - s.u, n, "1-u")] - q[detail::cell(s.u, n, "u")];
          const double inner = q[detail::cell(1.0 - s.v, n, "1-v")] - q[detail::cell(s.v, n, "v")];
          return s.k * inner - outer;
        }
      },
      c);
}

inline double evaluate(const ConstraintSpec& c, const QuantileGrid& q, const QuantileGrid& q_m) {
  return evaluate(c, q.span(), q_m.span());
}

/// a . q = b
struct Hyperplane {
  std::vector<double> a;
  double b = 0.0;
};
/// a . q <= b
struct Halfspace {
  std::vector<double> a;
  double b = 0.0;
};
/// ||q - center|| <= radius
struct Ball {
  std::vector<double> center;
  double radius = 0.0;
};
/// alpha * ||q - anchor|| <= a . q - b
struct NormCone {
  double alpha = 0.0;
  std::vector<double> anchor;
  std::vector<double> a;
  double b = 0.0;
};

using ConvexSetDescriptor = std::variant<Hyperplane, Halfspace, Ball, NormCone>;

/// Sets produced for one constraint. When `disjunctive` is set the constraint holds
/// if q lies in at least one of the sets (one branch per entry of `branch_u`).
struct ConvexSetList {
  std::vector<ConvexSetDescriptor> sets;
  bool disjunctive = false;
  std::vector<double> branch_u;
};

/// Amount by which q violates the set, in the set's own units (0 when q is a member).
inline double violation(const ConvexSetDescriptor& set, std::span<const double> q) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Hyperplane>) {
          return std::abs(dot(s.a, q) - s.b);
        } else if constexpr (std::is_same_v<T, Halfspace>) {
          return std::max(0.0, dot(s.a, q) - s.b);
        } else if constexpr (std::is_same_v<T, Ball>) {
          double acc = 0.0;
          for (std::size_t i = 0; i < q.size(); ++i) acc += (q[i] - s.center[i]) * (q[i] - s.center[i]);
          return std::max(0.0, std::sqrt(acc) - s.radius);
        } else {
          double acc = 0.0;
          for (std::size_t i = 0; i < q.size(); ++i) acc += (q[i] - s.anchor[i]) * (q[i] - s.anchor[i]);
          return std::max(0.0, s.alpha * std::sqrt(acc) - (dot(s.a, q) - s.b));
        }
      },
      set);
}

inline bool contains(const ConvexSetDescriptor& set, std::span<const double> q, double tol = 1e-9) {
  return violation(set, q) <= tol;
}

/// Convex-set encoding of a constraint. Membership agrees with evaluate() >= 0 on
/// non-decreasing grids. SkewPearson2 with k >= 0 is a norm cone that is exact on
/// mean-zero grids; with k < 0 the set is not convex and a frozen standard deviation
/// `sigma` (default: that of q_m) turns it into a halfspace.
inline ConvexSetList to_convex_sets(const ConstraintSpec& c, const QuantileGrid& q_m,
                                    std::optional<double> sigma = {}) {
  validate_constraint(c);
  const std::size_t n = q_m.size();
  const double nd = static_cast<double>(n);
  auto zeros = [n] { return std::vector<double>(n, 0.0); };
  ConvexSetList out;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, VarianceConstraint>) {
          out.sets.push_back(Ball{zeros(), std::sqrt(nd * s.k)});
        } else if constexpr (std::is_same_v<T, VaRConstraint>) {
          auto a = zeros();
          a[detail::cell(s.p, n, "p")] = 1.0;
          out.sets.push_back(NormCone{s.alpha / std::sqrt(nd), q_m.values(), std::move(a), s.c});
        } else if constexpr (std::is_same_v<T, ESConstraint>) {
          const std::size_t m = detail::cell(s.p, n, "p") + 1;
          auto a = zeros();
          for (std::size_t i = 0; i < m; ++i) a[i] = 1.0 / static_cast<double>(m);
          out.sets.push_back(NormCone{s.alpha / std::sqrt(nd), q_m.values(), std::move(a), s.c});
        } else if constexpr (std::is_same_v<T, SkewGMConstraint> || std::is_same_v<T, SkewSupConstraint>) {
          std::vector<double> levels;
          if constexpr (std::is_same_v<T, SkewGMConstraint>) levels = {s.u};
          else levels = s.u_grid;
          for (double u : levels) {
            auto a = zeros();
            a[detail::cell(1.0 - u, n, "1-u")] += -(1.0 - s.k);
            a[detail::cell(u, n, "u")] += -(1.0 + s.k);
            a[detail::cell(0.5, n, "1/2")] += 2.0;
            out.sets.push_back(Halfspace{std::move(a), 0.0});
          }
          if constexpr (std::is_same_v<T, SkewSupConstraint>) {
            out.disjunctive = true;
            out.branch_u = s.u_grid;
          }
        } else if constexpr (std::is_same_v<T, SkewPearson2Constraint>) {
          auto a = zeros();
          for (double& x : a) x = -3.0 / nd;
          a[detail::cell(0.5, n, "1/2")] += 3.0;
          if (s.k >= 0.0) {
            // k ||q|| / sqrt(n) <= 3 (mean - median), exact once the mean is zero
            for (double& x : a) x = -x;
            out.sets.push_back(NormCone{s.k / std::sqrt(nd), zeros(), std::move(a), 0.0});
          } else {
            const double sd = sigma.value_or(std::sqrt(q_m.variance()));
            out.sets.push_back(Halfspace{std::move(a), -s.k * sd});
          }
        } else if constexpr (std::is_same_v<T, SkewIntConstraint>) {
          // On non-decreasing grids |q_i - q_mid| = sign(i - mid) (q_i - q_mid).
          const std::size_t mid = detail::cell(0.5, n, "1/2");
          std::vector<double> coef(n, 1.0 / nd);
          for (std::size_t i = 0; i < n; ++i) {
            if (i == mid) continue;
            const double sgn = i > mid ? 1.0 : -1.0;
            coef[i] -= s.k * sgn / nd;
            coef[mid] += s.k * sgn / nd;
          }
          coef[mid] -= 1.0;
          for (double& x : coef) x = -x;
          out.sets.push_back(Halfspace{std::move(coef), 0.0});
        } else {
          auto a = zeros();
          a[detail::cell(1.0 - s.u, n, "1-u")] += 1.0;
          a[detail::cell(s.u, n, "u")] -= 1.0;
          a[detail::cell(1.0 - s.v, n, "1-v")] -= s.k;
          a[detail::cell(s.v, n, "v")] += s.k;
          out.sets.push_back(Halfspace{std::move(a), 0.0});
        }
      },
      c);
  return out;
}

}  // namespace bassre
