#pragma once

// Discretised quantile problem: minimise (1/n) sum (q_i - q_M,i)^2 over mean-zero
// grids whose increments satisfy 0 <= dq <= dq_M and that meet the terminal-law
// constraints. The minimiser is the Euclidean projection of q_M onto the feasible
// set, computed with Dykstra's algorithm.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "core.hpp"
#include "projection.hpp"
#include "riskfun.hpp"
#include "surplus.hpp"

namespace bassre {

struct Problem {
  QuantileGrid q_m;
  std::vector<ConstraintSpec> constraints;
  bool include_mean_zero = true;
  bool include_domination = true;
};

struct SolveReport {
  double objective = 0.0;
  std::size_t iterations = 0;
  double max_violation = 0.0;
  std::optional<double> branch_chosen;
  bool converged = false;
  std::vector<double> slacks;  // one per constraint, evaluate() at the returned grid
  std::size_t branches_solved = 0;
  std::size_t outer_passes = 1;  // fixed-point passes (SkewPearson2)
};

struct SolveOptions {
  double violation_tol = 1e-7;
  double step_tol = 1e-10;
  std::size_t max_iter = 200000;
  /// Alternative start for Dykstra; the iteration still targets the projection of q_M.
  std::optional<std::vector<double>> start;
};

struct SolveResult {
  QuantileGrid q_hat;
  SolveReport report;
};

class Infeasible : public Error {
public:
  Infeasible(const std::string& what, SolveReport r) : Error(what), report(std::move(r)) {}
  SolveReport report;
};

class NotConverged : public Error {
public:
  NotConverged(const std::string& what, SolveReport r) : Error(what), report(std::move(r)) {}
  SolveReport report;
};

inline double objective(std::span<const double> q, std::span<const double> q_m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) acc += (q[i] - q_m[i]) * (q[i] - q_m[i]);
  return acc / static_cast<double>(q.size());
}

/// Mean-zero hyperplane followed by the 2(n-1) increment halfspaces
/// q_i - q_{i+1} <= 0 and q_{i+1} - q_i <= q_M,i+1 - q_M,i.
inline std::vector<ConvexSetDescriptor> feasible_base_sets(const QuantileGrid& q_m) {
  const std::size_t n = q_m.size();
  require(n >= 2, "grid size must be >= 2");
  std::vector<ConvexSetDescriptor> out;
  out.push_back(Hyperplane{std::vector<double>(n, 1.0), 0.0});
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::vector<double> a(n, 0.0);
    a[i] = 1.0;
    a[i + 1] = -1.0;
    out.push_back(Halfspace{a, 0.0});
    for (double& x : a) x = -x;
    out.push_back(Halfspace{std::move(a), q_m[i + 1] - q_m[i]});
  }
  return out;
}

/// Quota-share optimum under a variance bound: the centred q_M scaled by sqrt(k / Var(q_M)).
inline QuantileGrid variance_closed_form(const QuantileGrid& q_m, double k) {
  require(is_finite(k) && k > 0.0, "variance bound k must be > 0");
  QuantileGrid centred = q_m.centered();
  const double var = centred.variance();
  if (k >= var) return centred;
  std::vector<double> v = centred.values();
  const double s = std::sqrt(k / var);
  for (double& x : v) x *= s;
  return QuantileGrid(std::move(v));
}

namespace detail {

struct MeanZeroSet {};
struct IsotoneSet {};
struct DominatedSet {};
using Projector = std::variant<MeanZeroSet, IsotoneSet, DominatedSet, ConvexSetDescriptor>;

struct Branch {
  std::vector<ConvexSetDescriptor> sets;
  std::optional<double> u;
};

inline double base_violation(std::span<const double> q, std::span<const double> q_m, bool mean_zero,
                             bool domination) {
  double v = 0.0;
  if (mean_zero) v = std::abs(mean_of(q));
  if (domination) {
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
      const double d = q[i + 1] - q[i];
      v = std::max({v, -d, d - (q_m[i + 1] - q_m[i])});
    }
  }
  return v;
}

// Violation in the units of the constraint slack (balls: (||q||^2 - r^2)/n).
inline double set_violation(const ConvexSetDescriptor& s, std::span<const double> q) {
  if (const auto* ball = std::get_if<Ball>(&s)) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) acc += (q[i] - ball->center[i]) * (q[i] - ball->center[i]);
    return std::max(0.0, (acc - ball->radius * ball->radius) / static_cast<double>(q.size()));
  }
  return violation(s, q);
}

struct DykstraOutcome {
  std::vector<double> q;
  std::size_t iterations = 0;
  double violation = 0.0;
  double last_change = 0.0;
  bool converged = false;
  bool stalled = false;  // at max_iter the iterates had stopped moving while still infeasible
};

// Projects `target` (default q_M) onto the branch's feasible set.
inline DykstraOutcome dykstra(const Problem& pb, const Branch& branch, const SolveOptions& opts,
                              const std::vector<double>* target = nullptr) {
  const auto& q_m = pb.q_m.values();
  const std::vector<double>& goal = target ? *target : q_m;
  const std::size_t n = q_m.size();
  std::vector<Projector> projectors;
  if (pb.include_mean_zero) projectors.emplace_back(MeanZeroSet{});
  if (pb.include_domination) {
    projectors.emplace_back(IsotoneSet{});
    projectors.emplace_back(DominatedSet{});
  }
  for (const auto& s : branch.sets) projectors.emplace_back(s);

  auto violation_of = [&](std::span<const double> q) {
    double v = base_violation(q, q_m, pb.include_mean_zero, pb.include_domination);
    for (const auto& s : branch.sets) v = std::max(v, set_violation(s, q));
    return v;
  };

  DykstraOutcome out;
  std::vector<double> x = goal;
  std::vector<std::vector<double>> corr(projectors.size(), std::vector<double>(n, 0.0));
  if (opts.start) {
    require(opts.start->size() == n, "start point has the wrong dimension");
    x = *opts.start;
    if (!corr.empty())
      for (std::size_t i = 0; i < n; ++i) corr.back()[i] = goal[i] - x[i];
  }
  if (projectors.empty()) {
    out.q = x;
    out.converged = true;
    return out;
  }

  std::vector<double> y(n), prev(n);
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    prev = x;
    for (std::size_t k = 0; k < projectors.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + corr[k][i];
      std::visit(
          [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MeanZeroSet>) {
              const double m = mean_of(y);
              for (std::size_t i = 0; i < n; ++i) x[i] = y[i] - m;
            } else if constexpr (std::is_same_v<T, IsotoneSet>) {
              x = isotonic_regression(y);
            } else if constexpr (std::is_same_v<T, DominatedSet>) {
              x = project_dominated_increments(y, q_m);
            } else {
              x = project(p, y);
            }
          },
          projectors[k]);
      for (std::size_t i = 0; i < n; ++i) corr[k][i] = y[i] - x[i];
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(x[i] - prev[i]));
    out.iterations = it;
    out.last_change = change;
    if (change <= opts.step_tol) {
      const double v = violation_of(x);
      if (v <= opts.violation_tol) {
        out.converged = true;
        out.violation = v;
        break;
      }
    }
  }
  out.violation = violation_of(x);
  // iterates at rest but still infeasible: the sets do not intersect
  if (!out.converged) out.stalled = out.last_change <= opts.step_tol;

  // Snap increments into [0, dq_M] and recentre so domination holds exactly.
  if (out.converged && pb.include_domination) {
    std::vector<double> q(n);
    q[0] = x[0];
    for (std::size_t i = 0; i + 1 < n; ++i)
      q[i + 1] = q[i] + std::clamp(x[i + 1] - x[i], 0.0, q_m[i + 1] - q_m[i]);
    if (pb.include_mean_zero) {
      const double m = mean_of(q);
      for (double& v : q) v -= m;
    }
    const double v = violation_of(q);
    if (v <= opts.violation_tol) {
      x = std::move(q);
      out.violation = v;
    }
  }
  out.q = std::move(x);
  return out;
}

inline std::vector<Branch> expand_branches(const std::vector<ConvexSetList>& lists) {
  std::vector<Branch> branches{Branch{}};
  for (const auto& l : lists) {
    if (!l.disjunctive) {
      for (auto& b : branches) b.sets.insert(b.sets.end(), l.sets.begin(), l.sets.end());
      continue;
    }
    std::vector<Branch> next;
    for (const auto& b : branches) {
      for (std::size_t j = 0; j < l.sets.size(); ++j) {
        Branch nb = b;
        nb.sets.push_back(l.sets[j]);
        if (!nb.u) nb.u = l.branch_u[j];
        next.push_back(std::move(nb));
      }
    }
    branches = std::move(next);
  }
  return branches;
}

}  // namespace detail

/// Projection of q_M onto the feasible set. Disjunctive constraints are solved one
/// branch at a time and the branch with the smallest objective wins (ties: first branch).
inline SolveResult solve(const Problem& pb, const SolveOptions& opts = {}) {
  const std::size_t n = pb.q_m.size();
  require(n >= 2, "grid size must be >= 2");
  for (const auto& c : pb.constraints) validate_constraint(c);
  const bool has_pearson = std::any_of(pb.constraints.begin(), pb.constraints.end(), [](const auto& c) {
    const auto* p = std::get_if<SkewPearson2Constraint>(&c);
    return p && p->k < 0.0;
  });

  double sigma = std::sqrt(pb.q_m.variance());
  std::optional<detail::DykstraOutcome> best;
  SolveReport report;
  double best_residual = std::numeric_limits<double>::infinity();
  const std::size_t passes = has_pearson ? 10 : 1;
  std::optional<double> prev_sigma, prev_g;

  for (std::size_t pass = 0; pass < passes; ++pass) {
    std::vector<ConvexSetList> lists;
    for (const auto& c : pb.constraints) lists.push_back(to_convex_sets(c, pb.q_m, sigma));
    const auto branches = detail::expand_branches(lists);

    std::optional<detail::DykstraOutcome> pass_best;
    std::optional<double> pass_u;
    std::size_t total_iter = 0;
    bool any_unconverged_feasible = false;  // some branch was still moving at max_iter
    for (const auto& br : branches) {
      auto res = detail::dykstra(pb, br, opts);
      total_iter += res.iterations;
      best_residual = std::min(best_residual, res.violation);
      if (!res.converged) {
        if (!res.stalled) any_unconverged_feasible = true;
        continue;
      }
      if (!pass_best || objective(res.q, pb.q_m.values()) < objective(pass_best->q, pb.q_m.values())) {
        pass_u = br.u;
        pass_best = std::move(res);
      }
    }
    report.iterations += total_iter;
    report.branches_solved += branches.size();
    report.outer_passes = pass + 1;
    if (!pass_best) {
      report.max_violation = best_residual;
      report.converged = false;
      if (any_unconverged_feasible)
        throw NotConverged("iteration limit reached before convergence (best residual " +
                           std::to_string(best_residual) + ")", report);
      throw Infeasible("no branch reached the violation tolerance (best residual " +
                       std::to_string(best_residual) + ")", report);
    }
    best = std::move(pass_best);
    report.branch_chosen = pass_u;
    if (!has_pearson) break;
    // root of g(sigma) = sd(q_hat(sigma)) - sigma: secant once two points exist, else a damped step
    const double g = std::sqrt(variance_of(best->q)) - sigma;
    if (std::abs(g) <= 1e-10 * std::max(1.0, sigma)) break;
    double next = sigma + 0.5 * g;
    if (prev_sigma && g != *prev_g) {
      const double sec = sigma - g * (sigma - *prev_sigma) / (g - *prev_g);
      if (std::isfinite(sec) && sec > 0.0) next = sec;
    }
    prev_sigma = sigma;
    prev_g = g;
    sigma = next;
  }

  SolveResult out{QuantileGrid(best->q), {}};
  report.objective = objective(best->q, pb.q_m.values());
  report.converged = true;
  double worst = detail::base_violation(best->q, pb.q_m.values(), pb.include_mean_zero, pb.include_domination);
  for (const auto& c : pb.constraints) {
    const double s = evaluate(c, out.q_hat, pb.q_m);
    report.slacks.push_back(s);
    worst = std::max(worst, -s);
  }
  report.max_violation = std::max(0.0, worst);
  out.report = std::move(report);
  return out;
}

/// Euclidean projection of an arbitrary point onto the feasible set of a problem without
/// disjunctive constraints (the sets are still anchored at q_M).
inline std::vector<double> project_feasible(const Problem& pb, const std::vector<double>& point,
                                            const SolveOptions& opts = {}) {
  require(point.size() == pb.q_m.size(), "point has the wrong dimension");
  std::vector<ConvexSetList> lists;
  for (const auto& c : pb.constraints) {
    if (std::holds_alternative<SkewSupConstraint>(c)) throw InvalidArgument("project_feasible: disjunctive constraint");
    lists.push_back(to_convex_sets(c, pb.q_m));
  }
  const auto branches = detail::expand_branches(lists);
  auto res = detail::dykstra(pb, branches.front(), opts, &point);
  if (!res.converged) {
    SolveReport r;
    r.iterations = res.iterations;
    r.max_violation = res.violation;
    throw Infeasible("projection did not reach a feasible point", r);
  }
  return res.q;
}

}  // namespace bassre
