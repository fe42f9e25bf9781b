#pragma once

// Slow reference solver for small grids, written independently of the Dykstra path.
//
// Variables are the increments d in the box [0, dq_M]; q = centre(cumsum(d)) so the
// mean-zero and domination constraints hold by construction. Risk constraints g(q) >= 0
// are handled with an augmented Lagrangian whose inner problems are solved by projected
// gradient with Armijo backtracking. Penalty schedule: rho starts at 10 and is multiplied
// by 4 whenever the worst violation fails to shrink by a factor 4 over an outer step.
// Disjunctions (skew_sup) are solved one branch at a time; the best feasible branch wins.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "bassre/riskfun.hpp"
#include "bassre/surplus.hpp"

namespace oracle {

using Vec = std::vector<double>;

// One smooth-ish constraint g(q) >= 0 together with its gradient.
struct Constraint {
  enum class Kind { Variance, Quantile, Tail, Linear, Pearson } kind = Kind::Linear;
  double k = 0.0, c = 0.0, alpha = 0.0;
  std::size_t idx = 0;  // quantile cell / tail length / median cell
  Vec lin;              // Linear: g = lin . q
};

inline double slack(const Constraint& g, const Vec& q, const Vec& qm) {
  const double n = static_cast<double>(q.size());
  auto l2 = [&] {
    double a = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) a += (q[i] - qm[i]) * (q[i] - qm[i]);
    return std::sqrt(a / n);
  };
  switch (g.kind) {
    case Constraint::Kind::Variance: {
      double a = 0.0;
      for (double x : q) a += x * x;
      return g.k - a / n;
    }
    case Constraint::Kind::Quantile:
      return q[g.idx] - g.alpha * l2() - g.c;
    case Constraint::Kind::Tail: {
      double a = 0.0;
      for (std::size_t i = 0; i < g.idx; ++i) a += q[i];
      return a / static_cast<double>(g.idx) - g.alpha * l2() - g.c;
    }
    case Constraint::Kind::Linear: {
      double a = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) a += g.lin[i] * q[i];
      return a;
    }
    case Constraint::Kind::Pearson: {
      double m = 0.0;
      for (double x : q) m += x;
      m /= n;
      double v = 0.0;
      for (double x : q) v += (x - m) * (x - m);
      return 3.0 * (m - q[g.idx]) - g.k * std::sqrt(v / n);
    }
  }
  return 0.0;
}

inline Vec gradient(const Constraint& g, const Vec& q, const Vec& qm) {
  const std::size_t n = q.size();
  const double nd = static_cast<double>(n);
  Vec out(n, 0.0);
  auto add_norm = [&] {
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) a += (q[i] - qm[i]) * (q[i] - qm[i]);
    const double nrm = std::sqrt(a / nd);
    if (nrm == 0.0) return;
    for (std::size_t i = 0; i < n; ++i) out[i] -= g.alpha * (q[i] - qm[i]) / (nd * nrm);
  };
  switch (g.kind) {
    case Constraint::Kind::Variance:
      for (std::size_t i = 0; i < n; ++i) out[i] = -2.0 * q[i] / nd;
      break;
    case Constraint::Kind::Quantile:
      out[g.idx] = 1.0;
      add_norm();
      break;
    case Constraint::Kind::Tail:
      for (std::size_t i = 0; i < g.idx; ++i) out[i] = 1.0 / static_cast<double>(g.idx);
      add_norm();
      break;
    case Constraint::Kind::Linear:
      out = g.lin;
      break;
    case Constraint::Kind::Pearson: {
      double m = 0.0;
      for (double x : q) m += x;
      m /= nd;
      double v = 0.0;
      for (double x : q) v += (x - m) * (x - m);
      const double sd = std::sqrt(v / nd);
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = 3.0 / nd - (sd > 0.0 ? g.k * (q[i] - m) / (nd * sd) : 0.0);
      }
      out[g.idx] -= 3.0;
      break;
    }
  }
  return out;
}

inline std::size_t cell0(double p, std::size_t n) {
  return static_cast<std::size_t>(std::llround(p * static_cast<double>(n))) - 1;
}

inline Constraint skew_gm(double u, double k, std::size_t n) {
  // (hi + lo - 2 mid) - k (hi - lo) >= 0
  Constraint g;
          g.kind = Constraint::Kind::Linear;
  g.lin.assign(n, 0.0);
  g.lin[cell0(1.0 - u, n)] += 1.0 - k;
  g.lin[cell0(u, n)] += 1.0 + k;
  g.lin[cell0(0.5, n)] -= 2.0;
  return g;
}

// Each entry is a list of alternatives; a problem is one choice per entry.
inline std::vector<std::vector<Constraint>> translate(const bassre::ConstraintSpec& spec, std::size_t n) {
  using namespace bassre;
  std::vector<std::vector<Constraint>> alts;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, VarianceConstraint>) {
          Constraint g;
          g.kind = Constraint::Kind::Variance;
          g.k = s.k;
          alts.push_back({g});
        } else if constexpr (std::is_same_v<T, VaRConstraint>) {
          Constraint g;
          g.kind = Constraint::Kind::Quantile;
          g.idx = cell0(s.p, n);
          g.c = s.c;
          g.alpha = s.alpha;
          alts.push_back({g});
        } else if constexpr (std::is_same_v<T, ESConstraint>) {
          Constraint g;
          g.kind = Constraint::Kind::Tail;
          g.idx = cell0(s.p, n) + 1;
          g.c = s.c;
          g.alpha = s.alpha;
          alts.push_back({g});
        } else if constexpr (std::is_same_v<T, SkewGMConstraint>) {
          alts.push_back({skew_gm(s.u, s.k, n)});
        } else if constexpr (std::is_same_v<T, SkewSupConstraint>) {
          for (double u : s.u_grid) alts.push_back({skew_gm(u, s.k, n)});
        } else if constexpr (std::is_same_v<T, SkewPearson2Constraint>) {
          Constraint g;
          g.kind = Constraint::Kind::Pearson;
          g.k = s.k;
          g.idx = cell0(0.5, n);
          alts.push_back({g});
        } else if constexpr (std::is_same_v<T, SkewIntConstraint>) {
          // mean - mid - k * mean|q - mid|, linear for non-decreasing q
          Constraint g;
          g.kind = Constraint::Kind::Linear;
          const std::size_t mid = cell0(0.5, n);
          g.lin.assign(n, 1.0 / static_cast<double>(n));
          g.lin[mid] -= 1.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double sgn = i > mid ? 1.0 : (i < mid ? -1.0 : 0.0);
            g.lin[i] -= s.k * sgn / static_cast<double>(n);
            g.lin[mid] += s.k * sgn / static_cast<double>(n);
          }
          alts.push_back({g});
        } else {
          Constraint g;
          g.kind = Constraint::Kind::Linear;
          g.lin.assign(n, 0.0);
          g.lin[cell0(1.0 - s.v, n)] += s.k;
          g.lin[cell0(s.v, n)] -= s.k;
          g.lin[cell0(1.0 - s.u, n)] -= 1.0;
          g.lin[cell0(s.u, n)] += 1.0;
          alts.push_back({g});
        }
      },
      spec);
  // skew_sup yields one alternative per level, everything else a single one
  return alts;
}

struct Result {
  Vec q;
  double objective = std::numeric_limits<double>::infinity();
  double max_violation = std::numeric_limits<double>::infinity();
  bool found = false;
};

class Solver {
public:
  Solver(Vec qm, std::vector<Constraint> cons) : qm_(std::move(qm)), cons_(std::move(cons)) {
    const std::size_t n = qm_.size();
    hi_.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) hi_[i] = qm_[i + 1] - qm_[i];
  }

  Vec to_q(const Vec& d) const {
    const std::size_t n = qm_.size();
    Vec q(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) q[i] = q[i - 1] + d[i - 1];
    double m = 0.0;
    for (double x : q) m += x;
    m /= static_cast<double>(n);
    for (double& x : q) x -= m;
    return q;
  }

  double objective(const Vec& q) const {
    double a = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) a += (q[i] - qm_[i]) * (q[i] - qm_[i]);
    return a / static_cast<double>(q.size());
  }

  double worst(const Vec& q) const {
    double w = 0.0;
    for (const auto& g : cons_) w = std::max(w, -slack(g, q, qm_));
    return w;
  }

  Result run(Vec d) const {
    const std::size_t m = cons_.size();
    Vec lam(m, 0.0);
    double rho = 10.0;
    double prev_viol = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < 60; ++outer) {
      d = inner(d, lam, rho);
      const Vec q = to_q(d);
      for (std::size_t k = 0; k < m; ++k) lam[k] = std::max(0.0, lam[k] - rho * slack(cons_[k], q, qm_));
      const double v = worst(q);
      if (v > 0.25 * prev_viol) rho = std::min(rho * 4.0, 1e10);
      prev_viol = v;
      if (v <= 1e-10 && outer >= 5) break;
    }
    Result r;
    r.q = to_q(d);
    r.objective = objective(r.q);
    r.max_violation = worst(r.q);
    r.found = true;
    return r;
  }

private:
  double lagrangian(const Vec& q, const Vec& lam, double rho) const {
    double v = objective(q);
    for (std::size_t k = 0; k < cons_.size(); ++k) {
      const double t = std::max(0.0, lam[k] / rho - slack(cons_[k], q, qm_));
      v += 0.5 * rho * t * t;
    }
    return v;
  }

  // gradient with respect to d: dq/dd_j = centred indicator of {i > j}
  Vec grad_d(const Vec& q, const Vec& lam, double rho) const {
    const std::size_t n = qm_.size();
    const double nd = static_cast<double>(n);
    Vec gq(n);
    for (std::size_t i = 0; i < n; ++i) gq[i] = 2.0 * (q[i] - qm_[i]) / nd;
    for (std::size_t k = 0; k < cons_.size(); ++k) {
      const double t = std::max(0.0, lam[k] / rho - slack(cons_[k], q, qm_));
      if (t == 0.0) continue;
      const Vec g = gradient(cons_[k], q, qm_);
      for (std::size_t i = 0; i < n; ++i) gq[i] -= rho * t * g[i];
    }
    double mean_g = 0.0;
    for (double x : gq) mean_g += x;
    mean_g /= nd;
    Vec gd(n - 1);
    double tail = 0.0;
    for (std::size_t i = n; i-- > 1;) {
      tail += gq[i] - mean_g;
      gd[i - 1] = tail;
    }
    return gd;
  }

  Vec clamp_box(Vec d) const {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::clamp(d[i], 0.0, hi_[i]);
    return d;
  }

  Vec inner(Vec d, const Vec& lam, double rho) const {
    double step = 1.0;
    for (int it = 0; it < 20000; ++it) {
      const Vec q = to_q(d);
      const double f0 = lagrangian(q, lam, rho);
      const Vec g = grad_d(q, lam, rho);
      Vec trial;
      double moved = 0.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        trial = d;
        for (std::size_t i = 0; i < d.size(); ++i) trial[i] -= step * g[i];
        trial = clamp_box(trial);
        double decrease = 0.0;
        moved = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
          decrease += g[i] * (d[i] - trial[i]);
          moved = std::max(moved, std::abs(d[i] - trial[i]));
        }
        if (lagrangian(to_q(trial), lam, rho) <= f0 - 1e-4 * decrease) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      d = std::move(trial);
      if (moved <= 1e-14) break;
      step = std::min(step * 2.0, 1e6);
    }
    return d;
  }

  Vec qm_;
  std::vector<Constraint> cons_;
  Vec hi_;
};

/// Best feasible point over 50 random box starts plus the start d = dq_M (i.e. q_M).
inline Result oracle_solve(const bassre::QuantileGrid& q_m, const std::vector<bassre::ConstraintSpec>& specs,
                           std::uint64_t seed = 7, std::size_t random_starts = 50, double feas_tol = 1e-7) {
  const std::size_t n = q_m.size();
  // Cartesian product over alternatives (only skew_sup has more than one).
  std::vector<std::vector<Constraint>> problems{{}};
  for (const auto& s : specs) {
    const auto alts = translate(s, n);
    std::vector<std::vector<Constraint>> next;
    for (const auto& p : problems)
      for (const auto& a : alts) {
        auto np = p;
        np.insert(np.end(), a.begin(), a.end());
        next.push_back(std::move(np));
      }
    problems = std::move(next);
  }

  Result best;
  std::mt19937_64 rng(seed);
  for (const auto& cons : problems) {
    Solver solver(q_m.values(), cons);
    Vec d0(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d0[i] = q_m[i + 1] - q_m[i];
    for (std::size_t s = 0; s <= random_starts; ++s) {
      Vec d = d0;
      if (s > 0) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& x : d) x *= u(rng);
      }
      Result r = solver.run(d);
      if (r.max_violation <= feas_tol && r.objective < best.objective) best = std::move(r);
    }
  }
  return best;
}

}  // namespace oracle
