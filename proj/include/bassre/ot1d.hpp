#pragma once

// One-dimensional optimal transport: monotone rearrangement maps Q_nu o F_mu,
// the quadratic Wasserstein distance between quantile grids, Lipschitz audits
// and the admissibility check for targets of the compound Poisson model.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "core.hpp"
#include "dist_core.hpp"
#include "surplus.hpp"

namespace bassre {

inline constexpr double kLipschitzTol = 1e-9;

/// Non-decreasing piecewise-linear map with linear extrapolation beyond the end knots.
class MonotoneMap {
public:
  MonotoneMap() = default;

  /// Knots must have strictly increasing x and non-decreasing y. End slopes default to
  /// the adjacent segment slopes; negative slopes are clamped to 0.
  MonotoneMap(std::vector<double> xs, std::vector<double> ys, std::optional<double> slope_left = {},
              std::optional<double> slope_right = {})
      : x_(std::move(xs)), y_(std::move(ys)) {
    require(!x_.empty() && x_.size() == y_.size(), "map needs matching, non-empty knot lists");
    for (std::size_t i = 0; i < x_.size(); ++i) {
      require(is_finite(x_[i]) && is_finite(y_[i]), "map knots must be finite");
      if (i > 0) {
        require(x_[i] > x_[i - 1], "map knots_x must be strictly increasing");
        require(y_[i] >= y_[i - 1], "map knots_y must be non-decreasing");
      }
    }
    const double seg_first = x_.size() > 1 ? segment_slope(0) : 1.0;
    const double seg_last = x_.size() > 1 ? segment_slope(x_.size() - 2) : 1.0;
    left_ = std::max(0.0, slope_left.value_or(seg_first));
    right_ = std::max(0.0, slope_right.value_or(seg_last));
  }

  /// Builds a map from points with possibly repeated x; repeated x must carry equal y
  /// (up to `atom_tol`) and collapse to one knot.
  static MonotoneMap from_points(const std::vector<double>& xs, const std::vector<double>& ys,
                                 std::optional<double> slope_left = {}, std::optional<double> slope_right = {},
                                 double atom_tol = 1e-12) {
    require(xs.size() == ys.size() && !xs.empty(), "map needs matching, non-empty point lists");
    std::vector<double> kx, ky;
    for (std::size_t i = 0; i < xs.size();) {
      std::size_t j = i;
      while (j < xs.size() && xs[j] == xs[i]) ++j;
      const double lo = ys[i], hi = ys[j - 1];
      if (hi - lo > atom_tol * std::max(1.0, std::abs(lo)))
        throw NonConstantOnAtom("target is not constant across the atom at x = " + std::to_string(xs[i]) +
                                " (values " + std::to_string(lo) + " .. " + std::to_string(hi) + ")");
      kx.push_back(xs[i]);
      ky.push_back(lo);
      i = j;
    }
    return MonotoneMap(std::move(kx), std::move(ky), slope_left, slope_right);
  }

  static MonotoneMap identity(double lo, double hi) { return MonotoneMap({lo, hi}, {lo, hi}); }

  const std::vector<double>& knots_x() const { return x_; }
  const std::vector<double>& knots_y() const { return y_; }
  double slope_left() const { return left_; }
  double slope_right() const { return right_; }
  std::size_t size() const { return x_.size(); }

  double segment_slope(std::size_t i) const { return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]); }

  double operator()(double x) const {
    if (x <= x_.front()) return y_.front() + left_ * (x - x_.front());
    if (x >= x_.back()) return y_.back() + right_ * (x - x_.back());
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double w = (x - x_[i]) / (x_[i + 1] - x_[i]);
    return y_[i] + w * (y_[i + 1] - y_[i]);
  }

  MonotoneMap shifted(double dy) const {
    std::vector<double> y = y_;
    for (double& v : y) v += dy;
    return MonotoneMap(x_, std::move(y), left_, right_);
  }

  MonotoneMap scaled(double s) const {
    require(s >= 0.0, "scale must be >= 0");
    std::vector<double> y = y_;
    for (double& v : y) v *= s;
    return MonotoneMap(x_, std::move(y), left_ * s, right_ * s);
  }

private:
  std::vector<double> x_, y_;
  double left_ = 1.0, right_ = 1.0;
};

/// Largest slope over consecutive knots and the two extrapolation rays.
inline double lipschitz_bound(const MonotoneMap& map) {
  double b = std::max(map.slope_left(), map.slope_right());
  for (std::size_t i = 0; i + 1 < map.size(); ++i) b = std::max(b, map.segment_slope(i));
  return b;
}

inline bool is_one_lipschitz(const MonotoneMap& map, double tol = kLipschitzTol) {
  return lipschitz_bound(map) <= 1.0 + tol;
}

struct QuantileTarget {
  QuantileGrid grid;
};

/// nu = atom_mass * delta_{x0} + (1 - atom_mass) * rho with rho supported below x0.
struct CLFormTarget {
  double x0 = 0.0;
  QuantileGrid rho_quantile;
  double atom_mass = 0.0;
};

class TargetLaw {
public:
  using Variant = std::variant<QuantileTarget, CLFormTarget>;

  TargetLaw(QuantileGrid grid) : law_(QuantileTarget{std::move(grid)}) {}  // NOLINT(implicit)
  TargetLaw(CLFormTarget cl) : law_(std::move(cl)) {                      // NOLINT(implicit)
    const auto& c = std::get<CLFormTarget>(law_);
    require(c.atom_mass > 0.0 && c.atom_mass < 1.0, "CL-form atom mass must lie in (0,1)");
    require(is_finite(c.x0), "CL-form x0 must be finite");
  }

  const Variant& variant() const { return law_; }

  /// Left-continuous quantile at level u in (0,1).
  double quantile(double u) const {
    if (const auto* q = std::get_if<QuantileTarget>(&law_)) return cell_value(q->grid, u);
    const auto& c = std::get<CLFormTarget>(law_);
    if (u > 1.0 - c.atom_mass) return c.x0;
    return cell_value(c.rho_quantile, u / (1.0 - c.atom_mass));
  }

  /// Quantile grid of the target with n cells.
  QuantileGrid grid(std::size_t n) const {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = quantile(QuantileGrid::level(i, n));
    return QuantileGrid(std::move(v));
  }

  /// Natural resolution: grid size for quantile targets, rho grid size for CL-form targets.
  std::size_t resolution() const {
    if (const auto* q = std::get_if<QuantileTarget>(&law_)) return q->grid.size();
    return std::get<CLFormTarget>(law_).rho_quantile.size();
  }

private:
  static double cell_value(const QuantileGrid& g, double u) {
    const double scaled = std::ceil(u * static_cast<double>(g.size()) - 1e-9);
    const auto j = static_cast<std::size_t>(std::clamp(scaled, 1.0, static_cast<double>(g.size())));
    return g[j - 1];
  }

  Variant law_;
};

/// Comonotone map F = Q_nu o F_mu, stored with one knot per grid cell of nu
/// (cells that fall in the same atom of mu collapse to one knot).
inline MonotoneMap brenier_map_1d(const LawSummary& mu, const TargetLaw& nu, std::size_t n = 0) {
  if (n == 0) n = nu.resolution();
  require(n >= 2, "map resolution must be >= 2");
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = QuantileGrid::level(i, n);
    xs[i] = mu.quantile(u);
    ys[i] = nu.quantile(u);
  }
  for (std::size_t i = 1; i < n; ++i) xs[i] = std::max(xs[i], xs[i - 1]);
  // Nothing of mu lies above its top atom, so the map is flat there.
  std::optional<double> right;
  if (mu.atom_top.mass > 0.0 && xs.back() == mu.atom_top.location) right = 0.0;
  return MonotoneMap::from_points(xs, ys, std::nullopt, right);
}

inline double w2_distance(const QuantileGrid& qa, const QuantileGrid& qb) {
  if (qa.size() != qb.size()) throw InvalidArgument("w2_distance: grids have different sizes");
  double acc = 0.0;
  for (std::size_t i = 0; i < qa.size(); ++i) acc += (qa[i] - qb[i]) * (qa[i] - qb[i]);
  return std::sqrt(acc / static_cast<double>(qa.size()));
}

struct TargetValidation {
  bool ok = false;
  std::optional<MonotoneMap> map;
  std::string reason;
};

/// Decides whether nu is reachable from law(M_T) by a non-decreasing 1-Lipschitz map and,
/// if so, returns that map. The no-claim atom of M_T (mass e^{-lambda T}) must land on a
/// single point at the top of nu.
inline TargetValidation validate_cl_target(const SurplusSpec& spec, const TargetLaw& nu,
                                           const LawOptions& opts = {}) {
  spec.validate();
  TargetValidation out;
  if (spec.claims.is_deterministic()) {
    out.reason = "claim law is atomic; the target validator needs non-atomic claims";
    return out;
  }
  const LawSummary law = mt_law(spec, spec.horizon, opts);
  const double no_claim = law.atom_top.mass;

  try {
    if (const auto* cl = std::get_if<CLFormTarget>(&nu.variant())) {
      if (std::abs(cl->atom_mass - no_claim) > 1e-9) {
        out.reason = "atom mass " + std::to_string(cl->atom_mass) + " differs from e^{-lambda T} = " +
                     std::to_string(no_claim);
        return out;
      }
      if (cl->rho_quantile.values().back() >= cl->x0) {
        out.reason = "rho must be supported strictly below x0";
        return out;
      }
      const std::size_t n = cl->rho_quantile.size();
      std::vector<double> xs, ys;
      for (std::size_t i = 0; i < n; ++i) {
        // conditional law of M_T given at least one claim
        xs.push_back(law.quantile((1.0 - no_claim) * QuantileGrid::level(i, n)));
        ys.push_back(cl->rho_quantile[i]);
      }
      xs.push_back(law.atom_top.location);
      ys.push_back(cl->x0);
      for (std::size_t i = 1; i < xs.size(); ++i) xs[i] = std::max(xs[i], xs[i - 1]);
      out.map = MonotoneMap::from_points(xs, ys, std::nullopt, 0.0);
    } else {
      const auto& g = std::get<QuantileTarget>(nu.variant()).grid;
      const std::size_t n = g.size();
      std::size_t atom_cells = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (QuantileGrid::level(i, n) > 1.0 - no_claim) ++atom_cells;
      std::size_t top_run = 0;
      const double top = g.values().back();
      for (std::size_t i = n; i-- > 0 && top - g[i] <= 1e-12 * std::max(1.0, std::abs(top));) ++top_run;
      if (top_run < atom_cells) {
        out.reason = "top atom mass " + std::to_string(static_cast<double>(top_run) / n) +
                     " of the target is below e^{-lambda T} = " + std::to_string(no_claim);
        return out;
      }
      out.map = brenier_map_1d(law, nu, n);
    }
  } catch (const NonConstantOnAtom& e) {
    out.map.reset();
    out.reason = std::string("atom mass mismatch: ") + e.what();
    return out;
  }

  const double lip = lipschitz_bound(*out.map);
  if (lip > 1.0 + kLipschitzTol) {
    out.reason = "induced map is not 1-Lipschitz (bound " + std::to_string(lip) + ")";
    out.map.reset();
    return out;
  }
  out.ok = true;
  out.reason = "ok";
  return out;
}

}  // namespace bassre
