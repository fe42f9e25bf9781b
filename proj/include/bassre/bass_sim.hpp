#pragma once

// Bass-type reinsurance strategy: the terminal map F_hat, the conditional maps
// F_t(m) = E[F_hat(m + Z)] with Z the increment of M over (t, T], path simulation of
// the surplus before and after reinsurance, and the diagnostic suite.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "core.hpp"
#include "dist_core.hpp"
#include "ot1d.hpp"
#include "riskfun.hpp"
#include "stats.hpp"
#include "surplus.hpp"

namespace bassre {

/// E[h(M_t)] for h piecewise linear (kind 0: F(M), kind 1: (F(M) - M)^2), integrated
/// exactly piece by piece with truncated moments.
inline double map_expectation(const MtMoments& mom, const MonotoneMap& f, int kind) {
  const auto& xs = f.knots_x();
  const auto& ys = f.knots_y();
  double acc = 0.0;
  TruncatedMoments prev{0.0, 0.0, 0.0};
  auto piece = [&](double a, double b, const TruncatedMoments& lo, const TruncatedMoments& hi) {
    const double p = hi.p - lo.p, m1 = hi.m1 - lo.m1, m2 = hi.m2 - lo.m2;
    if (kind == 0) return a * p + b * m1;
    const double bb = b - 1.0;
    return a * a * p + 2.0 * a * bb * m1 + bb * bb * m2;
  };
  // left ray (-inf, x_0]
  {
    const double b = f.slope_left();
    const auto cur = mom.below(xs.front());
    acc += piece(ys.front() - b * xs.front(), b, prev, cur);
    prev = cur;
  }
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    if (xs[i] >= mom.top()) break;
    const double b = f.segment_slope(i);
    const auto cur = mom.below(xs[i + 1]);
    acc += piece(ys[i] - b * xs[i], b, prev, cur);
    prev = cur;
  }
  if (xs.back() < mom.top()) {
    const double b = f.slope_right();
    const auto cur = mom.below(mom.top());
    acc += piece(ys.back() - b * xs.back(), b, prev, cur);
  }
  return acc;
}

inline double pushforward_mean(const MtMoments& mom, const MonotoneMap& f) { return map_expectation(mom, f, 0); }
/// E[(F(M_T) - M_T)^2]: the ceded risk of the terminal map.
inline double ceded_risk(const MtMoments& mom, const MonotoneMap& f) { return map_expectation(mom, f, 1); }

struct StrategySpec {
  SurplusSpec surplus;
  MonotoneMap terminal_map;  // centred: E[F_hat(M_T)] = 0
  double target_mean = 0.0;
  double u0R = 0.0;
  QuantileGrid q_hat;
  QuantileGrid q_m;
  double centering = 0.0;  // F_hat = Q_nu o F_{M_T} - centering

  /// h(t) = (alpha t / T) ||q_hat - q_M||.
  double surcharge_at(double t) const { return surcharge(surplus, q_hat, q_m, t); }
};

/// Builds F_hat = Q_nu o F_{M_T} from the grid q_hat, shifted so the pushforward of
/// law(M_T) has mean zero. `target_mean` is mean(nu); u0R defaults to mean(nu) - g(T) + h(T).
inline StrategySpec make_strategy(const SurplusSpec& spec, const QuantileGrid& q_hat, const QuantileGrid& q_m,
                                  double target_mean = 0.0, std::optional<double> u0R = {},
                                  const LawOptions& opts = {}) {
  spec.validate();
  if (q_hat.size() != q_m.size()) throw InvalidArgument("make_strategy: grids have different sizes");
  const LawSummary law = mt_law(spec, spec.horizon, opts);
  MonotoneMap f = brenier_map_1d(law, TargetLaw(q_hat), q_hat.size());
  const MtMoments mom(spec, spec.horizon, opts);
  const double delta = pushforward_mean(mom, f);
  f = f.shifted(-delta);
  require(lipschitz_bound(f) <= 1.0 + 1e-7, "terminal map is not 1-Lipschitz");
  StrategySpec s{spec, std::move(f), target_mean, 0.0, q_hat, q_m, delta};
  s.u0R = u0R.value_or(target_mean - spec.drift(spec.horizon) + s.surcharge_at(spec.horizon));
  return s;
}

/// No reinsurance: F_hat = identity on the support of M_T.
inline StrategySpec identity_strategy(const SurplusSpec& spec, std::size_t n, const LawOptions& opts = {}) {
  const QuantileGrid q_m = mt_quantile_grid(spec, spec.horizon, n, opts);
  return make_strategy(spec, q_m, q_m, 0.0, std::nullopt, opts);
}

/// G(m) = E[F(m + Z_s)] for a piecewise-linear F, using the kink decomposition
/// F(x) = y0 + b_L (x - x0) + sum_j D_j (x - x_j)^+ and E[Z_s] = 0.
class SmoothedMap {
public:
  SmoothedMap(const MonotoneMap& f, const SurplusSpec& spec, double s, const LawOptions& opts = {})
      : f_(f), kernel_(spec, s, opts), s_(s) {
    const auto& xs = f.knots_x();
    x0_ = xs.front();
    y0_ = f.knots_y().front();
    left_ = f.slope_left();
    double prev = left_;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const double next = j + 1 < xs.size() ? f.segment_slope(j) : f.slope_right();
      if (next != prev) {
        kink_x_.push_back(xs[j]);
        kink_d_.push_back(next - prev);
      }
      prev = next;
    }
  }

  double operator()(double m) const {
    if (s_ == 0.0) return f_(m);
    double v = y0_ + left_ * (m - x0_);
    for (std::size_t j = 0; j < kink_x_.size(); ++j) v += kink_d_[j] * kernel_.expected_positive_part(m - kink_x_[j]);
    return v;
  }

  const std::vector<double>& kinks() const { return kink_x_; }
  double window() const { return s_; }
  double shift() const { return kernel_.shift(); }

private:
  MonotoneMap f_;
  IncrementKernel kernel_;
  double s_;
  double x0_ = 0.0, y0_ = 0.0, left_ = 1.0;
  std::vector<double> kink_x_, kink_d_;
};

/// F_t tabulated on `n_uniform` knots over [x_first - c_{T-t}, c_t] plus the images of the
/// kinks of F_hat; below that range F_t is exactly affine with the left slope of F_hat.
inline MonotoneMap conditional_map(const StrategySpec& strategy, double t, std::size_t n_uniform = 2048,
                                   const LawOptions& opts = {}) {
  const SurplusSpec& spec = strategy.surplus;
  if (!(t >= 0.0 && t <= spec.horizon)) throw InvalidArgument("conditional_map: t must lie in [0, T]");
  require(n_uniform >= 2, "conditional_map needs at least 2 knots");
  const double s = spec.horizon - t;
  if (s == 0.0) return strategy.terminal_map;
  const SmoothedMap g(strategy.terminal_map, spec, s, opts);
  const double lo = strategy.terminal_map.knots_x().front() - g.shift();
  const double hi = std::max(spec.compensator(t), lo + 1e-9);

  std::vector<double> xs;
  xs.reserve(n_uniform + g.kinks().size());
  for (std::size_t i = 0; i < n_uniform; ++i)
    xs.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_uniform - 1));
  for (double k : g.kinks()) {
    const double x = k - g.shift();
    if (x > lo && x < hi) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  // Knots closer than this would turn evaluation round-off into slope noise.
  const double min_gap = 1e-7 * std::max(1.0, hi - lo);
  std::vector<double> kx;
  for (double x : xs)
    if (kx.empty() || x - kx.back() > min_gap) kx.push_back(x);
  if (kx.back() < hi) kx.back() = hi;

  std::vector<double> ky(kx.size());
  for (std::size_t i = 0; i < kx.size(); ++i) ky[i] = g(kx[i]);
  for (std::size_t i = 1; i < ky.size(); ++i) ky[i] = std::max(ky[i], ky[i - 1]);
  return MonotoneMap(std::move(kx), std::move(ky), strategy.terminal_map.slope_left());
}

struct SimOptions {
  std::size_t time_points = 256;
  std::size_t map_knots = 2048;
  LawOptions law{};
};

/// Maps F_t on a uniform time grid, blended linearly in t.
class ConditionalMapCache {
public:
  ConditionalMapCache(const StrategySpec& strategy, const SimOptions& opts) : horizon_(strategy.surplus.horizon) {
    require(opts.time_points >= 2, "time grid needs at least 2 points");
    step_ = horizon_ / static_cast<double>(opts.time_points - 1);
    maps_.reserve(opts.time_points);
    for (std::size_t i = 0; i < opts.time_points; ++i) {
      const double t = i + 1 == opts.time_points ? horizon_ : step_ * static_cast<double>(i);
      maps_.push_back(conditional_map(strategy, t, opts.map_knots, opts.law));
    }
  }

  double operator()(double t, double m) const {
    const double pos = std::clamp(t / step_, 0.0, static_cast<double>(maps_.size() - 1));
    const auto i = std::min(static_cast<std::size_t>(pos), maps_.size() - 2);
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * maps_[i](m) + w * maps_[i + 1](m);
  }

  const std::vector<MonotoneMap>& maps() const { return maps_; }

private:
  double horizon_;
  double step_;
  std::vector<MonotoneMap> maps_;
};

struct PathEnsemble {
  PathSkeleton skeleton;
  std::vector<double> retained;     // per jump
  std::vector<double> mr_before;    // M^R_{t-} per jump
  std::vector<double> mr_after;     // M^R_t per jump
  std::vector<double> mr_record;    // n_paths x record_times
  std::vector<double> u_record;     // U_t
  std::vector<double> ur_record;    // U^R_t
  std::vector<double> m_terminal;   // M_T per path
  std::vector<double> mr_terminal;  // M^R_T per path
  std::vector<double> ceded_sq;     // per path sum (dS^R - dS)^2
  std::vector<MonotoneMap> record_maps;
  double u0 = 0.0, u0R = 0.0;

  std::size_t n_paths() const { return skeleton.n_paths; }
  std::size_t n_records() const { return skeleton.record_times.size(); }
};

inline PathEnsemble simulate(const StrategySpec& strategy, std::size_t n_paths, std::uint64_t seed,
                             std::vector<double> record_times, const SimOptions& opts = {}) {
  const SurplusSpec& spec = strategy.surplus;
  PathEnsemble ens;
  ens.skeleton = sample_paths(spec, n_paths, seed, std::move(record_times));
  const auto& sk = ens.skeleton;
  ens.u0 = spec.initial_capital;
  ens.u0R = strategy.u0R;

  for (double t : sk.record_times) ens.record_maps.push_back(conditional_map(strategy, t, opts.map_knots, opts.law));
  const ConditionalMapCache cache(strategy, opts);

  const std::size_t nj = sk.jump_time.size();
  ens.retained.resize(nj);
  ens.mr_before.resize(nj);
  ens.mr_after.resize(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    const double t = sk.jump_time[j], m = sk.m_before[j];
    ens.mr_before[j] = cache(t, m);
    ens.mr_after[j] = cache(t, m - sk.claim[j]);
    ens.retained[j] = ens.mr_before[j] - ens.mr_after[j];
  }

  const std::size_t nr = sk.record_times.size();
  ens.mr_record.resize(n_paths * nr);
  ens.u_record.resize(n_paths * nr);
  ens.ur_record.resize(n_paths * nr);
  ens.m_terminal.resize(n_paths);
  ens.mr_terminal.resize(n_paths);
  ens.ceded_sq.assign(n_paths, 0.0);
  for (std::size_t p = 0; p < n_paths; ++p) {
    double paid = 0.0;
    for (std::size_t j = sk.jump_offset[p]; j < sk.jump_offset[p + 1]; ++j) {
      paid += sk.claim[j];
      const double c = sk.claim[j] - ens.retained[j];
      ens.ceded_sq[p] += c * c;
    }
    ens.m_terminal[p] = spec.compensator(spec.horizon) - paid;
    ens.mr_terminal[p] = strategy.terminal_map(ens.m_terminal[p]);
    for (std::size_t r = 0; r < nr; ++r) {
      const double t = sk.record_times[r];
      const double m = sk.m_at_record(p, r);
      const double mr = ens.record_maps[r](m);
      ens.mr_record[p * nr + r] = mr;
      ens.u_record[p * nr + r] = ens.u0 + spec.drift(t) + m;
      ens.ur_record[p * nr + r] = ens.u0R + spec.drift(t) - strategy.surcharge_at(t) + mr;
    }
  }
  return ens;
}

struct RecordDiagnostic {
  double t = 0.0;
  double mean_mr = 0.0;
  double se_mr = 0.0;
  double drift = 0.0;     // mean(M^R_T) - mean(M^R_t)
  double drift_se = 0.0;  // standard error of the paired difference
  bool martingale_ok = false;
  double lipschitz = 0.0;
  bool lipschitz_ok = false;
};

struct DiagnosticsReport {
  std::vector<RecordDiagnostic> records;
  std::size_t domination_violations = 0;
  std::size_t jumps = 0;
  double ks = 0.0;
  double ks_bound = 0.015;
  double ceded_mean = 0.0;
  double ceded_se = 0.0;
  double ceded_target = 0.0;      // ||q_hat - q_M||^2 on the grid
  double ceded_continuum = 0.0;   // E[(F_hat(M_T) - M_T)^2]
  double mean_mr_terminal = 0.0;
  double se_mr_terminal = 0.0;

  bool martingale_ok() const {
    return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.martingale_ok; });
  }
  bool lipschitz_ok() const {
    return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.lipschitz_ok; });
  }
  bool domination_ok() const { return domination_violations == 0; }
  bool ks_ok() const { return ks <= ks_bound; }
  /// MC sum of squared ceded jumps against E[(F_hat(M_T) - M_T)^2], the exact L2 distance
  /// between the quantile functions (ceded_target is its midpoint-rule value on the grid).
  /// An absolute 1e-12 floor absorbs roundoff when nothing is ceded.
  bool ceded_ok() const { return std::abs(ceded_mean - ceded_continuum) <= 3.0 * ceded_se + 1e-12; }
};

inline DiagnosticsReport diagnostics(const PathEnsemble& ens, const StrategySpec& strategy, const QuantileGrid& q_hat,
                                     const LawOptions& opts = {}) {
  if (q_hat.size() != strategy.q_m.size()) throw InvalidArgument("diagnostics: q_hat does not match the strategy");
  if (ens.mr_terminal.size() != ens.n_paths()) throw InvalidArgument("diagnostics: ensemble is incomplete");
  DiagnosticsReport rep;
  const std::size_t n = ens.n_paths(), nr = ens.n_records();
  const double sqn = std::sqrt(static_cast<double>(n));

  rep.mean_mr_terminal = mean_of(ens.mr_terminal);
  rep.se_mr_terminal = n > 1 ? sample_sd(ens.mr_terminal) / sqn : 0.0;

  std::vector<double> col(n), diff(n);
  for (std::size_t r = 0; r < nr; ++r) {
    RecordDiagnostic d;
    d.t = ens.skeleton.record_times[r];
    for (std::size_t p = 0; p < n; ++p) {
      col[p] = ens.mr_record[p * nr + r];
      diff[p] = ens.mr_terminal[p] - col[p];
    }
    d.mean_mr = mean_of(col);
    d.se_mr = n > 1 ? sample_sd(col) / sqn : 0.0;
    d.drift = mean_of(diff);
    d.drift_se = n > 1 ? sample_sd(diff) / sqn : 0.0;
    d.martingale_ok = std::abs(d.drift) <= 3.0 * d.drift_se + 1e-12;
    d.lipschitz = lipschitz_bound(ens.record_maps[r]);
    d.lipschitz_ok = d.lipschitz <= 1.0 + 1e-6;
    rep.records.push_back(d);
  }

  rep.jumps = ens.retained.size();
  for (std::size_t j = 0; j < rep.jumps; ++j) {
    const double r = ens.retained[j];
    if (r < -1e-12 || r > ens.skeleton.claim[j] + 1e-12) ++rep.domination_violations;
  }

  std::vector<double> sorted = ens.mr_terminal;
  std::sort(sorted.begin(), sorted.end());
  // compare against q_hat moved by the same centring shift as the map
  std::vector<double> target = q_hat.values();
  for (double& v : target) v -= strategy.centering;
  rep.ks = ks_distance_discrete(sorted, target);

  rep.ceded_mean = mean_of(ens.ceded_sq);
  rep.ceded_se = n > 1 ? sample_sd(ens.ceded_sq) / sqn : 0.0;
  const double l2 = l2_distance(q_hat.span(), strategy.q_m.span());
  rep.ceded_target = l2 * l2;
  rep.ceded_continuum = ceded_risk(MtMoments(strategy.surplus, strategy.surplus.horizon, opts), strategy.terminal_map);
  return rep;
}

/// Quantile grid of M^R_t: F_t pushed through the quantile grid of M_t.
inline QuantileGrid intermediate_quantile(const StrategySpec& strategy, double t, std::size_t n,
                                          const LawOptions& opts = {}) {
  const SurplusSpec& spec = strategy.surplus;
  if (!(t > 0.0 && t < spec.horizon)) throw InvalidArgument("intermediate_quantile: t must lie in (0, T)");
  const QuantileGrid q_t = mt_quantile_grid(spec, t, n, opts);
  const SmoothedMap g(strategy.terminal_map, spec, spec.horizon - t, opts);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = g(q_t[i]);
  for (std::size_t i = 1; i < n; ++i) v[i] = std::max(v[i], v[i - 1]);
  return QuantileGrid(std::move(v));
}

}  // namespace bassre
