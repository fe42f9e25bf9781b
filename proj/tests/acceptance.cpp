// Acceptance runner: prints one PASS/FAIL line per criterion and exits non-zero on any failure.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bassre/bass_sim.hpp"
#include "bassre/cli.hpp"
#include "bassre/dist_core.hpp"
#include "bassre/ot1d.hpp"
#include "bassre/qsolve.hpp"
#include "bassre/stats.hpp"
#include "oracle/oracle_solve.hpp"
#include "support.hpp"

using namespace bassre;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct FigureRun {
  cli::RunConfig cfg;
  QuantileGrid q_m;
  SolveResult result;
  StrategySpec strategy;
};

FigureRun run_figure(int id, std::size_t n) {
  FigureRun r{cli::figure_config(id, n), {}, {}, {}};
  r.q_m = mt_quantile_grid(r.cfg.surplus, r.cfg.surplus.horizon, n);
  r.result = solve(Problem{r.q_m, cli::resolve_constraints(r.cfg, r.q_m)});
  r.strategy = make_strategy(r.cfg.surplus, r.result.q_hat, r.q_m);
  return r;
}

// 1. Quota-share reproduction at n = 640 with k = Var(q_M)/2.
void criterion1() {
  const auto t0 = Clock::now();
  const FigureRun fig = run_figure(1, 640);
  const MtMoments mom(fig.cfg.surplus, fig.cfg.surplus.horizon);
  const double continuum = ceded_risk(mom, fig.strategy.terminal_map);
  const double elapsed = seconds_since(t0);
  const QuantileGrid c = fig.q_m.centered();
  double diff = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) diff = std::max(diff, std::abs(fig.result.q_hat[i] - std::sqrt(0.5) * c[i]));
  const double target = 3.0 - 2.0 * std::sqrt(2.0);
  const bool ok = diff <= 1e-4 && std::abs(continuum - target) <= 1e-5 && elapsed <= 60.0;
  report(1, ok,
         "max|q_hat - sqrt(1/2) q_M~| = " + fmt("%.3e", diff) + ", objective " + fmt("%.9f", continuum) +
             " vs 3-2sqrt2 = " + fmt("%.9f", target) + " (grid sum " + fmt("%.9f", fig.result.report.objective) +
             "), " + fmt("%.2f", elapsed) + " s");
}

// 2. Dykstra against the independent oracle on every figure configuration (n = 20).
void criterion2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string detail;
  bool ok = true;
  for (int id = 1; id <= 6; ++id) {
    const auto cfg = cli::figure_config(id, 20);
    const QuantileGrid qm = mt_quantile_grid(cfg.surplus, cfg.surplus.horizon, 20);
    const auto cons = cli::resolve_constraints(cfg, qm);
    const auto r = solve(Problem{qm, cons});
    const auto o = oracle::oracle_solve(qm, cons);
    const double rel = std::abs(r.report.objective - o.objective) / std::max(std::abs(o.objective), 1e-300);
    worst = std::max(worst, rel);
    if (!o.found || !(rel <= 1e-4)) ok = false;
    detail += " fig" + std::to_string(id) + "=" + fmt("%.2e", rel);
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed <= 600.0;
  report(2, ok, "worst relative gap " + fmt("%.2e", worst) + " (" + detail.substr(1) + "), " + fmt("%.1f", elapsed) + " s");
}

// 3. Two-slope stop-loss shape of the ES optimum.
void criterion3(const FigureRun& fig3) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < fig3.q_m.size(); ++i) {
    x.push_back(fig3.q_m[i]);
    y.push_back(fig3.strategy.terminal_map(fig3.q_m[i]));
  }
  const auto shape = testsupport::stop_loss_shape(x, y, 1e-3, 1.0 - 1e-2);
  report(3, shape.fraction >= 0.9,
         fmt("%.1f%%", 100.0 * shape.fraction) + " of " + std::to_string(shape.cells) +
             " support cells match (flat below, slope >= 0.99 above kink at m = " + fmt("%.4f", shape.kink) + ")");
}

// 4. Conditional maps are non-decreasing and 1-Lipschitz on a 10-point time grid.
void criterion4(const std::vector<FigureRun>& figs) {
  double worst_lip = 0.0, worst_drop = 0.0;
  for (const auto& f : figs) {
    const double T = f.cfg.surplus.horizon;
    for (int k = 0; k < 10; ++k) {
      const double t = T * k / 9.0;
      const MonotoneMap m = conditional_map(f.strategy, t);
      worst_lip = std::max(worst_lip, lipschitz_bound(m));
      // probe beyond the knots as well
      const double lo = m.knots_x().front() - 2.0, hi = m.knots_x().back() + 1.0;
      const int probes = 4000;
      double prev_x = lo, prev_y = m(lo);
      for (int i = 1; i <= probes; ++i) {
        const double x = lo + (hi - lo) * i / probes;
        const double y = m(x);
        worst_drop = std::max(worst_drop, prev_y - y);
        worst_lip = std::max(worst_lip, (y - prev_y) / (x - prev_x));
        prev_x = x;
        prev_y = y;
      }
    }
  }
  report(4, worst_lip <= 1.0 + 1e-6 && worst_drop <= 0.0,
         "max Lipschitz bound " + fmt("%.12f", worst_lip) + ", max decrease " + fmt("%.1e", worst_drop) +
             " over 6 figures x 10 times");
}

// 5-7. Simulation diagnostics with 1e5 paths per figure.
void criteria567(const std::vector<FigureRun>& figs) {
  bool ok5 = true, ok6 = true, ok7 = true;
  std::size_t violations = 0, jumps = 0;
  double worst_drift = 0.0, worst_ks = 0.0, worst_ceded = 0.0;
  std::string ceded_detail;
  const double T = figs.front().cfg.surplus.horizon;
  const std::vector<double> rec{0.2 * T, 0.4 * T, 0.6 * T, 0.8 * T, T};
  for (std::size_t k = 0; k < figs.size(); ++k) {
    const auto& f = figs[k];
    const auto ens = simulate(f.strategy, 100000, 42 + k, rec);
    const auto d = diagnostics(ens, f.strategy, f.result.q_hat);
    violations += d.domination_violations;
    jumps += d.jumps;
    for (const auto& r : d.records)
      if (r.drift_se > 0.0) worst_drift = std::max(worst_drift, std::abs(r.drift) / r.drift_se);
    ok5 = ok5 && d.domination_ok() && d.martingale_ok();
    ok6 = ok6 && d.ceded_ok();
    ok7 = ok7 && d.ks_ok();
    worst_ks = std::max(worst_ks, d.ks);
    const double z = std::abs(d.ceded_mean - d.ceded_continuum) / (3.0 * d.ceded_se + 1e-12);
    worst_ceded = std::max(worst_ceded, z);
    ceded_detail += " fig" + std::to_string(k + 1) + "=" + fmt("%.6f", d.ceded_mean) + "/" + fmt("%.6f", d.ceded_continuum);
  }
  report(5, ok5,
         std::to_string(violations) + " domination violations in " + std::to_string(jumps) +
             " jumps, worst martingale drift " + fmt("%.2f", worst_drift) + " SE (bound 3)");
  report(6, ok6, "worst |MC - ||Q_hat - Q_M||^2| / (3 SE + 1e-12) = " + fmt("%.3f", worst_ceded) + " (MC/exact:" + ceded_detail + ")");
  report(7, ok7, "worst KS distance " + fmt("%.4f", worst_ks) + " (bound 0.015)");
}

double brute_force_w2(std::vector<double> a, const std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - b[i]) * (a[i] - b[i]);
    best = std::min(best, c / static_cast<double>(a.size()));
  } while (std::next_permutation(a.begin(), a.end()));
  return std::sqrt(best);
}

// 8. W2 against brute-force assignment, and Brenier pushforwards against their targets.
void criterion8() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  double worst_w2 = 0.0;
  for (int k = 0; k < 500; ++k) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng() % 6);
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    std::sort(b.begin(), b.end());
    std::vector<double> as = a;
    std::sort(as.begin(), as.end());
    const double w = n == 1 ? std::abs(a[0] - b[0]) : w2_distance(QuantileGrid(as), QuantileGrid(b));
    worst_w2 = std::max(worst_w2, std::abs(w - brute_force_w2(a, b)));
  }

  // source: law of M_T for assorted parameters; target: random grids, flat on the atom cells
  double worst_ks = 0.0;
  std::uniform_real_distribution<double> par(0.5, 2.0);
  for (int k = 0; k < 20; ++k) {
    SurplusSpec s;
    s.intensity = par(rng);
    s.horizon = par(rng);
    s.claims = ClaimLaw::exponential(par(rng));
    const std::size_t n = 1000;
    const LawSummary mu = mt_law(s, s.horizon);
    std::vector<double> v(n);
    std::normal_distribution<double> z(0.0, 1.0);
    for (auto& x : v) x = z(rng) + (k % 2 ? std::exp(z(rng)) : 0.0);
    std::sort(v.begin(), v.end());
    const double atom = mu.atom_top.mass;
    std::size_t flat_from = n;
    for (std::size_t i = 0; i < n; ++i)
      if (QuantileGrid::level(i, n) > 1.0 - atom) {
        flat_from = i;
        break;
      }
    for (std::size_t i = flat_from; i < n; ++i) v[i] = v[flat_from];
    const QuantileGrid nu(v);
    const MonotoneMap f = brenier_map_1d(mu, TargetLaw(nu), n);
    const PathSkeleton sk = sample_paths(s, 100000, 800 + k, {s.horizon});
    std::vector<double> y(sk.n_paths);
    for (std::size_t p = 0; p < sk.n_paths; ++p) y[p] = f(sk.m_at_record(p, 0));
    std::sort(y.begin(), y.end());
    worst_ks = std::max(worst_ks, ks_distance_to_grid(y, nu));
  }
  report(8, worst_w2 <= 1e-10 && worst_ks <= 0.01,
         "worst W2 error " + fmt("%.1e", worst_w2) + " on 500 instances, worst pushforward KS " + fmt("%.4f", worst_ks) +
             " on 20 targets");
}

// 9. Series CDF inside the DKW band at confidence 1e-3; atom mass equals exp(-lambda T).
void criterion9() {
  double worst_ratio = 0.0, worst_atom = 0.0;
  const std::size_t n = 100000;
  const double eps = dkw_epsilon(n, 1e-3);
  const std::vector<std::array<double, 3>> specs{{1.0, 1.0, 1.0}, {2.0, 0.5, 1.0}, {0.5, 3.0, 2.0}, {3.0, 1.0, 0.5}};
  int seed = 90;
  for (const auto& [lambda, T, rate] : specs) {
    SurplusSpec s;
    s.intensity = lambda;
    s.horizon = T;
    s.claims = ClaimLaw::exponential(rate);
    const LawSummary law = mt_law(s, T);
    const double top = law.atom_top.location;
    const double mass = std::exp(-lambda * T);
    const double jump = law.cdf(top) - law.cdf(std::nextafter(top, -1e300));
    worst_atom = std::max({worst_atom, std::abs(law.atom_top.mass - mass), std::abs(jump - mass)});
    const PathSkeleton sk = sample_paths(s, n, seed++, {T});
    std::vector<double> x(n);
    for (std::size_t p = 0; p < n; ++p) x[p] = sk.m_at_record(p, 0);
    std::sort(x.begin(), x.end());
    auto left = [&](double v) { return v >= top ? 1.0 - law.atom_top.mass : law.cdf(v); };
    worst_ratio = std::max(worst_ratio, ks_distance(x, law.cdf, left) / eps);
  }
  report(9, worst_ratio <= 1.0 && worst_atom <= 1e-10,
         "worst KS / DKW bound = " + fmt("%.3f", worst_ratio) + " (eps " + fmt("%.4f", eps) + "), atom mass error " +
             fmt("%.1e", worst_atom));
}

}  // namespace

int main() {
  try {
    criterion1();
    criterion2();
    std::vector<FigureRun> figs;
    for (int id = 1; id <= 6; ++id) figs.push_back(run_figure(id, 640));
    criterion3(figs[2]);
    criterion4(figs);
    criteria567(figs);
    criterion8();
    criterion9();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
