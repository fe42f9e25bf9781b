#pragma once

// Configuration-driven front end: JSON config parsing, figure presets and the
// law / solve / simulate / figure commands writing CSV and JSON outputs.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bass_sim.hpp"
#include "dist_core.hpp"
#include "ot1d.hpp"
#include "qsolve.hpp"
#include "riskfun.hpp"
#include "surplus.hpp"

namespace bassre::cli {

using json = nlohmann::ordered_json;

enum class Mode { Law, Solve, Simulate, Figure };

struct SimulateSettings {
  std::size_t n_paths = 100000;
  std::uint64_t seed = 42;
  std::vector<double> record_times;  // empty: 0.2T, 0.4T, ..., T
  std::optional<std::string> solution;  // solution.csv from an earlier solve
};

/// Constraint as written in the config; relative variance bounds are resolved
/// against Var(q_M) once the grid is known.
struct ConstraintEntry {
  ConstraintSpec spec;
  std::optional<double> k_relative;
};

struct RunConfig {
  SurplusSpec surplus;
  std::size_t grid_n = 640;
  std::vector<ConstraintEntry> constraints;
  Mode mode = Mode::Solve;
  SimulateSettings simulate;
  int figure_id = 0;
  std::string output_dir = "out";
  LawOptions law;
  SimOptions sim;
};

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline double num(const json& j, const char* key) {
  if (!j.contains(key)) throw InvalidArgument(std::string("config: missing field '") + key + "'");
  if (!j.at(key).is_number()) throw InvalidArgument(std::string("config: field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline double num_or(const json& j, const char* key, double dflt) { return j.contains(key) ? num(j, key) : dflt; }

inline ClaimLaw parse_claims(const json& j) {
  const std::string type = j.value("type", "exponential");
  if (type == "exponential") return ClaimLaw::exponential(num_or(j, "rate", 1.0));
  if (type == "deterministic") return ClaimLaw::deterministic(num(j, "size"));
  if (type == "empirical") {
    if (!j.contains("samples") || !j["samples"].is_array()) throw InvalidArgument("config: empirical claims need 'samples'");
    return ClaimLaw::empirical(j["samples"].get<std::vector<double>>());
  }
  throw InvalidArgument("config: unknown claim law '" + type + "'");
}

inline SurplusSpec parse_surplus(const json& j) {
  SurplusSpec s;
  s.intensity = num_or(j, "intensity", 1.0);
  s.horizon = num_or(j, "horizon", 1.0);
  if (j.contains("claims")) s.claims = parse_claims(j["claims"]);
  s.loading = num_or(j, "loading", 0.1);
  s.initial_capital = num_or(j, "initial_capital", 10.0);
  s.surcharge_alpha = num_or(j, "surcharge_alpha", 0.0);
  s.validate();
  return s;
}

inline ConstraintEntry parse_constraint(const json& j) {
  const std::string type = j.value("type", "");
  ConstraintEntry e;
  if (type == "variance") {
    if (j.contains("k_relative")) {
      e.k_relative = num(j, "k_relative");
      e.spec = VarianceConstraint{0.0};
    } else {
      e.spec = VarianceConstraint{num(j, "k")};
    }
  } else if (type == "var") {
    e.spec = VaRConstraint{num(j, "p"), num(j, "c"), num_or(j, "alpha", 0.0)};
  } else if (type == "es") {
    e.spec = ESConstraint{num(j, "p"), num(j, "c"), num_or(j, "alpha", 0.0)};
  } else if (type == "skew_gm") {
    e.spec = SkewGMConstraint{num(j, "u"), num(j, "k")};
  } else if (type == "skew_sup") {
    SkewSupConstraint s{num(j, "k"), default_skew_u_grid()};
    if (j.contains("u_grid")) s.u_grid = j["u_grid"].get<std::vector<double>>();
    e.spec = s;
  } else if (type == "skew_pearson2") {
    e.spec = SkewPearson2Constraint{num(j, "k")};
  } else if (type == "skew_int") {
    e.spec = SkewIntConstraint{num(j, "k")};
  } else if (type == "kurt") {
    e.spec = KurtConstraint{num(j, "u"), num(j, "v"), num(j, "k")};
  } else {
    throw InvalidArgument("config: unknown constraint type '" + type + "'");
  }
  return e;
}

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  if (j.contains("surplus")) c.surplus = parse_surplus(j["surplus"]);
  else c.surplus.claims = ClaimLaw::exponential(1.0);
  if (j.contains("grid_n")) c.grid_n = j["grid_n"].get<std::size_t>();
  if (j.contains("constraints"))
    for (const auto& e : j["constraints"]) c.constraints.push_back(parse_constraint(e));
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("mode")) {
    const auto& m = j["mode"];
    const std::string type = m.is_string() ? m.get<std::string>() : m.value("type", "solve");
    if (type == "law") c.mode = Mode::Law;
    else if (type == "solve") c.mode = Mode::Solve;
    else if (type == "simulate") {
      c.mode = Mode::Simulate;
      if (m.is_object()) {
        if (m.contains("n_paths")) c.simulate.n_paths = m["n_paths"].get<std::size_t>();
        if (m.contains("seed")) c.simulate.seed = m["seed"].get<std::uint64_t>();
        if (m.contains("record_times")) c.simulate.record_times = m["record_times"].get<std::vector<double>>();
        if (m.contains("solution")) c.simulate.solution = m["solution"].get<std::string>();
      }
    } else if (type == "figure") {
      c.mode = Mode::Figure;
      if (m.is_object() && m.contains("id")) c.figure_id = m["id"].get<int>();
    } else {
      throw InvalidArgument("config: unknown mode '" + type + "'");
    }
  }
  if (j.contains("law")) {
    const auto& l = j["law"];
    if (l.contains("mc_samples")) c.law.mc_samples = l["mc_samples"].get<std::size_t>();
    if (l.contains("seed")) c.law.seed = l["seed"].get<std::uint64_t>();
  }
  if (j.contains("simulation")) {
    const auto& s = j["simulation"];
    if (s.contains("time_points")) c.sim.time_points = s["time_points"].get<std::size_t>();
    if (s.contains("map_knots")) c.sim.map_knots = s["map_knots"].get<std::size_t>();
  }
  c.sim.law = c.law;
  require(c.grid_n >= 2, "config: grid_n must be >= 2");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

/// Constraint levels actually used: relative variance bounds become k = k_relative * Var(q_M).
inline std::vector<ConstraintSpec> resolve_constraints(const RunConfig& c, const QuantileGrid& q_m) {
  std::vector<ConstraintSpec> out;
  for (const auto& e : c.constraints) {
    if (e.k_relative) out.push_back(VarianceConstraint{*e.k_relative * q_m.variance()});
    else out.push_back(e.spec);
  }
  return out;
}

/// Skew levels that are not integral on an n-cell grid are dropped from the default grid.
inline std::vector<double> compatible_u_grid(std::size_t n) {
  std::vector<double> out;
  for (double u : default_skew_u_grid()) {
    const double x = u * static_cast<double>(n);
    if (std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, x)) out.push_back(u);
  }
  return out;
}

/// Preset figure problems 1-6: lambda = T = 1, Exp(1) claims.
inline RunConfig figure_config(int id, std::size_t n = 640) {
  if (id < 1 || id > 6) throw InvalidArgument("figure id must lie in 1..6");
  RunConfig c;
  c.surplus.claims = ClaimLaw::exponential(1.0);
  c.grid_n = n;
  c.mode = Mode::Figure;
  c.figure_id = id;
  auto var_half = [] {
    ConstraintEntry e{VarianceConstraint{0.0}, 0.5};
    return e;
  };
  const SkewSupConstraint skew{0.6, compatible_u_grid(n)};
  const KurtConstraint kurt{0.1, 0.25, 2.5};
  switch (id) {
    case 1: c.constraints = {var_half()}; break;
    case 2: c.constraints = {{VaRConstraint{0.2, -0.3, 0.05}, {}}}; break;
    case 3: c.constraints = {{ESConstraint{0.2, -0.3, 0.05}, {}}}; break;
    case 4: c.constraints = {{skew, {}}}; break;
    case 5: c.constraints = {{kurt, {}}}; break;
    case 6: c.constraints = {var_half(), {ESConstraint{0.2, -0.9, 0.05}, {}}, {skew, {}}, {kurt, {}}}; break;
  }
  c.surplus.surcharge_alpha = (id == 2 || id == 3 || id == 6) ? 0.05 : 0.0;
  return c;
}

struct SolveOutcome {
  QuantileGrid q_m;
  std::vector<ConstraintSpec> constraints;
  SolveResult result;
};

inline SolveOutcome run_solve(const RunConfig& c, const SolveOptions& opts = {}) {
  QuantileGrid q_m = mt_quantile_grid(c.surplus, c.surplus.horizon, c.grid_n, c.law);
  auto cons = resolve_constraints(c, q_m);
  auto res = solve(Problem{q_m, cons}, opts);
  return {std::move(q_m), std::move(cons), std::move(res)};
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error("cannot create output directory '" + dir + "'");
}

inline std::ofstream open_out(const std::string& dir, const std::string& name) {
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

inline void write_json(const std::string& dir, const std::string& name, const json& j) {
  auto out = open_out(dir, name);
  out << j.dump(2) << "\n";
}

inline json constraint_json(const ConstraintSpec& c) {
  return std::visit(
      [&](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        json j;
        j["type"] = constraint_name(c);
        if constexpr (std::is_same_v<T, VarianceConstraint>) {
          j["k"] = s.k;
        } else if constexpr (std::is_same_v<T, VaRConstraint> || std::is_same_v<T, ESConstraint>) {
          j["p"] = s.p;
          j["c"] = s.c;
          j["alpha"] = s.alpha;
        } else if constexpr (std::is_same_v<T, SkewGMConstraint>) {
          j["u"] = s.u;
          j["k"] = s.k;
        } else if constexpr (std::is_same_v<T, SkewSupConstraint>) {
          j["k"] = s.k;
          j["u_grid"] = s.u_grid;
        } else if constexpr (std::is_same_v<T, KurtConstraint>) {
          j["u"] = s.u;
          j["v"] = s.v;
          j["k"] = s.k;
        } else {
          j["k"] = s.k;
        }
        return j;
      },
      c);
}

inline json surplus_json(const SurplusSpec& s) {
  return json{{"intensity", s.intensity},       {"horizon", s.horizon},
              {"claims", s.claims.name()},      {"loading", s.loading},
              {"initial_capital", s.initial_capital}, {"surcharge_alpha", s.surcharge_alpha}};
}

/// law.csv (u, Q_MT) and law_summary.json.
inline int cmd_law(const RunConfig& c) {
  ensure_dir(c.output_dir);
  const LawSummary law = mt_law(c.surplus, c.surplus.horizon, c.law);
  const QuantileGrid q = quantile_grid_of(law, c.grid_n);
  auto out = open_out(c.output_dir, "law.csv");
  out << "u,Q_MT\n";
  for (std::size_t i = 0; i < q.size(); ++i) out << fmt(QuantileGrid::level(i, q.size())) << "," << fmt(q[i]) << "\n";
  write_json(c.output_dir, "law_summary.json",
             json{{"surplus", surplus_json(c.surplus)},
                  {"grid_n", c.grid_n},
                  {"mean", law.mean},
                  {"variance", law.variance},
                  {"atom_mass", law.atom_top.mass},
                  {"atom_location", law.atom_top.location},
                  {"grid_mean", q.mean()},
                  {"grid_variance", q.variance()}});
  return 0;
}

inline json report_json(const RunConfig& c, const SolveOutcome& o, const StrategySpec& st) {
  json slacks = json::object();
  json cons = json::array();
  for (std::size_t i = 0; i < o.constraints.size(); ++i) {
    cons.push_back(constraint_json(o.constraints[i]));
    slacks[constraint_name(o.constraints[i]) + (o.constraints.size() > 1 ? "_" + std::to_string(i) : "")] =
        o.result.report.slacks[i];
  }
  const auto& r = o.result.report;
  return json{{"status", "ok"},
              {"surplus", surplus_json(c.surplus)},
              {"grid_n", c.grid_n},
              {"constraints", cons},
              {"objective", r.objective},
              {"iterations", r.iterations},
              {"branch_chosen", r.branch_chosen ? json(*r.branch_chosen) : json(nullptr)},
              {"converged", r.converged},
              {"max_violation", r.max_violation},
              {"slacks", slacks},
              {"ceded_risk_continuum", ceded_risk(MtMoments(c.surplus, c.surplus.horizon, c.law), st.terminal_map)},
              {"map_lipschitz", lipschitz_bound(st.terminal_map)},
              {"map_centering", st.centering},
              {"u0R", st.u0R},
              {"surcharge_T", st.surcharge_at(c.surplus.horizon)}};
}

inline void write_solution_csv(const std::string& dir, const SolveOutcome& o, const StrategySpec& st) {
  auto out = open_out(dir, "solution.csv");
  out << "u,Q_MT,Q_hat,F_hat_x,F_hat_y\n";
  const std::size_t n = o.q_m.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = o.q_m[i];
    out << fmt(QuantileGrid::level(i, n)) << "," << fmt(x) << "," << fmt(o.result.q_hat[i]) << "," << fmt(x) << ","
        << fmt(st.terminal_map(x)) << "\n";
  }
}

inline json infeasible_json(const std::string& what, const SolveReport& r) {
  return json{{"status", "infeasible"}, {"message", what}, {"best_residual", r.max_violation},
              {"iterations", r.iterations}, {"branches_solved", r.branches_solved}};
}

/// solution.csv + report.json; returns 2 when the constraints cannot be met.
inline int cmd_solve(const RunConfig& c) {
  ensure_dir(c.output_dir);
  try {
    const SolveOutcome o = run_solve(c);
    const StrategySpec st = make_strategy(c.surplus, o.result.q_hat, o.q_m, 0.0, std::nullopt, c.law);
    write_solution_csv(c.output_dir, o, st);
    write_json(c.output_dir, "report.json", report_json(c, o, st));
  } catch (const Infeasible& e) {
    write_json(c.output_dir, "report.json", infeasible_json(e.what(), e.report));
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 2;
  }
  return 0;
}

inline int cmd_figure(int id, std::size_t n, const std::string& out_dir) {
  RunConfig c = figure_config(id, n);
  c.output_dir = out_dir;
  return cmd_solve(c);
}

/// Reads the Q_hat column of a solution.csv.
inline QuantileGrid read_solution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open solution file '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) head.push_back(cell);
  }
  const auto it = std::find(head.begin(), head.end(), "Q_hat");
  if (it == head.end()) throw InvalidArgument("solution file has no Q_hat column");
  const auto col = static_cast<std::size_t>(it - head.begin());
  std::vector<double> q;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t k = 0; k <= col; ++k)
      if (!std::getline(ss, cell, ',')) throw InvalidArgument("solution file has a short row");
    q.push_back(std::stod(cell));
  }
  return QuantileGrid(std::move(q));
}

/// paths.csv (per record time) + diagnostics.csv.
inline int cmd_simulate(const RunConfig& c) {
  ensure_dir(c.output_dir);
  const QuantileGrid q_m = mt_quantile_grid(c.surplus, c.surplus.horizon, c.grid_n, c.law);
  std::optional<QuantileGrid> q_hat;
  if (c.simulate.solution) {
    q_hat = read_solution(*c.simulate.solution);
    if (q_hat->size() != q_m.size())
      throw InvalidArgument("solution grid size " + std::to_string(q_hat->size()) + " does not match grid_n " +
                            std::to_string(q_m.size()));
  } else if (c.constraints.empty()) {
    q_hat = q_m;  // no constraints and no solution: no reinsurance
  } else {
    try {
      q_hat = run_solve(c).result.q_hat;
    } catch (const Infeasible& e) {
      write_json(c.output_dir, "report.json", infeasible_json(e.what(), e.report));
      std::fprintf(stderr, "infeasible: %s\n", e.what());
      return 2;
    }
  }
  const StrategySpec st = make_strategy(c.surplus, *q_hat, q_m, 0.0, std::nullopt, c.law);
  std::vector<double> rec = c.simulate.record_times;
  if (rec.empty())
    for (int i = 1; i <= 5; ++i) rec.push_back(c.surplus.horizon * 0.2 * i);
  const PathEnsemble ens = simulate(st, c.simulate.n_paths, c.simulate.seed, rec, c.sim);
  const DiagnosticsReport d = diagnostics(ens, st, *q_hat, c.law);

  const std::size_t n = ens.n_paths(), nr = ens.n_records();
  auto stats = [&](const std::vector<double>& v, std::size_t r) {
    std::vector<double> col(n);
    for (std::size_t p = 0; p < n; ++p) col[p] = v[p * nr + r];
    return std::pair{mean_of(col), n > 1 ? sample_sd(col) : 0.0};
  };
  auto out = open_out(c.output_dir, "paths.csv");
  out << "t,mean_U,std_U,mean_UR,std_UR,mean_MR,std_MR,ceded_risk\n";
  const auto& sk = ens.skeleton;
  for (std::size_t r = 0; r < nr; ++r) {
    const double t = sk.record_times[r];
    double ceded = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t j = sk.jump_offset[p]; j < sk.jump_offset[p + 1] && sk.jump_time[j] <= t; ++j) {
        const double x = sk.claim[j] - ens.retained[j];
        ceded += x * x;
      }
    const auto [mu, su] = stats(ens.u_record, r);
    const auto [mur, sur] = stats(ens.ur_record, r);
    const auto [mmr, smr] = stats(ens.mr_record, r);
    out << fmt(t) << "," << fmt(mu) << "," << fmt(su) << "," << fmt(mur) << "," << fmt(sur) << "," << fmt(mmr) << ","
        << fmt(smr) << "," << fmt(ceded / static_cast<double>(n)) << "\n";
  }

  auto dg = open_out(c.output_dir, "diagnostics.csv");
  dg << "check,t,value,bound,pass\n";
  auto row = [&](const std::string& name, double t, double v, double b, bool ok) {
    dg << name << "," << fmt(t) << "," << fmt(v) << "," << fmt(b) << "," << (ok ? 1 : 0) << "\n";
  };
  for (const auto& r : d.records) {
    row("martingale_drift", r.t, std::abs(r.drift), 3.0 * r.drift_se, r.martingale_ok);
    row("lipschitz", r.t, r.lipschitz, 1.0 + 1e-6, r.lipschitz_ok);
  }
  const double T = c.surplus.horizon;
  row("domination_violations", T, static_cast<double>(d.domination_violations), 0.0, d.domination_ok());
  row("ks_terminal", T, d.ks, d.ks_bound, d.ks_ok());
  row("ceded_risk", T, d.ceded_mean, d.ceded_continuum, d.ceded_ok());
  row("ceded_risk_se", T, d.ceded_se, 3.0 * d.ceded_se, true);
  row("ceded_risk_grid", T, d.ceded_target, 0.0, true);
  return 0;
}

}  // namespace bassre::cli
