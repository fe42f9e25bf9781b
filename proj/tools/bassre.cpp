// Command-line entry point: bassre {law,solve,simulate,figure} [--config F] [--out D] [--seed S] [--n N]

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "bassre/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t n = 0;
};

void add_common(CLI::App* cmd, Flags& f, bool needs_config) {
  auto* opt = cmd->add_option("--config", f.config, "JSON run configuration");
  if (needs_config) opt->required();
  cmd->add_option("--out", f.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", f.seed, "simulation seed");
  cmd->add_option("--n", f.n, "quantile grid size (overrides grid_n)");
}

bassre::cli::RunConfig configure(const Flags& f, bassre::cli::RunConfig c, const CLI::App* cmd) {
  if (!f.out.empty()) c.output_dir = f.out;
  if (cmd->count("--seed")) c.simulate.seed = f.seed;
  if (cmd->count("--n")) c.grid_n = f.n;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal dynamic reinsurance via one-dimensional martingale transport"};
  app.require_subcommand(1);
  Flags flags;
  int figure_id = 0;

  auto* law = app.add_subcommand("law", "tabulate the quantile function of M_T");
  add_common(law, flags, true);
  auto* solve = app.add_subcommand("solve", "solve the constrained quantile problem");
  add_common(solve, flags, true);
  auto* sim = app.add_subcommand("simulate", "simulate the strategy and run diagnostics");
  add_common(sim, flags, true);
  auto* fig = app.add_subcommand("figure", "solve one of the preset figure problems");
  add_common(fig, flags, false);
  fig->add_option("id", figure_id, "figure id (1-6)")->required()->check(CLI::Range(1, 6));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  using namespace bassre::cli;
  try {
    if (*fig) {
      // presets fix the model and constraints; a config may still supply grid_n and output_dir
      RunConfig c = flags.config.empty() ? figure_config(figure_id) : load_config(flags.config);
      const std::size_t n = fig->count("--n") ? flags.n : c.grid_n;
      return cmd_figure(figure_id, n, flags.out.empty() ? c.output_dir : flags.out);
    }
    if (*law) return cmd_law(configure(flags, load_config(flags.config), law));
    if (*solve) return cmd_solve(configure(flags, load_config(flags.config), solve));
    if (*sim) return cmd_simulate(configure(flags, load_config(flags.config), sim));
  } catch (const bassre::Infeasible& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
