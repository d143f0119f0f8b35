#include <cstdint>
#include <string>

#include "CLI11.hpp"

#include "quasidiag/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"quasidiag: iterative diagonalization of monotone quasiperiodic operators"};
  app.require_subcommand(1);

  quasidiag::CliOptions opt;
  std::string out_dir;
  int workers = 0;
  std::uint64_t seed = 0;

  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides out_dir)");
    sub->add_option("--workers", workers, "worker threads (overrides workers, default 1)");
    sub->add_option("--seed", seed, "seed for randomized instances");
    sub->footer(
        "Defaults: tolerances.residual_target 1e-12, tolerances.dominance_margin 1e-3, "
        "tolerances.monotone_tol 1e-10, tolerances.lipschitz_eta 0.05, tolerances.min_gap_width 1e-4, "
        "tolerances.gap_stability 1e-3, phase_grid 64, ind2_grid 64, box_sizes [400,800], t_count 100.\n"
        "Exit codes: 0 pass, 2 config error, 3 regime failure, 4 monitor failure.\n"
        "QUASIDIAG_LOG sets verbosity (trace, debug, info, warn, error, off).");
    sub->callback([&, name, sub] {
      opt.command = name;
      if (sub->count("--out")) opt.out_dir = out_dir;
      if (sub->count("--workers")) opt.workers = workers;
      if (sub->count("--seed")) opt.seed = seed;
    });
  };
  add("diagonalize", "run the scheme at x0; write E(x), psi and per-step diagnostics");
  add("verify", "run the invariant suite and report margins");
  add("spectrum", "spectra per box size, gaps, IDS and the rank-one sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : quasidiag::kExitConfig;
  }
  return quasidiag::run_command(opt);
}
