#include <CLI11.hpp>

#include "cfel/commands.hpp"

// cfel: simulator for cooperative federated edge learning.
//   cfel run    --config cfg.json | --preset desk-logistic [--out DIR] [--seeds ...]
//   cfel sweep  --axis tau_fixed_qtau|m|partition (same config flags)
//   cfel verify
int main(int argc, char** argv) {
  CLI::App app{"cooperative federated edge learning simulator"};
  app.require_subcommand(1);

  cfel::CliOptions options;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", options.config_path, "experiment config (JSON)");
    cmd->add_option("--preset", options.preset,
                    "femnist-paper | cifar-paper | desk-quadratic | desk-logistic");
    cmd->add_option("--out", options.out_dir, "output directory (overrides config)");
    cmd->add_option("--seeds", options.seeds, "seed list (overrides config)");
    cmd->add_option("--threads", options.threads, "worker threads (overrides config)");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "execute one experiment per seed");
  add_common(run_cmd);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a one-axis sweep with a summary table");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--axis", options.sweep_axis, "tau_fixed_qtau | m | partition")
      ->required();
  sweep_cmd->add_flag("--parallel", options.parallel_cells, "run sweep cells concurrently");

  CLI::App* verify_cmd =
      app.add_subcommand("verify", "reduction and matrix-oracle equivalence checks");

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) return cfel::cmd_run(options);
  if (sweep_cmd->parsed()) return cfel::cmd_sweep(options);
  if (verify_cmd->parsed()) return cfel::cmd_verify();
  return 1;
}
