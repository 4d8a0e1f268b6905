#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cfel {

struct CliOptions {
  std::string config_path;
  std::string preset;
  std::string out_dir;               // overrides config when nonempty
  std::vector<std::uint64_t> seeds;  // overrides config when nonempty
  int threads = 0;                   // overrides config when > 0
  std::string sweep_axis;            // tau_fixed_qtau | m | partition
  bool parallel_cells = false;
};

// Exit codes: 0 success, 2 configuration error, 3 numerical divergence.
int cmd_run(const CliOptions& options);
int cmd_sweep(const CliOptions& options);
int cmd_verify();

}  // namespace cfel
