#pragma once

#include <string>
#include <vector>

#include "cfel/types.hpp"

namespace cfel {

enum class Algorithm;

// Deterministic runtime model. Download time and server-side aggregation
// compute are treated as zero.
struct SystemProfile {
  double flops_per_iteration = 0.0;     // C: FLOPs for one SGD step
  std::vector<double> device_flops;     // c_k: per-device FLOPS
  double model_bits = 0.0;              // W
  double uplink_bps = 0.0;              // b_d2e, device -> edge
  double backhaul_bps = 0.0;            // b_e2e, edge <-> edge
  double cloud_bps = 0.0;               // b_d2c, device -> cloud (baselines)

  void validate() const;
  // Slowest-device compute seconds for `steps` SGD iterations.
  double compute_seconds(double steps) const;
};

// CNN-on-FEMNIST constants: 13.30 MFLOPs/sample at batch 50, 691.2 GFLOPS
// devices, 893,342 parameters at 32-bit, 10/50/1 Mbps links.
SystemProfile femnist_paper_profile();
// VGG-11-on-CIFAR-10 constants: 920.67 MFLOPs/sample, 9,750,922 parameters.
SystemProfile cifar_paper_profile();

// Seconds for one global round.
//   ce_fedavg:  max_k q*tau*C/c_k + q*W/b_d2e + pi*W/b_e2e
//   fedavg:     max_k q*tau*C/c_k + W/b_d2c
//   hier_favg:  max_k q*tau*C/c_k + (q-1)*W/b_d2e + W/b_d2c
//   local_edge: max_k q*tau*C/c_k + q*W/b_d2e
double round_time(Algorithm algorithm, const SystemProfile& profile, int tau, int q, int pi);

// Same, but with an explicit per-global-round SGD step count (epoch mode,
// where devices run ceil(rows/batch)*tau steps per edge round).
double round_time_steps(Algorithm algorithm, const SystemProfile& profile, double steps, int q,
                        int pi);

double total_time(double round_seconds, int p);

}  // namespace cfel
