#include "cfel/costmodel.hpp"

#include <algorithm>

#include "cfel/engine.hpp"

namespace cfel {

void SystemProfile::validate() const {
  if (!(flops_per_iteration > 0.0)) throw ConfigError("profile: flops_per_iteration must be > 0");
  if (device_flops.empty()) throw ConfigError("profile: device_flops must be nonempty");
  for (double c : device_flops) {
    if (!(c > 0.0)) throw ConfigError("profile: device FLOPS must be > 0");
  }
  if (!(model_bits > 0.0)) throw ConfigError("profile: model_bits must be > 0");
  if (!(uplink_bps > 0.0) || !(backhaul_bps > 0.0) || !(cloud_bps > 0.0)) {
    throw ConfigError("profile: bandwidths must be > 0");
  }
}

double SystemProfile::compute_seconds(double steps) const {
  double slowest = *std::min_element(device_flops.begin(), device_flops.end());
  return steps * flops_per_iteration / slowest;
}

SystemProfile femnist_paper_profile() {
  SystemProfile p;
  p.flops_per_iteration = 13.30e6 * 50.0;
  p.device_flops = {691.2e9};
  p.model_bits = 893342.0 * 32.0;
  p.uplink_bps = 10e6;
  p.backhaul_bps = 50e6;
  p.cloud_bps = 1e6;
  return p;
}

SystemProfile cifar_paper_profile() {
  SystemProfile p;
  p.flops_per_iteration = 920.67e6 * 50.0;
  p.device_flops = {691.2e9};
  p.model_bits = 9750922.0 * 32.0;
  p.uplink_bps = 10e6;
  p.backhaul_bps = 50e6;
  p.cloud_bps = 1e6;
  return p;
}

double round_time_steps(Algorithm algorithm, const SystemProfile& profile, double steps, int q,
                        int pi) {
  profile.validate();
  if (q < 1 || pi < 0 || steps <= 0.0) {
    throw ConfigError("round_time: need q >= 1, pi >= 0, steps > 0");
  }
  double compute = profile.compute_seconds(steps);
  double w = profile.model_bits;
  switch (algorithm) {
    case Algorithm::ce_fedavg:
      return compute + q * w / profile.uplink_bps + pi * w / profile.backhaul_bps;
    case Algorithm::fedavg:
      return compute + w / profile.cloud_bps;
    case Algorithm::hier_favg:
      return compute + (q - 1) * w / profile.uplink_bps + w / profile.cloud_bps;
    case Algorithm::local_edge:
      return compute + q * w / profile.uplink_bps;
  }
  throw ConfigError("round_time: unknown algorithm");
}

double round_time(Algorithm algorithm, const SystemProfile& profile, int tau, int q, int pi) {
  if (tau < 1) throw ConfigError("round_time: need tau >= 1");
  return round_time_steps(algorithm, profile, static_cast<double>(q) * tau, q, pi);
}

double total_time(double round_seconds, int p) {
  if (p < 1) throw ConfigError("total_time: need p >= 1");
  return round_seconds * p;
}

}  // namespace cfel
