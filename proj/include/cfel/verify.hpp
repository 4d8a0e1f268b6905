#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cfel/engine.hpp"

namespace cfel {

struct CheckResult {
  std::string name;
  bool pass = false;
  double max_err = 0.0;
  std::string detail;
};

// Reduction and oracle equivalence harnesses. Each runs over the given
// seeds and reports the worst deviation observed.
//
// Single cluster and q = 1 must match plain FedAvg bit for bit.
CheckResult check_fedavg_reduction(std::span<const std::uint64_t> seeds);
// One device per cluster and tau = 1 must match a directly coded
// decentralized local SGD loop within 1e-12.
CheckResult check_decentralized_reduction(std::span<const std::uint64_t> seeds);
// Complete backhaul must match a directly coded hierarchical SGD loop
// within 1e-12.
CheckResult check_hsgd_reduction(std::span<const std::uint64_t> seeds);
// Engine trajectories must match the explicit matrix-form update within
// 1e-10 at every iteration, and the averaged-model recursion must hold to
// 1e-12 per step. One randomized configuration per seed.
CheckResult check_matrix_oracle(std::span<const std::uint64_t> seeds);

std::vector<CheckResult> run_all_checks(std::span<const std::uint64_t> seeds);

// Randomized small configuration for the oracle harness (equal cluster
// sizes, plain SGD, uniform weighting).
struct OracleCase {
  RunConfig config;
  Fleet fleet;
  MixingMatrix mixing;
  std::shared_ptr<const LossModel> model;  // owns Fleet::model
};
OracleCase make_oracle_case(std::uint64_t seed);

}  // namespace cfel
