#pragma once

#include <vector>

#include "cfel/engine.hpp"

namespace cfel {

// Explicit matrix-form replay of the training dynamics:
//
//   X_{t+1} = (X_t - eta * G_t) * W_t
//
// with W_t = Z when (t+1) mod q*tau == 0, V when (t+1) mod tau == 0 (and not
// a Z step), I otherwise; V = C*B and Z = C*H^pi*B assembled from the
// cluster indicator matrices. The stochastic batch stream is identical to
// the engine's, so trajectories must agree to rounding error. Restricted to
// plain SGD (momentum 0), uniform weighting, iterations mode.
struct OracleResult {
  std::vector<std::vector<ParamVec>> pre;   // [t][k], X_t - eta*G_t before mixing
  std::vector<std::vector<ParamVec>> post;  // [t][k], after mixing
  std::vector<ParamVec> mean_grad;          // [t], uniform gradient average
};

OracleResult run_matrix_oracle(const RunConfig& config, const Fleet& fleet,
                               const MixingMatrix& mixing);

// The n x n mixing operator applied at iteration t (identity, V, or Z);
// exposed for schedule tests.
enum class StageOp { identity, intra, inter };
StageOp stage_op(long t_next, int tau, int q);

// Dense V = C*B and Z = C*H^pi*B for a layout (row-major n x n).
std::vector<double> build_intra_operator(const ClusterLayout& layout);
std::vector<double> build_inter_operator(const ClusterLayout& layout,
                                         const std::vector<double>& h_pi);

}  // namespace cfel
