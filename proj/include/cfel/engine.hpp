#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfel/costmodel.hpp"
#include "cfel/dataset.hpp"
#include "cfel/loss.hpp"
#include "cfel/topology.hpp"
#include "cfel/types.hpp"

namespace cfel {

enum class Algorithm { ce_fedavg, fedavg, hier_favg, local_edge };
enum class Weighting { uniform, sample_size };
enum class TauUnit { iterations, epochs };
// minibatch: sampled-with-replacement stochastic gradients (epoch mode uses
// shuffle-and-sweep instead). full_batch: exact gradients. full_plus_noise:
// exact gradient plus isotropic Gaussian noise with E||noise||^2 =
// noise_sigma^2, which makes the variance bound exact for the bound checks.
enum class GradientMode { minibatch, full_batch, full_plus_noise };

Algorithm algorithm_from_string(const std::string& s);
const char* to_string(Algorithm a);

struct RunConfig {
  Algorithm algorithm = Algorithm::ce_fedavg;
  int tau = 1;
  int q = 1;
  int pi = 1;
  int rounds = 1;  // p global rounds
  int batch_size = 1;
  double lr = 0.1;
  double momentum = 0.0;
  Weighting weighting = Weighting::uniform;
  TauUnit tau_unit = TauUnit::iterations;
  GradientMode grad_mode = GradientMode::minibatch;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  int threads = 1;
  double abort_threshold = 1e8;  // |param| beyond this aborts the run
  // Batch/noise stream key per device; defaults to the device id. Letting
  // two devices share a stream reproduces mirrored-fleet symmetry setups.
  std::vector<std::uint64_t> stream_ids;

  long total_iterations() const {  // T = p*q*tau (iterations mode)
    return static_cast<long>(rounds) * q * tau;
  }
  void validate() const;
};

struct RoundRecord {
  int round = 0;
  long t = 0;
  double wall_sim_seconds = 0.0;
  double global_loss = 0.0;
  double test_accuracy = 0.0;
  double grad_norm_sq = 0.0;
  double spread = 0.0;
};

// Model + per-device training data + shared evaluation set.
struct Fleet {
  const LossModel* model = nullptr;
  std::vector<DeviceDataset> train;
  DeviceDataset test;  // may be empty
  ClusterLayout layout;

  void validate() const;
};

// Optional per-iteration capture for the equivalence and conservation
// harnesses (iterations mode only). pre[s] is the device matrix after the
// SGD step of global iteration s+1 and before any aggregation; post[s] is
// after aggregation; mean_grad[s] is the uniform average of the stochastic
// gradients used at that step.
struct TrajectoryCapture {
  std::vector<std::vector<ParamVec>> pre;
  std::vector<std::vector<ParamVec>> post;
  std::vector<ParamVec> mean_grad;
};

struct RunResult {
  std::vector<RoundRecord> records;
  std::vector<ParamVec> edge_models;     // final y^(i) (fedavg: one entry)
  std::vector<ParamVec> device_models;   // final x^(k)
  ParamVec averaged_model;               // final u (uniform device average)
  std::vector<ParamVec> round_averages;  // u at the end of every global round
};

// Executes p global rounds of the configured algorithm. `mixing` is required
// for ce_fedavg and ignored otherwise; `profile` (optional) feeds the
// simulated wall-clock column.
RunResult run(const RunConfig& config, const Fleet& fleet, const MixingMatrix* mixing,
              const SystemProfile* profile = nullptr, TrajectoryCapture* capture = nullptr);

// Aggregation primitives (exposed for tests; `run` uses these internally).
// Uniform mode is the arithmetic mean in ascending device order.
ParamVec intra_aggregate(const std::vector<ParamVec>& params, const std::vector<double>& weights);
// y_new[i] = sum_j h_pi[j, i] * y_old[j] with h_pi row-major m*m.
std::vector<ParamVec> inter_aggregate(const std::vector<ParamVec>& edge_params,
                                      const std::vector<double>& h_pi);

// Uniform average over devices, i.e. the paper-facing u_t.
ParamVec uniform_average(const std::vector<ParamVec>& params);

// Aggregation weights per device group: all-ones (uniform) or sample counts.
std::vector<double> aggregation_weights(const RunConfig& config, const Fleet& fleet,
                                        const std::vector<int>& devices);

// CSV header + row formatting shared by the CLI and the tests (17 significant
// digits so re-runs are byte-identical).
std::string round_record_csv_header();
std::string round_record_csv_row(const RoundRecord& r);
std::string round_record_json(const RoundRecord& r);

}  // namespace cfel
