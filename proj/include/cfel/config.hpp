#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfel/engine.hpp"

namespace cfel {

struct ModelSpec {
  std::string kind;  // quadratic | logistic | mlp
  int dim = 8;       // quadratic
  int feature_dim = 16;
  int classes = 8;
  int hidden = 16;  // mlp
};

struct DataSpec {
  std::string source;  // quadratic_fleet | synthetic_classification | idx
  // quadratic_fleet
  double spread = 1.0;
  int samples_per_device = 4;
  double sample_jitter = 0.0;
  // synthetic_classification
  int samples = 3200;
  double separation = 2.0;
  // idx
  std::string images;
  std::string labels;
  int max_samples = 2000;

  double train_fraction = 0.9;
  PartitionSpec partition;
};

struct TopologySpec {
  int devices = 8;
  int clusters = 2;
  GraphKind graph = GraphKind::ring;
  double p_edge = 0.5;
  std::string weights = "metropolis";      // metropolis | max_degree
  std::string assignment = "contiguous";   // contiguous | random_equal
};

struct SweepSpec {
  int qtau = 16;
  std::vector<int> tau_values{2, 4, 8};
  std::vector<int> m_values{4, 8, 16};
};

struct ExperimentConfig {
  RunConfig run;
  ModelSpec model;
  DataSpec data;
  TopologySpec topology;
  std::optional<SystemProfile> profile;
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds{1};
  SweepSpec sweep;

  // Strict parse: unknown keys are rejected, missing required keys are
  // reported by name.
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  // femnist-paper | cifar-paper | desk-quadratic | desk-logistic
  static ExperimentConfig preset(const std::string& name);
};

// Everything one seeded run needs. The fleet's model pointer is owned here.
struct RunContext {
  std::shared_ptr<const LossModel> model;
  Fleet fleet;
  std::optional<MixingMatrix> mixing;
  std::vector<std::vector<int>> partition_indices;
  // Exact minimizer objective, when the testbed admits one (quadratic).
  std::optional<ParamVec> exact_minimizer;
};

RunContext build_context(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace cfel
