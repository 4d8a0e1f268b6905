#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfel {

// Flat model parameter vector. Dimension is fixed for the lifetime of a run;
// entries must stay finite.
using ParamVec = std::vector<double>;

bool all_finite(std::span<const double> v);

// Bad user input: configuration files, dimensions, infeasible schemes.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed binary input (IDX files, checkpoints).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// A constructed object violates one of its declared invariants.
struct InvariantError : std::runtime_error {
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training blew up; carries the position in the schedule where it happened.
struct DivergenceError : std::runtime_error {
  DivergenceError(int round, int edge_round, int local_step, int device);
  int round;
  int edge_round;
  int local_step;
  int device;
};

// Assignment of n devices to m clusters.
struct ClusterLayout {
  int m = 0;
  int n = 0;
  std::vector<int> cluster_of;            // device -> cluster
  std::vector<std::vector<int>> members;  // cluster -> ascending device ids

  static ClusterLayout contiguous(int n, int m);
  static ClusterLayout from_assignment(std::vector<int> cluster_of, int m);
  // Random assignment with equal cluster sizes (requires m | n).
  static ClusterLayout random_equal(int n, int m, std::uint64_t seed);

  bool equal_sizes() const;
  void validate() const;
};

}  // namespace cfel
