#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfel/types.hpp"

namespace cfel {

// Feature matrix plus integer labels held by one device. For quadratic
// objectives the rows are the per-sample targets and labels are unused.
struct DeviceDataset {
  std::vector<double> features;  // rows x feature_dim, row-major
  std::vector<int> labels;
  int feature_dim = 0;
  int device_id = -1;

  std::size_t rows() const {
    return feature_dim == 0 ? 0 : features.size() / static_cast<std::size_t>(feature_dim);
  }
  std::span<const double> row(std::size_t r) const {
    return {features.data() + r * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }
  void append_row(std::span<const double> feat, int label);
  void validate(int class_count) const;
};

struct PartitionSpec {
  enum class Scheme { iid, dirichlet, cluster_iid_shards, cluster_noniid_shards };
  Scheme scheme = Scheme::iid;
  double alpha = 0.5;          // dirichlet concentration
  int shards_per_device = 2;   // shard schemes
  int shards_per_cluster = 5;  // cluster_noniid_shards only
};

struct PartitionResult {
  std::vector<DeviceDataset> devices;
  std::vector<std::vector<int>> indices;  // device -> source sample indices
};

// Deterministic partition of `all` across the layout's devices.
PartitionResult partition(const DeviceDataset& all, const ClusterLayout& layout,
                          const PartitionSpec& spec, std::uint64_t seed);

// JSON manifest: {"<device_id>": [sample indices...], ...}
std::string partition_manifest_json(const std::vector<std::vector<int>>& indices);

// Synthetic quadratic fleet. Each device holds `samples_per_device` target
// rows drawn around a device center; centers are spread * N(0, I). The
// returned minimizer is the mean of all sample targets.
struct QuadraticFleet {
  std::vector<DeviceDataset> devices;
  ParamVec global_minimizer;
};
QuadraticFleet make_quadratic_fleet(int n, int d, double spread, std::uint64_t seed,
                                    int samples_per_device = 1, double sample_jitter = 0.0);

// Gaussian class blobs for the classification testbeds.
DeviceDataset make_classification_data(int samples, int feature_dim, int classes,
                                       double separation, std::uint64_t seed);

// First max_samples examples from an IDX image/label file pair, pixels
// scaled to [0, 1].
DeviceDataset load_idx_subset(const std::string& images_path, const std::string& labels_path,
                              std::size_t max_samples);

// Per-device train/test split (deterministic shuffle, train_fraction of the
// rows go to train).
std::pair<DeviceDataset, DeviceDataset> split_train_test(const DeviceDataset& data,
                                                         double train_fraction,
                                                         std::uint64_t seed);

int max_label(const DeviceDataset& data);

}  // namespace cfel
