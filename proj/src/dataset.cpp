#include "cfel/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cfel/rng.hpp"

namespace cfel {

void DeviceDataset::append_row(std::span<const double> feat, int label) {
  if (feature_dim == 0) feature_dim = static_cast<int>(feat.size());
  if (static_cast<int>(feat.size()) != feature_dim) {
    throw ConfigError("append_row: feature dimension mismatch");
  }
  features.insert(features.end(), feat.begin(), feat.end());
  labels.push_back(label);
}

void DeviceDataset::validate(int class_count) const {
  if (feature_dim <= 0) throw ConfigError("dataset: feature_dim must be positive");
  if (features.size() != rows() * static_cast<std::size_t>(feature_dim) ||
      labels.size() != rows()) {
    throw ConfigError("dataset: feature rows and label length disagree");
  }
  for (int y : labels) {
    if (y < 0 || y >= class_count) {
      throw ConfigError("dataset: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(class_count) + ")");
    }
  }
}

namespace {

// gamma(alpha, 1) via Marsaglia-Tsang, boosted for alpha < 1.
double sample_gamma(StreamRng& rng, double alpha) {
  if (alpha < 1.0) {
    double u = 0.0;
    do {
      u = rng.next_unit();
    } while (u <= 0.0);
    return sample_gamma(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  double d = alpha - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.next_gaussian();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = rng.next_unit();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> sample_dirichlet(StreamRng& rng, int k, double alpha) {
  std::vector<double> p(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (auto& v : p) {
    v = sample_gamma(rng, alpha);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

// Integer apportionment of `total` by weights: floor quotas, then leftovers
// to the largest fractional parts (ties broken by index).
std::vector<int> largest_remainder(const std::vector<double>& weights, int total) {
  std::size_t k = weights.size();
  double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(k, 0);
  std::vector<std::pair<double, std::size_t>> rema(k);
  int assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double quota = weights[i] / wsum * total;
    counts[i] = static_cast<int>(std::floor(quota));
    assigned += counts[i];
    rema[i] = {quota - std::floor(quota), i};
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < total - assigned; ++r) {
    counts[rema[static_cast<std::size_t>(r)].second] += 1;
  }
  return counts;
}

std::vector<std::vector<int>> indices_by_class(const DeviceDataset& all, int classes) {
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t r = 0; r < all.rows(); ++r) {
    by_class[static_cast<std::size_t>(all.labels[r])].push_back(static_cast<int>(r));
  }
  return by_class;
}

// Quantile boundaries: shard s covers [s*n/count, (s+1)*n/count).
std::vector<std::pair<int, int>> shard_ranges(int n, int count) {
  std::vector<std::pair<int, int>> out(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    out[static_cast<std::size_t>(s)] = {static_cast<int>(static_cast<std::int64_t>(s) * n / count),
                                        static_cast<int>(static_cast<std::int64_t>(s + 1) * n /
                                                         count)};
  }
  return out;
}

void sort_by_label(std::vector<int>& idx, const DeviceDataset& all) {
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return all.labels[static_cast<std::size_t>(a)] < all.labels[static_cast<std::size_t>(b)];
  });
}

// Sort cluster samples by label, cut into devices*shards_per_device shards,
// hand each device shards_per_device randomly chosen shards.
void deal_shards_within_cluster(const DeviceDataset& all, const std::vector<int>& devices,
                                std::vector<int> cluster_idx, int shards_per_device,
                                StreamRng& rng, std::vector<std::vector<int>>& out) {
  int shard_count = static_cast<int>(devices.size()) * shards_per_device;
  if (static_cast<int>(cluster_idx.size()) < shard_count) {
    throw ConfigError("shard partition infeasible: cluster has " +
                      std::to_string(cluster_idx.size()) + " samples for " +
                      std::to_string(shard_count) + " shards");
  }
  sort_by_label(cluster_idx, all);
  auto ranges = shard_ranges(static_cast<int>(cluster_idx.size()), shard_count);
  std::vector<int> order(static_cast<std::size_t>(shard_count));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  int next = 0;
  for (int dev : devices) {
    for (int s = 0; s < shards_per_device; ++s) {
      auto [lo, hi] = ranges[static_cast<std::size_t>(order[static_cast<std::size_t>(next++)])];
      for (int r = lo; r < hi; ++r) {
        out[static_cast<std::size_t>(dev)].push_back(cluster_idx[static_cast<std::size_t>(r)]);
      }
    }
  }
}

std::vector<std::vector<int>> partition_indices(const DeviceDataset& all,
                                                const ClusterLayout& layout,
                                                const PartitionSpec& spec, std::uint64_t seed) {
  int n = layout.n;
  int total = static_cast<int>(all.rows());
  if (total < n) throw ConfigError("partition: fewer samples than devices");
  int classes = max_label(all) + 1;
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  StreamRng rng(seed, rng_domain::stream(rng_domain::kPartition, 0), 0);

  switch (spec.scheme) {
    case PartitionSpec::Scheme::iid: {
      std::vector<int> idx(static_cast<std::size_t>(total));
      std::iota(idx.begin(), idx.end(), 0);
      rng.shuffle(idx);
      int base = total / n;
      int extra = total % n;
      int at = 0;
      for (int k = 0; k < n; ++k) {
        int size = base + (k < extra ? 1 : 0);
        for (int j = 0; j < size; ++j) {
          out[static_cast<std::size_t>(k)].push_back(idx[static_cast<std::size_t>(at++)]);
        }
      }
      break;
    }
    case PartitionSpec::Scheme::dirichlet: {
      auto by_class = indices_by_class(all, classes);
      for (auto& lst : by_class) rng.shuffle(lst);
      const int max_attempts = 100;
      for (int attempt = 0;; ++attempt) {
        for (auto& lst : out) lst.clear();
        std::vector<std::vector<double>> props(static_cast<std::size_t>(n));
        for (auto& p : props) p = sample_dirichlet(rng, classes, spec.alpha);
        for (int c = 0; c < classes; ++c) {
          const auto& pool = by_class[static_cast<std::size_t>(c)];
          if (pool.empty()) continue;
          std::vector<double> w(static_cast<std::size_t>(n));
          for (int k = 0; k < n; ++k) w[static_cast<std::size_t>(k)] =
              props[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
          auto counts = largest_remainder(w, static_cast<int>(pool.size()));
          int at = 0;
          for (int k = 0; k < n; ++k) {
            for (int j = 0; j < counts[static_cast<std::size_t>(k)]; ++j) {
              out[static_cast<std::size_t>(k)].push_back(pool[static_cast<std::size_t>(at++)]);
            }
          }
        }
        bool ok = std::none_of(out.begin(), out.end(),
                               [](const std::vector<int>& v) { return v.empty(); });
        if (ok) break;
        if (attempt + 1 >= max_attempts) {
          throw ConfigError("dirichlet partition left a device empty after " +
                            std::to_string(max_attempts) + " draws");
        }
      }
      break;
    }
    case PartitionSpec::Scheme::cluster_iid_shards: {
      // Stage 1: stratified round-robin deal of every class across clusters,
      // so cluster-level label histograms match (exactly, when divisible).
      auto by_class = indices_by_class(all, classes);
      std::vector<std::vector<int>> cluster_idx(static_cast<std::size_t>(layout.m));
      for (int c = 0; c < classes; ++c) {
        auto& pool = by_class[static_cast<std::size_t>(c)];
        rng.shuffle(pool);
        for (std::size_t j = 0; j < pool.size(); ++j) {
          cluster_idx[j % static_cast<std::size_t>(layout.m)].push_back(pool[j]);
        }
      }
      for (int i = 0; i < layout.m; ++i) {
        deal_shards_within_cluster(all, layout.members[static_cast<std::size_t>(i)],
                                   std::move(cluster_idx[static_cast<std::size_t>(i)]),
                                   spec.shards_per_device, rng, out);
      }
      break;
    }
    case PartitionSpec::Scheme::cluster_noniid_shards: {
      // Stage 1: label-sorted shards dealt to clusters, so each cluster sees
      // only the labels its shards cover.
      std::vector<int> idx(static_cast<std::size_t>(total));
      std::iota(idx.begin(), idx.end(), 0);
      sort_by_label(idx, all);
      int shard_count = layout.m * spec.shards_per_cluster;
      if (total < shard_count) throw ConfigError("cluster shards infeasible: too few samples");
      auto ranges = shard_ranges(total, shard_count);
      std::vector<int> order(static_cast<std::size_t>(shard_count));
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      int next = 0;
      std::vector<std::vector<int>> cluster_idx(static_cast<std::size_t>(layout.m));
      for (int i = 0; i < layout.m; ++i) {
        for (int s = 0; s < spec.shards_per_cluster; ++s) {
          auto [lo, hi] = ranges[static_cast<std::size_t>(order[static_cast<std::size_t>(next++)])];
          for (int r = lo; r < hi; ++r) {
            cluster_idx[static_cast<std::size_t>(i)].push_back(idx[static_cast<std::size_t>(r)]);
          }
        }
      }
      for (int i = 0; i < layout.m; ++i) {
        deal_shards_within_cluster(all, layout.members[static_cast<std::size_t>(i)],
                                   std::move(cluster_idx[static_cast<std::size_t>(i)]),
                                   spec.shards_per_device, rng, out);
      }
      break;
    }
  }

  for (const auto& lst : out) {
    if (lst.empty()) throw ConfigError("partition left a device empty");
  }
  return out;
}

}  // namespace

PartitionResult partition(const DeviceDataset& all, const ClusterLayout& layout,
                          const PartitionSpec& spec, std::uint64_t seed) {
  layout.validate();
  PartitionResult res;
  res.indices = partition_indices(all, layout, spec, seed);
  res.devices.resize(static_cast<std::size_t>(layout.n));
  for (int k = 0; k < layout.n; ++k) {
    auto& dev = res.devices[static_cast<std::size_t>(k)];
    dev.device_id = k;
    dev.feature_dim = all.feature_dim;
    for (int r : res.indices[static_cast<std::size_t>(k)]) {
      dev.append_row(all.row(static_cast<std::size_t>(r)), all.labels[static_cast<std::size_t>(r)]);
    }
  }
  return res;
}

std::string partition_manifest_json(const std::vector<std::vector<int>>& indices) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    j[std::to_string(k)] = indices[k];
  }
  return j.dump(2);
}

QuadraticFleet make_quadratic_fleet(int n, int d, double spread, std::uint64_t seed,
                                    int samples_per_device, double sample_jitter) {
  if (n < 1 || d < 1 || samples_per_device < 1) {
    throw ConfigError("quadratic fleet: n, d, samples_per_device must be >= 1");
  }
  QuadraticFleet fleet;
  fleet.devices.resize(static_cast<std::size_t>(n));
  fleet.global_minimizer.assign(static_cast<std::size_t>(d), 0.0);
  StreamRng rng(seed, rng_domain::stream(rng_domain::kData, 0), 0);
  std::vector<double> center(static_cast<std::size_t>(d));
  std::vector<double> target(static_cast<std::size_t>(d));
  for (int k = 0; k < n; ++k) {
    auto& dev = fleet.devices[static_cast<std::size_t>(k)];
    dev.device_id = k;
    dev.feature_dim = d;
    for (int c = 0; c < d; ++c) center[static_cast<std::size_t>(c)] = spread * rng.next_gaussian();
    for (int j = 0; j < samples_per_device; ++j) {
      for (int c = 0; c < d; ++c) {
        target[static_cast<std::size_t>(c)] =
            center[static_cast<std::size_t>(c)] + sample_jitter * rng.next_gaussian();
        fleet.global_minimizer[static_cast<std::size_t>(c)] += target[static_cast<std::size_t>(c)];
      }
      dev.append_row(target, 0);
    }
  }
  double inv = 1.0 / (static_cast<double>(n) * samples_per_device);
  for (auto& v : fleet.global_minimizer) v *= inv;
  return fleet;
}

DeviceDataset make_classification_data(int samples, int feature_dim, int classes,
                                       double separation, std::uint64_t seed) {
  if (samples < classes || feature_dim < 1 || classes < 2) {
    throw ConfigError("classification data: need samples >= classes, feature_dim >= 1");
  }
  StreamRng rng(seed, rng_domain::stream(rng_domain::kData, 1), 0);
  std::vector<double> centers(static_cast<std::size_t>(classes) * feature_dim);
  for (auto& v : centers) v = separation * rng.next_gaussian();
  DeviceDataset data;
  data.feature_dim = feature_dim;
  std::vector<double> x(static_cast<std::size_t>(feature_dim));
  for (int i = 0; i < samples; ++i) {
    int c = i % classes;
    for (int j = 0; j < feature_dim; ++j) {
      x[static_cast<std::size_t>(j)] =
          centers[static_cast<std::size_t>(c) * feature_dim + j] + rng.next_gaussian();
    }
    data.append_row(x, c);
  }
  return data;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("truncated IDX file: " + path);
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

DeviceDataset load_idx_subset(const std::string& images_path, const std::string& labels_path,
                              std::size_t max_samples) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open IDX image file: " + images_path);
  std::uint32_t magic = read_be32(img, images_path);
  if (magic != 0x00000803u) {
    throw FormatError("bad IDX image magic in " + images_path + " (expected 0x00000803)");
  }
  std::uint32_t count = read_be32(img, images_path);
  std::uint32_t rows = read_be32(img, images_path);
  std::uint32_t cols = read_be32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open IDX label file: " + labels_path);
  std::uint32_t lmagic = read_be32(lab, labels_path);
  if (lmagic != 0x00000801u) {
    throw FormatError("bad IDX label magic in " + labels_path + " (expected 0x00000801)");
  }
  std::uint32_t lcount = read_be32(lab, labels_path);
  if (lcount != count) throw FormatError("IDX image/label counts disagree");

  std::size_t take = std::min<std::size_t>(max_samples, count);
  std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  DeviceDataset data;
  data.feature_dim = static_cast<int>(pixels);
  data.features.reserve(take * pixels);
  data.labels.reserve(take);
  std::vector<unsigned char> buf(pixels);
  for (std::size_t i = 0; i < take; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (!img) throw FormatError("truncated IDX file: " + images_path);
    char y = 0;
    lab.read(&y, 1);
    if (!lab) throw FormatError("truncated IDX file: " + labels_path);
    for (unsigned char p : buf) data.features.push_back(static_cast<double>(p) / 255.0);
    data.labels.push_back(static_cast<int>(static_cast<unsigned char>(y)));
  }
  return data;
}

std::pair<DeviceDataset, DeviceDataset> split_train_test(const DeviceDataset& data,
                                                         double train_fraction,
                                                         std::uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction > 1.0) {
    throw ConfigError("train_fraction must be in (0, 1]");
  }
  std::vector<int> idx(data.rows());
  std::iota(idx.begin(), idx.end(), 0);
  StreamRng rng(seed, rng_domain::stream(rng_domain::kData, 2),
                static_cast<std::uint64_t>(data.device_id + 1));
  rng.shuffle(idx);
  std::size_t train_count = static_cast<std::size_t>(train_fraction * static_cast<double>(idx.size()));
  train_count = std::max<std::size_t>(1, std::min(train_count, idx.size()));
  DeviceDataset train, test;
  train.device_id = test.device_id = data.device_id;
  train.feature_dim = test.feature_dim = data.feature_dim;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    auto r = static_cast<std::size_t>(idx[j]);
    auto& dst = j < train_count ? train : test;
    dst.append_row(data.row(r), data.labels[r]);
  }
  return {std::move(train), std::move(test)};
}

int max_label(const DeviceDataset& data) {
  int mx = 0;
  for (int y : data.labels) mx = std::max(mx, y);
  return mx;
}

}  // namespace cfel
