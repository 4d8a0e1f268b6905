#include "cfel/types.hpp"

#include <cmath>
#include <numeric>

#include "cfel/rng.hpp"

namespace cfel {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

DivergenceError::DivergenceError(int round_, int edge_round_, int local_step_, int device_)
    : std::runtime_error("parameters diverged at global round " + std::to_string(round_) +
                         ", edge round " + std::to_string(edge_round_) + ", local step " +
                         std::to_string(local_step_) + ", device " + std::to_string(device_)),
      round(round_),
      edge_round(edge_round_),
      local_step(local_step_),
      device(device_) {}

ClusterLayout ClusterLayout::contiguous(int n, int m) {
  if (n < 1 || m < 1 || m > n) throw ConfigError("layout: need 1 <= m <= n");
  std::vector<int> assign(static_cast<std::size_t>(n));
  // Contiguous blocks; the first (n % m) clusters take one extra device.
  int base = n / m;
  int extra = n % m;
  int dev = 0;
  for (int i = 0; i < m; ++i) {
    int size = base + (i < extra ? 1 : 0);
    for (int j = 0; j < size; ++j) assign[static_cast<std::size_t>(dev++)] = i;
  }
  return from_assignment(std::move(assign), m);
}

ClusterLayout ClusterLayout::from_assignment(std::vector<int> cluster_of, int m) {
  ClusterLayout layout;
  layout.m = m;
  layout.n = static_cast<int>(cluster_of.size());
  layout.cluster_of = std::move(cluster_of);
  layout.members.assign(static_cast<std::size_t>(m), {});
  for (int k = 0; k < layout.n; ++k) {
    int i = layout.cluster_of[static_cast<std::size_t>(k)];
    if (i < 0 || i >= m) throw ConfigError("layout: cluster id out of range");
    layout.members[static_cast<std::size_t>(i)].push_back(k);
  }
  layout.validate();
  return layout;
}

ClusterLayout ClusterLayout::random_equal(int n, int m, std::uint64_t seed) {
  if (m < 1 || n < 1 || n % m != 0) {
    throw ConfigError("layout: random_equal requires m to divide n");
  }
  std::vector<int> devices(static_cast<std::size_t>(n));
  std::iota(devices.begin(), devices.end(), 0);
  StreamRng rng(seed, rng_domain::stream(rng_domain::kPartition, 0xC1), 0);
  rng.shuffle(devices);
  std::vector<int> assign(static_cast<std::size_t>(n));
  int per = n / m;
  for (int k = 0; k < n; ++k) {
    assign[static_cast<std::size_t>(devices[static_cast<std::size_t>(k)])] = k / per;
  }
  return from_assignment(std::move(assign), m);
}

bool ClusterLayout::equal_sizes() const {
  for (const auto& s : members) {
    if (s.size() != members.front().size()) return false;
  }
  return true;
}

void ClusterLayout::validate() const {
  if (m < 1 || n < 1) throw ConfigError("layout: empty");
  if (cluster_of.size() != static_cast<std::size_t>(n)) throw ConfigError("layout: bad size");
  std::size_t total = 0;
  for (const auto& s : members) {
    if (s.empty()) throw ConfigError("layout: empty cluster");
    total += s.size();
  }
  if (total != static_cast<std::size_t>(n)) throw ConfigError("layout: device count mismatch");
}

}  // namespace cfel
