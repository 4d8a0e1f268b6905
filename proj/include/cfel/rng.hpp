#pragma once

#include <cstdint>
#include <vector>

// Counter-keyed random streams. Every draw in a simulation is a pure
// function of (run seed, stream id, step counter, draw index), so results do
// not depend on scheduling or worker count. Streams for different purposes
// are separated by the domain constants below.

namespace cfel {

namespace rng_domain {
inline constexpr std::uint64_t kInit = 0x10;      // model initialization
inline constexpr std::uint64_t kBatch = 0x20;     // mini-batch index draws
inline constexpr std::uint64_t kShuffle = 0x30;   // epoch-mode shuffles
inline constexpr std::uint64_t kNoise = 0x40;     // injected gradient noise
inline constexpr std::uint64_t kData = 0x50;      // dataset synthesis
inline constexpr std::uint64_t kPartition = 0x60; // device partitioning
inline constexpr std::uint64_t kGraph = 0x70;     // random graph generation

// Injective (domain, id) -> stream key. ids are device/cluster indices and
// always fit in 32 bits.
inline constexpr std::uint64_t stream(std::uint64_t domain, std::uint64_t id) {
  return (domain << 32) | id;
}
}  // namespace rng_domain

class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t step);

  std::uint64_t next_u64();
  // Uniform in [0, 1), 53-bit resolution.
  double next_unit();
  // Uniform in [0, bound), unbiased. bound >= 1.
  std::uint64_t next_below(std::uint64_t bound);
  // Standard normal via Box-Muller; draws come in cached pairs.
  double next_gaussian();

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double cached_gaussian_ = 0.0;
  bool has_cached_ = false;
};

// Mini-batch of `batch` indices drawn uniformly with replacement from
// [0, data_size). The stream is keyed on the device's stream id and the
// global iteration index t.
std::vector<int> draw_batch(std::uint64_t seed, std::uint64_t stream, std::uint64_t t,
                            int batch, std::size_t data_size);

}  // namespace cfel
