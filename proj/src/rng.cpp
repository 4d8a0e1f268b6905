#include "cfel/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace cfel {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
  std::uint64_t h = 0x243F6A8885A308D3ull;  // pi fraction, arbitrary non-zero base
  h = mix64(h ^ (seed + kGolden));
  h = mix64(h ^ (stream + kGolden));
  h = mix64(h ^ (step + kGolden));
  state_ = h;
}

std::uint64_t StreamRng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double StreamRng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t StreamRng::next_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("next_below: bound must be >= 1");
  // Lemire's multiply-shift with rejection of the biased zone.
  std::uint64_t x = next_u64();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
  std::uint64_t low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<unsigned __int128>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double StreamRng::next_gaussian() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_gaussian_;
  }
  double u1 = 0.0;
  do {
    u1 = next_unit();
  } while (u1 <= 0.0);
  double u2 = next_unit();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  cached_gaussian_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

std::vector<int> draw_batch(std::uint64_t seed, std::uint64_t stream, std::uint64_t t,
                            int batch, std::size_t data_size) {
  if (data_size == 0) throw std::invalid_argument("draw_batch: empty dataset");
  StreamRng rng(seed, rng_domain::stream(rng_domain::kBatch, stream), t);
  std::vector<int> idx(static_cast<std::size_t>(batch));
  for (auto& i : idx) i = static_cast<int>(rng.next_below(data_size));
  return idx;
}

}  // namespace cfel
