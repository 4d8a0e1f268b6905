#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cfel/rng.hpp"

using namespace cfel;

TEST_CASE("streams are pure functions of (seed, stream, step)") {
  StreamRng a(42, 7, 3);
  StreamRng b(42, 7, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  StreamRng c(42, 7, 4);
  StreamRng d(42, 8, 3);
  StreamRng e(43, 7, 3);
  StreamRng base(42, 7, 3);
  auto first = base.next_u64();
  CHECK(c.next_u64() != first);
  CHECK(d.next_u64() != first);
  CHECK(e.next_u64() != first);
}

TEST_CASE("domain/id stream keys never collide") {
  // (kBatch, 16) and (kShuffle, 0) xor-collide; the shifted encoding must not.
  CHECK(rng_domain::stream(rng_domain::kBatch, 16) != rng_domain::stream(rng_domain::kShuffle, 0));
  std::set<std::uint64_t> keys;
  for (auto dom : {rng_domain::kInit, rng_domain::kBatch, rng_domain::kShuffle,
                   rng_domain::kNoise, rng_domain::kData, rng_domain::kPartition}) {
    for (std::uint64_t id = 0; id < 64; ++id) keys.insert(rng_domain::stream(dom, id));
  }
  CHECK(keys.size() == 6u * 64u);
}

TEST_CASE("next_unit lies in [0,1) with sane mean") {
  StreamRng rng(1, 2, 3);
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / draws == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("next_below is in range and roughly uniform") {
  StreamRng rng(9, 1, 0);
  const std::uint64_t bound = 10;
  std::vector<int> counts(bound, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    auto v = rng.next_below(bound);
    REQUIRE(v < bound);
    ++counts[v];
  }
  // Each bucket expects 10000 with sd ~ 95; allow 6 sigma.
  for (int c : counts) CHECK(std::abs(c - 10000) < 600);
  CHECK_THROWS(rng.next_below(0));
}

TEST_CASE("gaussian moments") {
  StreamRng rng(5, 5, 5);
  double sum = 0.0, sq = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    double g = rng.next_gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / draws) < 0.02);
  CHECK(sq / draws == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("shuffle is a permutation, deterministic per key") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  StreamRng rng(3, 1, 4);
  rng.shuffle(v);
  auto w = v;
  std::sort(w.begin(), w.end());
  for (int i = 0; i < 50; ++i) CHECK(w[static_cast<std::size_t>(i)] == i);

  std::vector<int> v2(50);
  std::iota(v2.begin(), v2.end(), 0);
  StreamRng rng2(3, 1, 4);
  rng2.shuffle(v2);
  CHECK(v == v2);
}

TEST_CASE("draw_batch is deterministic, in range, exact size") {
  auto b1 = draw_batch(11, 4, 9, 16, 37);
  auto b2 = draw_batch(11, 4, 9, 16, 37);
  CHECK(b1 == b2);
  CHECK(b1.size() == 16);
  for (int i : b1) {
    CHECK(i >= 0);
    CHECK(i < 37);
  }
  auto b3 = draw_batch(11, 4, 10, 16, 37);
  CHECK(b1 != b3);
  CHECK_THROWS(draw_batch(11, 4, 9, 16, 0));
}
