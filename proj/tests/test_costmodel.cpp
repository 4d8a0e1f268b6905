#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cfel/costmodel.hpp"
#include "cfel/engine.hpp"
#include "cfel/rng.hpp"

using namespace cfel;

namespace {

// Hand-computed CNN-on-FEMNIST round time at tau=2, q=8, pi=10:
//   compute = 16 * 665e6 / 691.2e9      = 0.015393518518518518 s
//   uplink  = 8 * 28586944 / 10e6       = 22.8695552 s
//   gossip  = 10 * 28586944 / 50e6      = 5.7173888 s
constexpr double kFemnistRound = 28.602337518518517;

SystemProfile random_profile(std::uint64_t seed) {
  StreamRng rng(seed, 0xC057, 0);
  SystemProfile p;
  p.flops_per_iteration = 1e6 * (1.0 + 9.0 * rng.next_unit());
  p.device_flops = {1e9 * (1.0 + 9.0 * rng.next_unit()), 1e9 * (1.0 + 9.0 * rng.next_unit())};
  p.model_bits = 1e6 * (1.0 + 9.0 * rng.next_unit());
  p.uplink_bps = 1e6 * (1.0 + 9.0 * rng.next_unit());
  p.backhaul_bps = 1e6 * (1.0 + 9.0 * rng.next_unit());
  p.cloud_bps = 1e6 * (1.0 + 9.0 * rng.next_unit());
  return p;
}

}  // namespace

TEST_CASE("femnist preset reproduces the worked round time to 1e-9 relative") {
  auto p = femnist_paper_profile();
  double t = round_time(Algorithm::ce_fedavg, p, 2, 8, 10);
  CHECK(std::fabs(t - kFemnistRound) / kFemnistRound < 1e-9);

  // The three addends, individually.
  CHECK(p.compute_seconds(16.0) == doctest::Approx(0.015393518518518518).epsilon(1e-12));
  CHECK(8.0 * p.model_bits / p.uplink_bps == doctest::Approx(22.8695552).epsilon(1e-12));
  CHECK(10.0 * p.model_bits / p.backhaul_bps == doctest::Approx(5.7173888).epsilon(1e-12));
}

TEST_CASE("pi=0, q=1 collapses to tau*C/c + W/b_d2e") {
  SystemProfile p;
  p.flops_per_iteration = 2e6;
  p.device_flops = {4e9};
  p.model_bits = 8e6;
  p.uplink_bps = 2e6;
  p.backhaul_bps = 5e6;
  p.cloud_bps = 1e6;
  double t = round_time(Algorithm::ce_fedavg, p, 3, 1, 0);
  CHECK(t == 3.0 * 2e6 / 4e9 + 8e6 / 2e6);
}

TEST_CASE("compute term is governed by the slowest device") {
  SystemProfile p;
  p.flops_per_iteration = 1e9;
  p.device_flops = {1e9, 2e9};
  p.model_bits = 1.0;
  p.uplink_bps = 1e9;
  p.backhaul_bps = 1e9;
  p.cloud_bps = 1e9;
  // 4 steps at 1 GFLOP each on the 1 GFLOPS device: 4 seconds of compute,
  // plus the one-bit upload.
  double t = round_time(Algorithm::ce_fedavg, p, 4, 1, 0);
  CHECK(t == doctest::Approx(4.0 + 1.0 / 1e9).epsilon(1e-12));
}

TEST_CASE("baseline round-time formulas") {
  auto p = femnist_paper_profile();
  const int tau = 2, q = 8, pi = 10;
  double w = p.model_bits;
  double compute = p.compute_seconds(16.0);
  CHECK(round_time(Algorithm::fedavg, p, tau, q, pi) ==
        doctest::Approx(compute + w / p.cloud_bps).epsilon(1e-12));
  CHECK(round_time(Algorithm::hier_favg, p, tau, q, pi) ==
        doctest::Approx(compute + 7.0 * w / p.uplink_bps + w / p.cloud_bps).epsilon(1e-12));
  CHECK(round_time(Algorithm::local_edge, p, tau, q, pi) ==
        doctest::Approx(compute + 8.0 * w / p.uplink_bps).epsilon(1e-12));
}

TEST_CASE("monotonicity over random profiles") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto p = random_profile(seed);
    const int tau = 2, q = 3, pi = 4;
    double base = round_time(Algorithm::ce_fedavg, p, tau, q, pi);

    CHECK(round_time(Algorithm::ce_fedavg, p, tau + 1, q, pi) > base);
    CHECK(round_time(Algorithm::ce_fedavg, p, tau, q + 1, pi) > base);
    CHECK(round_time(Algorithm::ce_fedavg, p, tau, q, pi + 1) > base);

    auto bigger_model = p;
    bigger_model.model_bits *= 1.5;
    CHECK(round_time(Algorithm::ce_fedavg, bigger_model, tau, q, pi) > base);

    auto faster_uplink = p;
    faster_uplink.uplink_bps *= 2.0;
    CHECK(round_time(Algorithm::ce_fedavg, faster_uplink, tau, q, pi) < base);

    auto faster_backhaul = p;
    faster_backhaul.backhaul_bps *= 2.0;
    CHECK(round_time(Algorithm::ce_fedavg, faster_backhaul, tau, q, pi) < base);

    // Speeding up the slowest device shrinks the max compute term.
    auto faster_slowest = p;
    std::size_t slow = faster_slowest.device_flops[0] < faster_slowest.device_flops[1] ? 0 : 1;
    faster_slowest.device_flops[slow] *= 2.0;
    CHECK(round_time(Algorithm::ce_fedavg, faster_slowest, tau, q, pi) < base);

    auto faster_cloud = p;
    faster_cloud.cloud_bps *= 2.0;
    CHECK(round_time(Algorithm::fedavg, faster_cloud, tau, q, pi) <
          round_time(Algorithm::fedavg, p, tau, q, pi));
  }
}

TEST_CASE("with paper link rates: local_edge <= ce_fedavg <= hier_favg per round") {
  auto p = femnist_paper_profile();  // cloud 1 Mbps vs uplink 10 Mbps
  for (int tau : {1, 2, 4, 8}) {
    for (int q : {1, 2, 8, 16}) {
      double local = round_time(Algorithm::local_edge, p, tau, q, 10);
      double ce = round_time(Algorithm::ce_fedavg, p, tau, q, 10);
      double hier = round_time(Algorithm::hier_favg, p, tau, q, 10);
      CHECK(local <= ce);
      CHECK(ce <= hier);
    }
  }
}

TEST_CASE("total time multiplies and rejects p < 1") {
  CHECK(total_time(28.6, 1) == 28.6);
  CHECK(total_time(kFemnistRound, 100) == doctest::Approx(2860.2337518518516).epsilon(1e-12));
  CHECK_THROWS_AS(total_time(1.0, 0), ConfigError);
}

TEST_CASE("profile validation rejects non-positive entries") {
  auto p = femnist_paper_profile();
  CHECK_NOTHROW(p.validate());
  auto bad = p;
  bad.uplink_bps = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.device_flops = {1e9, -1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.device_flops.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cifar preset constants") {
  auto p = cifar_paper_profile();
  CHECK(p.flops_per_iteration == doctest::Approx(920.67e6 * 50.0));
  CHECK(p.model_bits == doctest::Approx(9750922.0 * 32.0));
}
