#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>

#include "cfel/engine.hpp"
#include "cfel/oracle.hpp"
#include "cfel/verify.hpp"
#include "testutil.hpp"

using namespace cfel;
using namespace cfel::testutil;

namespace {

struct QuadFixture {
  std::shared_ptr<QuadraticModel> model;
  Fleet fleet;
};

QuadFixture quad_fixture(int n, int m, int d, std::uint64_t seed, int samples = 3,
                         double jitter = 0.4) {
  QuadFixture fx;
  fx.model = std::make_shared<QuadraticModel>(d);
  auto fleet = make_quadratic_fleet(n, d, 1.5, seed, samples, jitter);
  fx.fleet.model = fx.model.get();
  fx.fleet.train = std::move(fleet.devices);
  fx.fleet.layout = ClusterLayout::contiguous(n, m);
  return fx;
}

double max_diff(const std::vector<ParamVec>& a, const std::vector<ParamVec>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, max_abs_err(a[k], b[k]));
  return worst;
}

}  // namespace

TEST_CASE("intra_aggregate: uniform and weighted means") {
  std::vector<ParamVec> params{{0.0, 0.0}, {2.0, 2.0}};
  CHECK(intra_aggregate(params, {1.0, 1.0}) == ParamVec{1.0, 1.0});

  std::vector<ParamVec> scalar{{0.0}, {4.0}};
  CHECK(intra_aggregate(scalar, {10.0, 30.0}) == ParamVec{3.0});

  // Single device: identity, bit for bit.
  std::vector<ParamVec> one{{0.123456789012345, -7.25}};
  CHECK(intra_aggregate(one, {5.0}) == one.front());
}

TEST_CASE("inter_aggregate: identity, hand matrix-vector, complete consensus") {
  std::vector<ParamVec> y{{0.0}, {3.0}, {6.0}};
  std::vector<double> identity{1, 0, 0, 0, 1, 0, 0, 0, 1};
  CHECK(inter_aggregate(y, identity) == y);

  // ring(3) metropolis is uniform 1/3 averaging; H*y by hand = (3,3,3).
  auto h = MixingMatrix::metropolis(build_graph(GraphKind::ring, 3, 0));
  auto mixed = inter_aggregate(y, h.entries());
  for (const auto& yi : mixed) CHECK(yi[0] == doctest::Approx(3.0).epsilon(1e-14));

  // Cross-check against an explicit matrix-vector product.
  for (int i = 0; i < 3; ++i) {
    double direct = 0.0;
    for (int j = 0; j < 3; ++j) direct += h.at(j, i) * y[static_cast<std::size_t>(j)][0];
    CHECK(mixed[static_cast<std::size_t>(i)][0] == doctest::Approx(direct).epsilon(1e-15));
  }

  // Complete graph: all outputs equal the mean for any pi >= 1.
  auto hc = MixingMatrix::metropolis(build_graph(GraphKind::complete, 3, 0));
  auto consensus = inter_aggregate(y, hc.power(4));
  for (const auto& yi : consensus) CHECK(std::fabs(yi[0] - 3.0) <= 1e-12);
}

TEST_CASE("W_t schedule: tau=2, q=2 gives I, V, I, Z") {
  CHECK(stage_op(1, 2, 2) == StageOp::identity);
  CHECK(stage_op(2, 2, 2) == StageOp::intra);
  CHECK(stage_op(3, 2, 2) == StageOp::identity);
  CHECK(stage_op(4, 2, 2) == StageOp::inter);
}

TEST_CASE("broadcast invariant: devices equal their edge model after aggregation") {
  auto fx = quad_fixture(6, 2, 4, 21);
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::ring, 2, 0));
  RunConfig cfg;
  cfg.tau = 2;
  cfg.q = 2;
  cfg.pi = 2;
  cfg.rounds = 2;
  cfg.lr = 0.1;
  cfg.batch_size = 2;
  cfg.seed = 5;
  TrajectoryCapture cap;
  run(cfg, fx.fleet, &mixing, nullptr, &cap);
  for (std::size_t t = 0; t < cap.post.size(); ++t) {
    if (stage_op(static_cast<long>(t) + 1, cfg.tau, cfg.q) == StageOp::identity) continue;
    for (int i = 0; i < 2; ++i) {
      const auto& members = fx.fleet.layout.members[static_cast<std::size_t>(i)];
      for (int k : members) {
        CHECK(cap.post[t][static_cast<std::size_t>(k)] ==
              cap.post[t][static_cast<std::size_t>(members.front())]);
      }
    }
  }
}

TEST_CASE("conservation: aggregation leaves the uniform average unchanged") {
  auto fx = quad_fixture(8, 4, 5, 33);
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::ring, 4, 0));
  RunConfig cfg;
  cfg.tau = 2;
  cfg.q = 3;
  cfg.pi = 2;
  cfg.rounds = 2;
  cfg.lr = 0.08;
  cfg.batch_size = 1;
  cfg.seed = 9;
  TrajectoryCapture cap;
  run(cfg, fx.fleet, &mixing, nullptr, &cap);
  for (std::size_t t = 0; t < cap.post.size(); ++t) {
    if (stage_op(static_cast<long>(t) + 1, cfg.tau, cfg.q) == StageOp::identity) continue;
    auto before = uniform_average(cap.pre[t]);
    auto after = uniform_average(cap.post[t]);
    CHECK(max_abs_err(before, after) <= 1e-10);
  }
}

TEST_CASE("complete-graph gossip collapses the edge spread") {
  auto fx = quad_fixture(8, 4, 3, 40);
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::complete, 4, 0));
  RunConfig cfg;
  cfg.tau = 2;
  cfg.q = 2;
  cfg.pi = 1;
  cfg.rounds = 3;
  cfg.lr = 0.05;
  cfg.batch_size = 2;
  cfg.seed = 3;
  auto result = run(cfg, fx.fleet, &mixing, nullptr);
  for (const auto& rec : result.records) CHECK(rec.spread <= 1e-12);
}

TEST_CASE("determinism: thread count never changes results") {
  auto fx = quad_fixture(8, 2, 6, 77);
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::ring, 2, 0));
  RunConfig cfg;
  cfg.tau = 3;
  cfg.q = 2;
  cfg.pi = 2;
  cfg.rounds = 3;
  cfg.lr = 0.07;
  cfg.batch_size = 2;
  cfg.seed = 123;
  cfg.momentum = 0.9;

  cfg.threads = 1;
  auto serial = run(cfg, fx.fleet, &mixing, nullptr);
  cfg.threads = 8;
  auto parallel = run(cfg, fx.fleet, &mixing, nullptr);

  CHECK(serial.averaged_model == parallel.averaged_model);
  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(round_record_csv_row(serial.records[i]) == round_record_csv_row(parallel.records[i]));
  }
}

TEST_CASE("divergence abort names the schedule position") {
  auto fx = quad_fixture(4, 2, 3, 50);
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::ring, 2, 0));
  RunConfig cfg;
  cfg.tau = 2;
  cfg.q = 2;
  cfg.pi = 1;
  cfg.rounds = 50;
  cfg.lr = 10.0;  // far beyond 2/L for the quadratic
  cfg.batch_size = 1;
  cfg.seed = 4;
  try {
    run(cfg, fx.fleet, &mixing, nullptr);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.round >= 0);
    CHECK(e.edge_round >= 0);
    CHECK(e.edge_round < cfg.q);
    CHECK(e.local_step >= 0);
    CHECK(e.local_step < cfg.tau);
    CHECK(e.device >= 0);
  }
}

TEST_CASE("tau=1 makes momentum irrelevant (buffers reset at every broadcast)") {
  auto fx = quad_fixture(4, 2, 3, 60);
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::ring, 2, 0));
  RunConfig cfg;
  cfg.tau = 1;
  cfg.q = 2;
  cfg.pi = 1;
  cfg.rounds = 4;
  cfg.lr = 0.1;
  cfg.batch_size = 1;
  cfg.seed = 8;

  cfg.momentum = 0.0;
  auto plain = run(cfg, fx.fleet, &mixing, nullptr);
  cfg.momentum = 0.9;
  auto heavy = run(cfg, fx.fleet, &mixing, nullptr);
  CHECK(plain.averaged_model == heavy.averaged_model);
}

TEST_CASE("local_edge: mirrored clusters with shared streams stay identical") {
  auto fx = quad_fixture(4, 2, 3, 70, 3, 0.5);
  // Cluster 1 mirrors cluster 0's data; devices 2,3 reuse streams 0,1.
  fx.fleet.train[2].features = fx.fleet.train[0].features;
  fx.fleet.train[3].features = fx.fleet.train[1].features;
  RunConfig cfg;
  cfg.algorithm = Algorithm::local_edge;
  cfg.tau = 2;
  cfg.q = 2;
  cfg.rounds = 3;
  cfg.lr = 0.1;
  cfg.batch_size = 2;
  cfg.seed = 6;
  cfg.stream_ids = {0, 1, 0, 1};
  auto result = run(cfg, fx.fleet, nullptr, nullptr);
  REQUIRE(result.edge_models.size() == 2);
  CHECK(result.edge_models[0] == result.edge_models[1]);
  // Devices never see the other cluster, so the trajectories coincide.
  CHECK(result.device_models[0] == result.device_models[2]);
  CHECK(result.device_models[1] == result.device_models[3]);
}

TEST_CASE("hier_favg with one cluster equals fedavg with aligned periods") {
  auto fx = quad_fixture(5, 1, 4, 81);
  RunConfig hier;
  hier.algorithm = Algorithm::hier_favg;
  hier.tau = 2;
  hier.q = 3;
  hier.pi = 1;
  hier.rounds = 2;
  hier.lr = 0.09;
  hier.batch_size = 2;
  hier.seed = 14;
  TrajectoryCapture cap_h;
  auto h = run(hier, fx.fleet, nullptr, nullptr, &cap_h);

  // fedavg aggregating every tau steps, p*q rounds: same schedule.
  RunConfig fed = hier;
  fed.algorithm = Algorithm::fedavg;
  fed.q = 1;
  fed.rounds = hier.rounds * hier.q;
  TrajectoryCapture cap_f;
  auto f = run(fed, fx.fleet, nullptr, nullptr, &cap_f);

  REQUIRE(cap_h.post.size() == cap_f.post.size());
  for (std::size_t t = 0; t < cap_h.post.size(); ++t) {
    CHECK(max_diff(cap_h.post[t], cap_f.post[t]) == 0.0);
  }
  CHECK(h.averaged_model == f.averaged_model);
}

TEST_CASE("hier_favg with q=1 is exactly fedavg for any m") {
  auto fx = quad_fixture(6, 3, 3, 90);
  RunConfig cfg;
  cfg.algorithm = Algorithm::hier_favg;
  cfg.tau = 2;
  cfg.q = 1;
  cfg.rounds = 4;
  cfg.lr = 0.1;
  cfg.batch_size = 1;
  cfg.seed = 2;
  auto h = run(cfg, fx.fleet, nullptr, nullptr);
  cfg.algorithm = Algorithm::fedavg;
  auto f = run(cfg, fx.fleet, nullptr, nullptr);
  CHECK(h.averaged_model == f.averaged_model);
}

TEST_CASE("sample-size weighting matches the hand-computed weighted mean") {
  auto model = std::make_shared<QuadraticModel>(1);
  Fleet fleet;
  fleet.model = model.get();
  fleet.layout = ClusterLayout::contiguous(2, 1);
  fleet.train.resize(2);
  fleet.train[0] = dataset_from_rows({{0.0}}, {0}, 0);
  fleet.train[1] = dataset_from_rows({{4.0}, {4.0}, {4.0}}, {0, 0, 0}, 1);

  RunConfig cfg;
  cfg.algorithm = Algorithm::fedavg;
  cfg.tau = 1;
  cfg.q = 1;
  cfg.rounds = 1;
  cfg.lr = 1.0;  // from x=0 one full step lands on each device's target
  cfg.batch_size = 5;
  cfg.grad_mode = GradientMode::full_batch;
  cfg.weighting = Weighting::sample_size;
  auto result = run(cfg, fleet, nullptr, nullptr);
  // Device models: 0 and 4; weighted mean (1*0 + 3*4)/4 = 3.
  CHECK(result.edge_models[0][0] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("epoch mode: full-size batches reduce to full-batch gradients") {
  auto fx = quad_fixture(4, 2, 3, 95, 4, 0.5);
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::ring, 2, 0));
  RunConfig cfg;
  cfg.tau = 2;
  cfg.q = 2;
  cfg.pi = 1;
  cfg.rounds = 2;
  cfg.lr = 0.1;
  cfg.batch_size = 4;  // covers every device's dataset: one chunk per epoch
  cfg.seed = 31;
  cfg.tau_unit = TauUnit::epochs;
  auto epochs = run(cfg, fx.fleet, &mixing, nullptr);

  cfg.tau_unit = TauUnit::iterations;
  cfg.grad_mode = GradientMode::full_batch;
  auto full = run(cfg, fx.fleet, &mixing, nullptr);
  CHECK(max_abs_err(epochs.averaged_model, full.averaged_model) < 1e-12);
}

TEST_CASE("epoch mode wall clock uses actual step counts") {
  auto fx = quad_fixture(4, 2, 3, 96, 7, 0.5);  // 7 samples, batch 3 -> 3 chunks
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::ring, 2, 0));
  auto profile = femnist_paper_profile();
  RunConfig cfg;
  cfg.tau = 2;
  cfg.q = 2;
  cfg.pi = 1;
  cfg.rounds = 1;
  cfg.lr = 0.05;
  cfg.batch_size = 3;
  cfg.seed = 7;
  cfg.tau_unit = TauUnit::epochs;
  auto result = run(cfg, fx.fleet, &mixing, &profile);
  // Per device: ceil(7/3)=3 chunks x tau(2) epochs x q(2) rounds = 12 steps.
  double expected = round_time_steps(Algorithm::ce_fedavg, profile, 12.0, cfg.q, cfg.pi);
  CHECK(result.records.back().wall_sim_seconds == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("round records: one per global round, t = (l+1)*q*tau") {
  auto fx = quad_fixture(4, 2, 3, 15);
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::ring, 2, 0));
  RunConfig cfg;
  cfg.tau = 3;
  cfg.q = 2;
  cfg.pi = 1;
  cfg.rounds = 5;
  cfg.lr = 0.05;
  cfg.batch_size = 1;
  cfg.seed = 11;
  auto result = run(cfg, fx.fleet, &mixing, nullptr);
  REQUIRE(result.records.size() == 5);
  for (int l = 0; l < 5; ++l) {
    CHECK(result.records[static_cast<std::size_t>(l)].round == l);
    CHECK(result.records[static_cast<std::size_t>(l)].t == (l + 1) * 6);
  }
}

TEST_CASE("matrix oracle agrees with the engine on a fixed small case") {
  auto oc = make_oracle_case(1234);
  TrajectoryCapture cap;
  run(oc.config, oc.fleet, &oc.mixing, nullptr, &cap);
  auto oracle = run_matrix_oracle(oc.config, oc.fleet, oc.mixing);
  double worst = 0.0;
  for (std::size_t t = 0; t < oracle.post.size(); ++t) {
    worst = std::max(worst, max_diff(cap.post[t], oracle.post[t]));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("reduction harnesses pass on a quick seed") {
  const std::uint64_t seeds[] = {7};
  CHECK(check_fedavg_reduction(seeds).pass);
  CHECK(check_decentralized_reduction(seeds).pass);
  CHECK(check_hsgd_reduction(seeds).pass);
  CHECK(check_matrix_oracle(seeds).pass);
}

TEST_CASE("run preconditions") {
  auto fx = quad_fixture(4, 2, 3, 17);
  RunConfig cfg;
  cfg.tau = 1;
  cfg.q = 1;
  cfg.rounds = 1;
  cfg.lr = 0.1;
  cfg.seed = 1;
  // ce_fedavg needs a mixing matrix.
  CHECK_THROWS_AS(run(cfg, fx.fleet, nullptr, nullptr), ConfigError);
  // Mixing size must match the cluster count.
  auto wrong = MixingMatrix::metropolis(build_graph(GraphKind::ring, 3, 0));
  CHECK_THROWS_AS(run(cfg, fx.fleet, &wrong, nullptr), ConfigError);
  // stream_ids must cover every device.
  auto mixing = MixingMatrix::metropolis(build_graph(GraphKind::ring, 2, 0));
  cfg.stream_ids = {0, 1};
  CHECK_THROWS_AS(run(cfg, fx.fleet, &mixing, nullptr), ConfigError);
  cfg.stream_ids.clear();
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
