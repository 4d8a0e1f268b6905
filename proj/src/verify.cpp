#include "cfel/verify.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "cfel/oracle.hpp"
#include "cfel/rng.hpp"

namespace cfel {

namespace {

double max_abs_diff(const std::vector<ParamVec>& a, const std::vector<ParamVec>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t c = 0; c < a[k].size(); ++c) {
      worst = std::max(worst, std::fabs(a[k][c] - b[k][c]));
    }
  }
  return worst;
}

bool bit_equal(const std::vector<ParamVec>& a, const std::vector<ParamVec>& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] != b[k]) return false;
  }
  return true;
}

// Shared heterogeneous logistic fixture: one device per blob-skewed slice.
// Dimension stays small (2*3+3 = 9) so the checks run in milliseconds.
Fleet make_logistic_fleet(int n, int m, int samples_per_device, std::uint64_t seed,
                          std::shared_ptr<const LossModel>& model_out) {
  const int fdim = 2;
  const int classes = 3;
  auto model = std::make_shared<LogisticModel>(fdim, classes);
  Fleet fleet;
  fleet.layout = ClusterLayout::contiguous(n, m);
  auto all = make_classification_data(n * samples_per_device, fdim, classes, 2.0, seed);
  PartitionSpec spec;
  spec.scheme = PartitionSpec::Scheme::dirichlet;
  spec.alpha = 0.7;
  auto parts = partition(all, fleet.layout, spec, seed + 1);
  fleet.train = std::move(parts.devices);
  fleet.model = model.get();
  model_out = std::move(model);
  return fleet;
}

}  // namespace

CheckResult check_fedavg_reduction(std::span<const std::uint64_t> seeds) {
  CheckResult res;
  res.name = "fedavg-reduction";
  res.pass = true;
  for (std::uint64_t seed : seeds) {
    std::shared_ptr<const LossModel> model;
    Fleet fleet = make_logistic_fleet(6, 1, 8, seed, model);
    auto graph = build_graph(GraphKind::ring, 1, seed);
    auto mixing = MixingMatrix::metropolis(graph);

    RunConfig cfg;
    cfg.tau = 4;
    cfg.q = 1;
    cfg.pi = 2;
    cfg.rounds = 3;
    cfg.batch_size = 2;
    cfg.lr = 0.1;
    cfg.momentum = 0.9;
    cfg.weighting = Weighting::sample_size;
    cfg.seed = seed;

    cfg.algorithm = Algorithm::ce_fedavg;
    TrajectoryCapture cap_ce;
    auto ce = run(cfg, fleet, &mixing, nullptr, &cap_ce);
    cfg.algorithm = Algorithm::fedavg;
    TrajectoryCapture cap_fed;
    auto fed = run(cfg, fleet, nullptr, nullptr, &cap_fed);

    bool same = bit_equal(ce.device_models, fed.device_models);
    for (std::size_t t = 0; same && t < cap_ce.post.size(); ++t) {
      same = bit_equal(cap_ce.post[t], cap_fed.post[t]);
    }
    if (!same) {
      res.pass = false;
      res.detail = "trajectories differ at seed " + std::to_string(seed);
      double worst = max_abs_diff(ce.device_models, fed.device_models);
      res.max_err = std::max(res.max_err, worst);
    }
  }
  if (res.pass) res.detail = "bit-identical over " + std::to_string(seeds.size()) + " seeds";
  return res;
}

CheckResult check_decentralized_reduction(std::span<const std::uint64_t> seeds) {
  CheckResult res;
  res.name = "decentralized-local-sgd-reduction";
  const double tol = 1e-12;
  res.pass = true;
  for (std::uint64_t seed : seeds) {
    const int n = 6;
    std::shared_ptr<const LossModel> model;
    Fleet fleet = make_logistic_fleet(n, n, 6, seed, model);
    auto graph = build_graph(GraphKind::ring, n, seed);
    auto mixing = MixingMatrix::metropolis(graph);

    RunConfig cfg;
    cfg.algorithm = Algorithm::ce_fedavg;
    cfg.tau = 1;
    cfg.q = 3;
    cfg.pi = 2;
    cfg.rounds = 4;
    cfg.batch_size = 2;
    cfg.lr = 0.08;
    cfg.seed = seed;

    TrajectoryCapture cap;
    run(cfg, fleet, &mixing, nullptr, &cap);

    // Direct decentralized local SGD: every device steps, then every q
    // steps mixes with H^pi.
    auto h_pi = mixing.power(cfg.pi);
    std::vector<ParamVec> x(n, fleet.model->init_params(cfg.seed));
    double worst = 0.0;
    long total = cfg.total_iterations();
    for (long t = 0; t < total; ++t) {
      for (int k = 0; k < n; ++k) {
        auto batch = draw_batch(cfg.seed, static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(t), cfg.batch_size,
                                fleet.train[static_cast<std::size_t>(k)].rows());
        auto g = stoch_gradient(*fleet.model, x[static_cast<std::size_t>(k)],
                                fleet.train[static_cast<std::size_t>(k)], batch);
        for (std::size_t c = 0; c < x[static_cast<std::size_t>(k)].size(); ++c) {
          x[static_cast<std::size_t>(k)][c] -= cfg.lr * g.gradient[c];
        }
      }
      if ((t + 1) % cfg.q == 0) {
        std::vector<ParamVec> mixed(static_cast<std::size_t>(n),
                                    ParamVec(fleet.model->dim(), 0.0));
        for (int k = 0; k < n; ++k) {
          for (int j = 0; j < n; ++j) {
            double w = h_pi[static_cast<std::size_t>(j) * n + k];
            for (std::size_t c = 0; c < mixed[static_cast<std::size_t>(k)].size(); ++c) {
              mixed[static_cast<std::size_t>(k)][c] += w * x[static_cast<std::size_t>(j)][c];
            }
          }
        }
        x = std::move(mixed);
      }
      worst = std::max(worst, max_abs_diff(cap.post[static_cast<std::size_t>(t)], x));
    }
    res.max_err = std::max(res.max_err, worst);
    if (worst > tol) {
      res.pass = false;
      res.detail = "max deviation " + std::to_string(worst) + " at seed " + std::to_string(seed);
    }
  }
  if (res.pass) {
    std::ostringstream d;
    d << "max deviation " << res.max_err << " (tol 1e-12)";
    res.detail = d.str();
  }
  return res;
}

CheckResult check_hsgd_reduction(std::span<const std::uint64_t> seeds) {
  CheckResult res;
  res.name = "hsgd-reduction";
  const double tol = 1e-12;
  res.pass = true;
  for (std::uint64_t seed : seeds) {
    const int n = 8;
    const int m = 4;
    std::shared_ptr<const LossModel> model;
    Fleet fleet = make_logistic_fleet(n, m, 6, seed, model);
    auto graph = build_graph(GraphKind::complete, m, seed);
    auto mixing = MixingMatrix::metropolis(graph);

    RunConfig cfg;
    cfg.algorithm = Algorithm::ce_fedavg;
    cfg.tau = 2;
    cfg.q = 2;
    cfg.pi = 3;
    cfg.rounds = 3;
    cfg.batch_size = 2;
    cfg.lr = 0.08;
    cfg.seed = seed;

    TrajectoryCapture cap;
    run(cfg, fleet, &mixing, nullptr, &cap);

    // Direct hierarchical SGD: tau local steps, cluster average each edge
    // round, uniform average of cluster models every q edge rounds.
    std::vector<ParamVec> x(n, fleet.model->init_params(cfg.seed));
    const std::size_t dim = fleet.model->dim();
    double worst = 0.0;
    for (int l = 0; l < cfg.rounds; ++l) {
      for (int r = 0; r < cfg.q; ++r) {
        for (int s = 0; s < cfg.tau; ++s) {
          long t = (static_cast<long>(l) * cfg.q + r) * cfg.tau + s;
          for (int k = 0; k < n; ++k) {
            auto batch = draw_batch(cfg.seed, static_cast<std::uint64_t>(k),
                                    static_cast<std::uint64_t>(t), cfg.batch_size,
                                    fleet.train[static_cast<std::size_t>(k)].rows());
            auto g = stoch_gradient(*fleet.model, x[static_cast<std::size_t>(k)],
                                    fleet.train[static_cast<std::size_t>(k)], batch);
            for (std::size_t c = 0; c < dim; ++c) {
              x[static_cast<std::size_t>(k)][c] -= cfg.lr * g.gradient[c];
            }
          }
        }
        std::vector<ParamVec> cluster(static_cast<std::size_t>(m), ParamVec(dim, 0.0));
        for (int i = 0; i < m; ++i) {
          const auto& members = fleet.layout.members[static_cast<std::size_t>(i)];
          for (int k : members) {
            for (std::size_t c = 0; c < dim; ++c) {
              cluster[static_cast<std::size_t>(i)][c] +=
                  x[static_cast<std::size_t>(k)][c] / static_cast<double>(members.size());
            }
          }
        }
        if (r == cfg.q - 1) {
          ParamVec global(dim, 0.0);
          for (int i = 0; i < m; ++i) {
            for (std::size_t c = 0; c < dim; ++c) {
              global[c] += cluster[static_cast<std::size_t>(i)][c] / static_cast<double>(m);
            }
          }
          for (int i = 0; i < m; ++i) cluster[static_cast<std::size_t>(i)] = global;
        }
        for (int k = 0; k < n; ++k) {
          x[static_cast<std::size_t>(k)] =
              cluster[static_cast<std::size_t>(fleet.layout.cluster_of[static_cast<std::size_t>(k)])];
        }
        long t_end = (static_cast<long>(l) * cfg.q + r + 1) * cfg.tau - 1;
        worst = std::max(worst, max_abs_diff(cap.post[static_cast<std::size_t>(t_end)], x));
      }
    }
    res.max_err = std::max(res.max_err, worst);
    if (worst > tol) {
      res.pass = false;
      res.detail = "max deviation " + std::to_string(worst) + " at seed " + std::to_string(seed);
    }
  }
  if (res.pass) {
    std::ostringstream d;
    d << "max deviation " << res.max_err << " (tol 1e-12)";
    res.detail = d.str();
  }
  return res;
}

OracleCase make_oracle_case(std::uint64_t seed) {
  StreamRng rng(seed, rng_domain::stream(0x0C, 0), 0);
  static constexpr std::pair<int, int> shapes[] = {{4, 2}, {6, 2}, {6, 3}, {8, 2}, {8, 4}, {6, 6}};
  auto [n, m] = shapes[rng.next_below(std::size(shapes))];
  int d = 3 + static_cast<int>(rng.next_below(4));

  RunConfig cfg;
  cfg.algorithm = Algorithm::ce_fedavg;
  cfg.tau = 1 + static_cast<int>(rng.next_below(3));
  cfg.q = 1 + static_cast<int>(rng.next_below(3));
  cfg.pi = 1 + static_cast<int>(rng.next_below(3));
  cfg.rounds = 2 + static_cast<int>(rng.next_below(2));
  cfg.batch_size = 1 + static_cast<int>(rng.next_below(3));
  cfg.lr = 0.02 + 0.08 * rng.next_unit();
  cfg.seed = seed;

  auto graph = rng.next_below(2) == 0 ? build_graph(GraphKind::ring, m, seed)
                                      : build_graph(GraphKind::complete, m, seed);

  OracleCase oc{cfg, Fleet{}, MixingMatrix::metropolis(graph), nullptr};
  oc.fleet.layout = ClusterLayout::contiguous(n, m);
  if (rng.next_below(2) == 0) {
    auto fleet = make_quadratic_fleet(n, d, 1.5, seed, 3, 0.5);
    auto model = std::make_shared<QuadraticModel>(d);
    oc.fleet.train = std::move(fleet.devices);
    oc.fleet.model = model.get();
    oc.model = std::move(model);
  } else {
    std::shared_ptr<const LossModel> model;
    oc.fleet = make_logistic_fleet(n, m, 6, seed, model);
    oc.model = std::move(model);
  }
  return oc;
}

CheckResult check_matrix_oracle(std::span<const std::uint64_t> seeds) {
  CheckResult res;
  res.name = "matrix-oracle";
  const double traj_tol = 1e-10;
  const double recursion_tol = 1e-12;
  res.pass = true;
  double worst_traj = 0.0;
  double worst_rec = 0.0;
  for (std::uint64_t seed : seeds) {
    auto oc = make_oracle_case(seed);

    TrajectoryCapture cap;
    run(oc.config, oc.fleet, &oc.mixing, nullptr, &cap);
    auto oracle = run_matrix_oracle(oc.config, oc.fleet, oc.mixing);

    const std::size_t total = oracle.post.size();
    for (std::size_t t = 0; t < total; ++t) {
      worst_traj = std::max(worst_traj, max_abs_diff(cap.post[t], oracle.post[t]));
      worst_traj = std::max(worst_traj, max_abs_diff(cap.pre[t], oracle.pre[t]));
    }

    // Averaged-model recursion u_{t+1} = u_t - eta * mean_grad_t.
    const std::size_t dim = oc.fleet.model->dim();
    const std::size_t n = oracle.post.front().size();
    ParamVec u_prev = oc.fleet.model->init_params(oc.config.seed);
    for (std::size_t t = 0; t < total; ++t) {
      ParamVec u(dim, 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t c = 0; c < dim; ++c) u[c] += oracle.post[t][k][c] / static_cast<double>(n);
      }
      for (std::size_t c = 0; c < dim; ++c) {
        double expect = u_prev[c] - oc.config.lr * oracle.mean_grad[t][c];
        worst_rec = std::max(worst_rec, std::fabs(u[c] - expect));
      }
      u_prev = std::move(u);
    }
  }
  res.max_err = std::max(worst_traj, worst_rec);
  if (worst_traj > traj_tol || worst_rec > recursion_tol) {
    res.pass = false;
  }
  std::ostringstream d;
  d << "trajectory dev " << worst_traj << " (tol 1e-10), recursion residual " << worst_rec
    << " (tol 1e-12)";
  res.detail = d.str();
  return res;
}

std::vector<CheckResult> run_all_checks(std::span<const std::uint64_t> seeds) {
  return {check_fedavg_reduction(seeds), check_decentralized_reduction(seeds),
          check_hsgd_reduction(seeds), check_matrix_oracle(seeds)};
}

}  // namespace cfel
