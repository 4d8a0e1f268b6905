#include "cfel/oracle.hpp"

#include <cmath>

#include "cfel/rng.hpp"

namespace cfel {

StageOp stage_op(long t_next, int tau, int q) {
  long qtau = static_cast<long>(q) * tau;
  if (t_next % qtau == 0) return StageOp::inter;
  if (t_next % tau == 0) return StageOp::intra;
  return StageOp::identity;
}

std::vector<double> build_intra_operator(const ClusterLayout& layout) {
  // V = C*B: V[j, k] = 1/n_{i_k} when j and k share a cluster, else 0.
  std::size_t n = static_cast<std::size_t>(layout.n);
  std::vector<double> v(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      int ck = layout.cluster_of[k];
      if (layout.cluster_of[j] == ck) {
        v[j * n + k] = 1.0 / static_cast<double>(layout.members[static_cast<std::size_t>(ck)].size());
      }
    }
  }
  return v;
}

std::vector<double> build_inter_operator(const ClusterLayout& layout,
                                         const std::vector<double>& h_pi) {
  // Z = C*H^pi*B: Z[j, k] = (1/n_{i_j}) * H^pi[i_j, i_k].
  std::size_t n = static_cast<std::size_t>(layout.n);
  std::size_t m = static_cast<std::size_t>(layout.m);
  std::vector<double> z(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t ij = static_cast<std::size_t>(layout.cluster_of[j]);
    double inv = 1.0 / static_cast<double>(layout.members[ij].size());
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t ik = static_cast<std::size_t>(layout.cluster_of[k]);
      z[j * n + k] = inv * h_pi[ij * m + ik];
    }
  }
  return z;
}

OracleResult run_matrix_oracle(const RunConfig& config, const Fleet& fleet,
                               const MixingMatrix& mixing) {
  config.validate();
  fleet.validate();
  if (config.momentum != 0.0) throw ConfigError("matrix oracle: momentum must be 0");
  if (config.weighting != Weighting::uniform) throw ConfigError("matrix oracle: uniform only");
  if (config.tau_unit != TauUnit::iterations) throw ConfigError("matrix oracle: iterations only");
  if (config.algorithm != Algorithm::ce_fedavg) throw ConfigError("matrix oracle: ce_fedavg only");
  if (mixing.size() != fleet.layout.m) throw ConfigError("matrix oracle: mixing size mismatch");

  const std::size_t n = static_cast<std::size_t>(fleet.layout.n);
  const std::size_t dim = fleet.model->dim();
  const long total = config.total_iterations();

  auto v_op = build_intra_operator(fleet.layout);
  auto z_op = build_inter_operator(fleet.layout, mixing.power(config.pi));

  // X columns are device models; start from the common initial point.
  std::vector<ParamVec> x(n, fleet.model->init_params(config.seed));

  OracleResult result;
  result.pre.resize(static_cast<std::size_t>(total));
  result.post.resize(static_cast<std::size_t>(total));
  result.mean_grad.assign(static_cast<std::size_t>(total), ParamVec(dim, 0.0));

  for (long t = 0; t < total; ++t) {
    // X <- X - eta*G_t with the engine's batch stream.
    for (std::size_t k = 0; k < n; ++k) {
      const auto& data = fleet.train[k];
      std::uint64_t stream = config.stream_ids.empty() ? k : config.stream_ids[k];
      ParamVec g;
      switch (config.grad_mode) {
        case GradientMode::minibatch: {
          auto batch = draw_batch(config.seed, stream, static_cast<std::uint64_t>(t),
                                  config.batch_size, data.rows());
          g = stoch_gradient(*fleet.model, x[k], data, batch).gradient;
          break;
        }
        case GradientMode::full_batch:
          g = full_gradient(*fleet.model, x[k], data);
          break;
        case GradientMode::full_plus_noise: {
          g = full_gradient(*fleet.model, x[k], data);
          if (config.noise_sigma > 0.0) {
            StreamRng rng(config.seed, rng_domain::stream(rng_domain::kNoise, stream),
                          static_cast<std::uint64_t>(t));
            double scale = config.noise_sigma / std::sqrt(static_cast<double>(dim));
            for (auto& vv : g) vv += scale * rng.next_gaussian();
          }
          break;
        }
      }
      for (std::size_t c = 0; c < dim; ++c) {
        result.mean_grad[static_cast<std::size_t>(t)][c] += g[c] / static_cast<double>(n);
        x[k][c] -= config.lr * g[c];
      }
    }
    result.pre[static_cast<std::size_t>(t)] = x;

    // X <- X * W_t (column k of the product mixes columns j by W[j, k]).
    StageOp op = stage_op(t + 1, config.tau, config.q);
    if (op != StageOp::identity) {
      const auto& w = op == StageOp::intra ? v_op : z_op;
      std::vector<ParamVec> mixed(n, ParamVec(dim, 0.0));
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
          double wjk = w[j * n + k];
          if (wjk == 0.0) continue;
          for (std::size_t c = 0; c < dim; ++c) mixed[k][c] += wjk * x[j][c];
        }
      }
      x = std::move(mixed);
    }
    result.post[static_cast<std::size_t>(t)] = x;
  }
  return result;
}

}  // namespace cfel
