#include "cfel/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "cfel/kernels.hpp"
#include "cfel/rng.hpp"

namespace cfel {

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "ce_fedavg") return Algorithm::ce_fedavg;
  if (s == "fedavg") return Algorithm::fedavg;
  if (s == "hier_favg") return Algorithm::hier_favg;
  if (s == "local_edge") return Algorithm::local_edge;
  throw ConfigError("unknown algorithm: " + s);
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::ce_fedavg: return "ce_fedavg";
    case Algorithm::fedavg: return "fedavg";
    case Algorithm::hier_favg: return "hier_favg";
    case Algorithm::local_edge: return "local_edge";
  }
  return "?";
}

void RunConfig::validate() const {
  if (tau < 1 || q < 1 || pi < 1 || rounds < 1) {
    throw ConfigError("run config: tau, q, pi, rounds must all be >= 1");
  }
  if (!(lr > 0.0)) throw ConfigError("run config: lr must be > 0");
  if (batch_size < 1) throw ConfigError("run config: batch_size must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("run config: momentum in [0, 1)");
  if (threads < 1) throw ConfigError("run config: threads must be >= 1");
  if (noise_sigma < 0.0) throw ConfigError("run config: noise_sigma must be >= 0");
  if (!(abort_threshold > 0.0)) throw ConfigError("run config: abort_threshold must be > 0");
}

void Fleet::validate() const {
  if (model == nullptr) throw ConfigError("fleet: missing model");
  layout.validate();
  if (train.size() != static_cast<std::size_t>(layout.n)) {
    throw ConfigError("fleet: expected " + std::to_string(layout.n) + " device datasets, got " +
                      std::to_string(train.size()));
  }
  for (const auto& d : train) {
    if (d.rows() == 0) throw ConfigError("fleet: empty device dataset");
  }
}

std::vector<double> aggregation_weights(const RunConfig& config, const Fleet& fleet,
                                        const std::vector<int>& devices) {
  std::vector<double> w(devices.size(), 1.0);
  if (config.weighting == Weighting::sample_size) {
    for (std::size_t i = 0; i < devices.size(); ++i) {
      w[i] = static_cast<double>(fleet.train[static_cast<std::size_t>(devices[i])].rows());
    }
  }
  return w;
}

ParamVec intra_aggregate(const std::vector<ParamVec>& params, const std::vector<double>& weights) {
  if (params.empty() || params.size() != weights.size()) {
    throw ConfigError("intra_aggregate: needs >= 1 device and matching weights");
  }
  if (params.size() == 1) return params.front();  // identity regardless of weight
  ParamVec acc(params.front().size(), 0.0);
  double wsum = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    kernels::axpy(weights[i], params[i].data(), acc.data(), acc.size());
    wsum += weights[i];
  }
  kernels::scale(1.0 / wsum, acc.data(), acc.size());
  return acc;
}

std::vector<ParamVec> inter_aggregate(const std::vector<ParamVec>& edge_params,
                                      const std::vector<double>& h_pi) {
  std::size_t m = edge_params.size();
  if (h_pi.size() != m * m) throw ConfigError("inter_aggregate: matrix size mismatch");
  std::vector<ParamVec> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    ParamVec acc(edge_params.front().size(), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      kernels::axpy(h_pi[j * m + i], edge_params[j].data(), acc.data(), acc.size());
    }
    out[i] = std::move(acc);
  }
  return out;
}

ParamVec uniform_average(const std::vector<ParamVec>& params) {
  ParamVec acc(params.front().size(), 0.0);
  for (const auto& p : params) kernels::axpy(1.0, p.data(), acc.data(), acc.size());
  kernels::scale(1.0 / static_cast<double>(params.size()), acc.data(), acc.size());
  return acc;
}

namespace {

struct DivergenceFlag {
  long t = -1;
  int device = -1;
  int local_step = -1;
};

// Runs fn(k) for k in [0, n), statically chunked over `threads` workers.
void parallel_for_devices(int threads, int n, const std::function<void(int)>& fn) {
  int workers = std::min(threads, n);
  if (workers <= 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    int lo = static_cast<int>(static_cast<long>(w) * n / workers);
    int hi = static_cast<int>(static_cast<long>(w + 1) * n / workers);
    pool.emplace_back([lo, hi, &fn] {
      for (int k = lo; k < hi; ++k) fn(k);
    });
  }
  for (auto& th : pool) th.join();
}

struct EngineState {
  std::vector<ParamVec> x;         // device models
  std::vector<ParamVec> momentum;  // device buffers
  std::vector<ParamVec> y;         // group (edge) models
};

std::uint64_t device_stream(const RunConfig& cfg, int k) {
  return cfg.stream_ids.empty() ? static_cast<std::uint64_t>(k)
                                : cfg.stream_ids[static_cast<std::size_t>(k)];
}

// Gradient for device k at nominal iteration t under the configured mode.
ParamVec device_gradient(const RunConfig& cfg, const Fleet& fleet, int k, long t,
                         const ParamVec& params, std::span<const int> fixed_batch) {
  const auto& data = fleet.train[static_cast<std::size_t>(k)];
  switch (cfg.grad_mode) {
    case GradientMode::minibatch: {
      if (!fixed_batch.empty()) {
        return stoch_gradient(*fleet.model, params, data, fixed_batch).gradient;
      }
      auto batch = draw_batch(cfg.seed, device_stream(cfg, k), static_cast<std::uint64_t>(t),
                              cfg.batch_size, data.rows());
      return stoch_gradient(*fleet.model, params, data, batch).gradient;
    }
    case GradientMode::full_batch:
      return full_gradient(*fleet.model, params, data);
    case GradientMode::full_plus_noise: {
      ParamVec g = full_gradient(*fleet.model, params, data);
      if (cfg.noise_sigma > 0.0) {
        StreamRng rng(cfg.seed, rng_domain::stream(rng_domain::kNoise, device_stream(cfg, k)),
                      static_cast<std::uint64_t>(t));
        double scale = cfg.noise_sigma / std::sqrt(static_cast<double>(g.size()));
        for (auto& v : g) v += scale * rng.next_gaussian();
      }
      return g;
    }
  }
  throw ConfigError("unknown gradient mode");
}

double edge_spread(const std::vector<ParamVec>& y) {
  if (y.size() <= 1) return 0.0;
  ParamVec mean = uniform_average(y);
  double spread = 0.0;
  ParamVec diff(mean.size());
  for (const auto& yi : y) {
    for (std::size_t c = 0; c < mean.size(); ++c) diff[c] = yi[c] - mean[c];
    spread = std::max(spread, std::sqrt(kernels::sum_sq(diff.data(), diff.size())));
  }
  return spread;
}

}  // namespace

RunResult run(const RunConfig& config, const Fleet& fleet, const MixingMatrix* mixing,
              const SystemProfile* profile, TrajectoryCapture* capture) {
  config.validate();
  fleet.validate();
  const int n = fleet.layout.n;
  const bool is_fedavg = config.algorithm == Algorithm::fedavg;
  const bool is_ce = config.algorithm == Algorithm::ce_fedavg;
  if (is_ce) {
    if (mixing == nullptr) throw ConfigError("ce_fedavg requires a mixing matrix");
    if (mixing->size() != fleet.layout.m) {
      throw ConfigError("mixing matrix size does not match cluster count");
    }
  }
  if (capture != nullptr && config.tau_unit != TauUnit::iterations) {
    throw ConfigError("trajectory capture requires tau_unit=iterations");
  }
  if (!config.stream_ids.empty() && config.stream_ids.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("stream_ids must list one entry per device");
  }

  // fedavg is m-agnostic: one aggregation group holding every device,
  // aggregated once per q*tau steps.
  std::vector<std::vector<int>> groups;
  if (is_fedavg) {
    groups.emplace_back(static_cast<std::size_t>(n));
    std::iota(groups.front().begin(), groups.front().end(), 0);
  } else {
    groups = fleet.layout.members;
  }
  std::vector<int> group_of(static_cast<std::size_t>(n), 0);
  if (!is_fedavg) group_of = fleet.layout.cluster_of;

  const int blocks_per_round = is_fedavg ? 1 : config.q;
  const int steps_per_block = is_fedavg ? config.q * config.tau : config.tau;
  const std::size_t dim = fleet.model->dim();

  std::vector<double> h_pi;
  if (is_ce) h_pi = mixing->power(config.pi);

  EngineState st;
  ParamVec x1 = fleet.model->init_params(config.seed);
  st.x.assign(static_cast<std::size_t>(n), x1);
  st.momentum.assign(static_cast<std::size_t>(n), ParamVec(dim, 0.0));
  st.y.assign(groups.size(), x1);

  std::vector<std::vector<double>> group_weights(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    group_weights[g] = aggregation_weights(config, fleet, groups[g]);
  }

  const long capture_steps =
      capture != nullptr ? static_cast<long>(config.rounds) * blocks_per_round * steps_per_block
                         : 0;
  std::vector<std::vector<ParamVec>> cap_grads;
  if (capture != nullptr) {
    capture->pre.assign(static_cast<std::size_t>(capture_steps),
                        std::vector<ParamVec>(static_cast<std::size_t>(n)));
    capture->post.assign(static_cast<std::size_t>(capture_steps),
                         std::vector<ParamVec>(static_cast<std::size_t>(n)));
    capture->mean_grad.assign(static_cast<std::size_t>(capture_steps), ParamVec(dim, 0.0));
    cap_grads.assign(static_cast<std::size_t>(capture_steps),
                     std::vector<ParamVec>(static_cast<std::size_t>(n)));
  }

  std::vector<DivergenceFlag> flags(static_cast<std::size_t>(n));
  // Actual SGD steps taken per device in the current global round (epoch
  // mode varies per device); feeds the simulated clock.
  std::vector<double> round_steps(static_cast<std::size_t>(n), 0.0);

  RunResult result;
  double wall = 0.0;

  for (int l = 0; l < config.rounds; ++l) {
    std::fill(round_steps.begin(), round_steps.end(), 0.0);
    for (int r = 0; r < blocks_per_round; ++r) {
      const long block = static_cast<long>(l) * blocks_per_round + r;
      const long t_base = block * steps_per_block;
      for (auto& f : flags) f = DivergenceFlag{};

      auto device_block = [&](int k) {
        auto& x = st.x[static_cast<std::size_t>(k)];
        auto& mom = st.momentum[static_cast<std::size_t>(k)];
        const auto& data = fleet.train[static_cast<std::size_t>(k)];
        auto check = [&](long t, int local_step) {
          if (!all_finite(x) || kernels::max_abs(x.data(), x.size()) > config.abort_threshold) {
            flags[static_cast<std::size_t>(k)] = {t, k, local_step};
            return false;
          }
          return true;
        };
        if (config.tau_unit == TauUnit::iterations) {
          for (int s = 0; s < steps_per_block; ++s) {
            long t = t_base + s;
            ParamVec g = device_gradient(config, fleet, k, t, x, {});
            sgd_step(x, g, config.lr, &mom, config.momentum);
            round_steps[static_cast<std::size_t>(k)] += 1.0;
            if (capture != nullptr) {
              capture->pre[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] = x;
              cap_grads[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] = std::move(g);
            }
            if (!check(t, s)) return;
          }
        } else {
          // tau epochs of shuffle-and-sweep over the device's data.
          std::vector<int> order(data.rows());
          std::iota(order.begin(), order.end(), 0);
          int local_step = 0;
          for (int e = 0; e < config.tau; ++e) {
            StreamRng shuffle_rng(
                config.seed, rng_domain::stream(rng_domain::kShuffle, device_stream(config, k)),
                static_cast<std::uint64_t>(block) * config.tau + e);
            shuffle_rng.shuffle(order);
            for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
              std::size_t hi = std::min(order.size(), at + config.batch_size);
              std::span<const int> chunk(order.data() + at, hi - at);
              ParamVec g = device_gradient(config, fleet, k, 0, x, chunk);
              sgd_step(x, g, config.lr, &mom, config.momentum);
              round_steps[static_cast<std::size_t>(k)] += 1.0;
              if (!check(t_base, local_step)) return;
              ++local_step;
            }
          }
        }
      };
      parallel_for_devices(config.threads, n, device_block);

      // Deterministic report: smallest (t, device) among flagged devices.
      const DivergenceFlag* worst = nullptr;
      for (const auto& f : flags) {
        if (f.device < 0) continue;
        if (worst == nullptr || f.t < worst->t || (f.t == worst->t && f.device < worst->device)) {
          worst = &f;
        }
      }
      if (worst != nullptr) {
        long qtau = static_cast<long>(config.q) * config.tau;
        int err_l = static_cast<int>(worst->t / qtau);
        long rem = worst->t % qtau;
        throw DivergenceError(err_l, static_cast<int>(rem / config.tau),
                              config.tau_unit == TauUnit::iterations
                                  ? static_cast<int>(rem % config.tau)
                                  : worst->local_step,
                              worst->device);
      }

      // Aggregation event. hier_favg replaces the last edge aggregation of
      // the round with a global average of all devices.
      bool global_event =
          is_fedavg || (config.algorithm == Algorithm::hier_favg && r == blocks_per_round - 1);
      if (global_event) {
        std::vector<int> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), 0);
        ParamVec global = intra_aggregate(st.x, aggregation_weights(config, fleet, all));
        for (auto& yi : st.y) yi = global;
      } else {
        for (std::size_t g = 0; g < groups.size(); ++g) {
          std::vector<ParamVec> members;
          members.reserve(groups[g].size());
          for (int k : groups[g]) members.push_back(st.x[static_cast<std::size_t>(k)]);
          st.y[g] = intra_aggregate(members, group_weights[g]);
        }
        if (is_ce && r == blocks_per_round - 1) {
          st.y = inter_aggregate(st.y, h_pi);
        }
      }

      // Broadcast: devices adopt their group model, momentum restarts.
      for (int k = 0; k < n; ++k) {
        st.x[static_cast<std::size_t>(k)] = st.y[static_cast<std::size_t>(group_of[k])];
        std::fill(st.momentum[static_cast<std::size_t>(k)].begin(),
                  st.momentum[static_cast<std::size_t>(k)].end(), 0.0);
      }

      if (capture != nullptr) {
        for (int s = 0; s < steps_per_block; ++s) {
          long t = t_base + s;
          auto& post = capture->post[static_cast<std::size_t>(t)];
          if (s + 1 == steps_per_block) {
            for (int k = 0; k < n; ++k) post[static_cast<std::size_t>(k)] = st.x[static_cast<std::size_t>(k)];
          } else {
            post = capture->pre[static_cast<std::size_t>(t)];
          }
          auto& mg = capture->mean_grad[static_cast<std::size_t>(t)];
          for (int k = 0; k < n; ++k) {
            kernels::axpy(1.0 / n, cap_grads[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)].data(),
                          mg.data(), mg.size());
          }
        }
      }
    }

    // Round metrics at the uniformly averaged model.
    ParamVec u = uniform_average(st.x);
    RoundRecord rec;
    rec.round = l;
    rec.t = static_cast<long>(l + 1) * config.q * config.tau;
    double loss = 0.0;
    ParamVec grad(dim, 0.0);
    for (int k = 0; k < n; ++k) {
      const auto& data = fleet.train[static_cast<std::size_t>(k)];
      loss += fleet.model->mean_loss(u, data);
      ParamVec gk = full_gradient(*fleet.model, u, data);
      kernels::axpy(1.0 / n, gk.data(), grad.data(), grad.size());
    }
    rec.global_loss = loss / n;
    rec.grad_norm_sq = kernels::sum_sq(grad.data(), grad.size());
    rec.test_accuracy = fleet.test.rows() > 0 ? fleet.model->accuracy(u, fleet.test) : 0.0;
    rec.spread = edge_spread(st.y);
    if (profile != nullptr) {
      if (config.tau_unit == TauUnit::iterations) {
        wall += round_time(config.algorithm, *profile, config.tau, config.q, config.pi);
      } else {
        double max_steps = *std::max_element(round_steps.begin(), round_steps.end());
        wall += round_time_steps(config.algorithm, *profile, max_steps, config.q, config.pi);
      }
    }
    rec.wall_sim_seconds = wall;
    result.records.push_back(rec);
    result.round_averages.push_back(std::move(u));
  }

  result.edge_models = st.y;
  result.device_models = st.x;
  result.averaged_model = uniform_average(st.x);
  return result;
}

std::string round_record_csv_header() {
  return "round,t,wall_sim_seconds,global_loss,test_accuracy,grad_norm_sq,spread";
}

namespace {
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

std::string round_record_csv_row(const RoundRecord& r) {
  std::ostringstream out;
  out << r.round << ',' << r.t << ',' << fmt17(r.wall_sim_seconds) << ','
      << fmt17(r.global_loss) << ',' << fmt17(r.test_accuracy) << ',' << fmt17(r.grad_norm_sq)
      << ',' << fmt17(r.spread);
  return out.str();
}

std::string round_record_json(const RoundRecord& r) {
  std::ostringstream out;
  out << "{\"round\":" << r.round << ",\"t\":" << r.t << ",\"wall_sim_seconds\":"
      << fmt17(r.wall_sim_seconds) << ",\"global_loss\":" << fmt17(r.global_loss)
      << ",\"test_accuracy\":" << fmt17(r.test_accuracy) << ",\"grad_norm_sq\":"
      << fmt17(r.grad_norm_sq) << ",\"spread\":" << fmt17(r.spread) << "}";
  return out.str();
}

}  // namespace cfel
