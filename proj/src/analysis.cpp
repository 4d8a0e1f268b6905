#include "cfel/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "cfel/kernels.hpp"
#include "cfel/rng.hpp"
#include "cfel/topology.hpp"

namespace cfel {

namespace {

double dist_sq(const ParamVec& a, const ParamVec& b) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    double r = a[c] - b[c];
    acc += r * r;
  }
  return acc;
}

}  // namespace

DivergenceReport estimate_divergences(const LossModel& model,
                                      const std::vector<DeviceDataset>& train,
                                      const ClusterLayout& layout,
                                      const std::vector<ParamVec>& probes) {
  if (probes.empty()) throw ConfigError("estimate_divergences: need >= 1 probe point");
  layout.validate();
  DivergenceReport rep;
  rep.eps_i_sq.assign(static_cast<std::size_t>(layout.m), 0.0);
  rep.probe_count = probes.size();

  const double n = static_cast<double>(layout.n);
  for (const auto& x : probes) {
    std::vector<ParamVec> dev_grad(static_cast<std::size_t>(layout.n));
    for (int k = 0; k < layout.n; ++k) {
      dev_grad[static_cast<std::size_t>(k)] =
          full_gradient(model, x, train[static_cast<std::size_t>(k)]);
    }
    // Cluster gradients are uniform means over member devices; the global
    // gradient is the uniform mean over all devices.
    std::vector<ParamVec> cluster_grad(static_cast<std::size_t>(layout.m),
                                       ParamVec(model.dim(), 0.0));
    ParamVec global_grad(model.dim(), 0.0);
    for (int i = 0; i < layout.m; ++i) {
      const auto& members = layout.members[static_cast<std::size_t>(i)];
      for (int k : members) {
        kernels::axpy(1.0 / static_cast<double>(members.size()),
                      dev_grad[static_cast<std::size_t>(k)].data(),
                      cluster_grad[static_cast<std::size_t>(i)].data(), model.dim());
      }
      kernels::axpy(static_cast<double>(members.size()) / n,
                    cluster_grad[static_cast<std::size_t>(i)].data(), global_grad.data(),
                    model.dim());
    }

    double eps_sq = 0.0;
    double eps_hat_sq = 0.0;
    double eps_mix = 0.0;  // sum (n_i/n) eps_i^2 at this probe
    for (int i = 0; i < layout.m; ++i) {
      const auto& members = layout.members[static_cast<std::size_t>(i)];
      double wi = static_cast<double>(members.size()) / n;
      eps_sq += wi * dist_sq(cluster_grad[static_cast<std::size_t>(i)], global_grad);
      double intra = 0.0;
      for (int k : members) {
        intra += dist_sq(cluster_grad[static_cast<std::size_t>(i)],
                         dev_grad[static_cast<std::size_t>(k)]);
      }
      intra /= static_cast<double>(members.size());
      eps_mix += wi * intra;
      rep.eps_i_sq[static_cast<std::size_t>(i)] =
          std::max(rep.eps_i_sq[static_cast<std::size_t>(i)], intra);
    }
    for (int k = 0; k < layout.n; ++k) {
      eps_hat_sq += dist_sq(dev_grad[static_cast<std::size_t>(k)], global_grad) / n;
    }
    rep.eps_sq = std::max(rep.eps_sq, eps_sq);
    rep.eps_hat_sq = std::max(rep.eps_hat_sq, eps_hat_sq);
    rep.max_decomposition_residual = std::max(rep.max_decomposition_residual,
                                              std::fabs(eps_hat_sq - eps_sq - eps_mix));
  }
  return rep;
}

std::string DivergenceReport::to_json() const {
  nlohmann::json j;
  j["eps_sq"] = eps_sq;
  j["eps_i_sq"] = eps_i_sq;
  j["eps_hat_sq"] = eps_hat_sq;
  j["probe_count"] = probe_count;
  j["max_decomposition_residual"] = max_decomposition_residual;
  return j.dump(2);
}

double estimate_sigma_sq(const LossModel& model, const ParamVec& params,
                         const std::vector<DeviceDataset>& train, int batch_size, int trials,
                         std::uint64_t seed) {
  if (trials < 2) throw ConfigError("estimate_sigma_sq: need trials >= 2");
  double acc = 0.0;
  long count = 0;
  for (std::size_t k = 0; k < train.size(); ++k) {
    ParamVec exact = full_gradient(model, params, train[k]);
    // A batch covering the whole device is the deterministic full gradient.
    if (static_cast<std::size_t>(batch_size) >= train[k].rows()) {
      count += trials;
      continue;
    }
    for (int trial = 0; trial < trials; ++trial) {
      auto batch = draw_batch(seed, rng_domain::stream(0x5E, k), static_cast<std::uint64_t>(trial),
                              batch_size, train[k].rows());
      ParamVec g = stoch_gradient(model, params, train[k], batch).gradient;
      acc += dist_sq(g, exact);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

double estimate_lipschitz(const LossModel& model, const std::vector<DeviceDataset>& train,
                          const std::vector<ParamVec>& probes) {
  if (probes.size() < 2) throw ConfigError("estimate_lipschitz: need >= 2 probes");
  auto mean_grad = [&](const ParamVec& x) {
    ParamVec g(model.dim(), 0.0);
    for (const auto& data : train) {
      ParamVec gk = full_gradient(model, x, data);
      kernels::axpy(1.0 / static_cast<double>(train.size()), gk.data(), g.data(), g.size());
    }
    return g;
  };
  double best = 0.0;
  std::vector<ParamVec> grads(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) grads[i] = mean_grad(probes[i]);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    for (std::size_t j = i + 1; j < probes.size(); ++j) {
      double dx = dist_sq(probes[i], probes[j]);
      if (dx < 1e-24) continue;
      best = std::max(best, std::sqrt(dist_sq(grads[i], grads[j]) / dx));
    }
  }
  return best;
}

double learning_rate_cap(double smoothness, int tau, int q, double omega2) {
  double cap1 = 1.0 / (2.0 * smoothness * tau);
  double cap2 = 1.0 / (2.0 * std::sqrt(2.0 * omega2) * smoothness * q * tau);
  return std::min(cap1, cap2);
}

BoundBreakdown theorem1_bound(const BoundInputs& in) {
  if (in.zeta < 0.0 || in.zeta >= 1.0) throw ConfigError("theorem1_bound: need 0 <= zeta < 1");
  if (in.eps_i_sq.size() != in.cluster_weight.size()) {
    throw ConfigError("theorem1_bound: eps_i_sq and cluster_weight must align");
  }
  if (!(in.eta > 0.0) || !(in.total_iterations > 0.0) || !(in.smoothness > 0.0)) {
    throw ConfigError("theorem1_bound: eta, T, L must be positive");
  }
  auto [omega1, omega2] = omega_constants(in.zeta, in.pi);

  BoundBreakdown out;
  out.omega1 = omega1;
  out.omega2 = omega2;
  out.lr_cap = learning_rate_cap(in.smoothness, in.tau, in.q, omega2);
  out.lr_ok = in.eta <= out.lr_cap * (1.0 + 1e-12);

  const double eta = in.eta;
  const double lsq = in.smoothness * in.smoothness;
  const double qtau = static_cast<double>(in.q) * in.tau;
  const double nn = static_cast<double>(in.n);
  const double mm = static_cast<double>(in.m);
  double eps_i_mix = 0.0;
  for (std::size_t i = 0; i < in.eps_i_sq.size(); ++i) {
    eps_i_mix += in.cluster_weight[i] * in.eps_i_sq[i];
  }

  out.terms[0] = 2.0 * in.f1_minus_finf / (eta * in.total_iterations);
  out.terms[1] = eta * in.smoothness * in.sigma_sq / nn;
  out.terms[2] = 8.0 * eta * eta * lsq * (omega1 * qtau + (mm - 1.0) / nn * qtau) * in.sigma_sq;
  out.terms[3] = 16.0 * eta * eta * lsq * qtau * qtau * omega2 * in.eps_sq;
  out.terms[4] = 4.0 * (nn - mm) / nn * eta * eta * lsq * in.tau * in.sigma_sq;
  out.terms[5] = 8.0 * lsq * eta * eta * static_cast<double>(in.tau) * in.tau * eps_i_mix;
  out.total = 0.0;
  for (double v : out.terms) out.total += v;
  return out;
}

std::string BoundBreakdown::to_json(const BoundInputs& in) const {
  nlohmann::json j;
  j["total"] = total;
  j["terms"] = {{"init", terms[0]},
                {"sgd_variance", terms[1]},
                {"inter_variance", terms[2]},
                {"inter_divergence", terms[3]},
                {"intra_variance", terms[4]},
                {"intra_divergence", terms[5]}};
  j["omega1"] = omega1;
  j["omega2"] = omega2;
  j["lr_cap"] = lr_cap;
  j["lr_ok"] = lr_ok;
  j["inputs"] = {{"L", in.smoothness},
                 {"sigma_sq", in.sigma_sq},
                 {"eps_sq", in.eps_sq},
                 {"eps_i_sq", in.eps_i_sq},
                 {"cluster_weight", in.cluster_weight},
                 {"zeta", in.zeta},
                 {"pi", in.pi},
                 {"tau", in.tau},
                 {"q", in.q},
                 {"n", in.n},
                 {"m", in.m},
                 {"eta", in.eta},
                 {"T", in.total_iterations},
                 {"f1_minus_finf", in.f1_minus_finf}};
  return j.dump(2);
}

std::vector<RateRow> corollary_rate_table(const BoundInputs& base,
                                          const std::vector<double>& t_grid) {
  std::vector<RateRow> rows;
  rows.reserve(t_grid.size());
  for (double t : t_grid) {
    BoundInputs in = base;
    in.total_iterations = t;
    in.eta = std::sqrt(static_cast<double>(in.n) / t) / in.smoothness;
    auto bd = theorem1_bound(in);
    RateRow row;
    row.total_iterations = t;
    row.eta = in.eta;
    row.bound = bd.total;
    row.feasible = bd.lr_ok;
    double q4tau4 = std::pow(static_cast<double>(in.q) * in.tau, 4.0);
    row.beyond_q4tau4 = t > q4tau4;
    rows.push_back(row);
  }
  return rows;
}

double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw ConfigError("fit_loglog_slope: need >= 2 matched points");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double lx = std::log(xs[i]);
    double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace cfel
