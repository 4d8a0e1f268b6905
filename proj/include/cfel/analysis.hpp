#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cfel/dataset.hpp"
#include "cfel/loss.hpp"
#include "cfel/types.hpp"

namespace cfel {

// Gradient-heterogeneity estimates. The reported numbers are maxima over the
// probe set, a lower estimate of the true suprema.
struct DivergenceReport {
  double eps_sq = 0.0;               // inter-cluster
  std::vector<double> eps_i_sq;      // intra-cluster, per cluster
  double eps_hat_sq = 0.0;           // global
  std::size_t probe_count = 0;
  // Max over probes of |eps_hat^2 - eps^2 - sum (n_i/n) eps_i^2|.
  double max_decomposition_residual = 0.0;

  std::string to_json() const;
};

DivergenceReport estimate_divergences(const LossModel& model,
                                      const std::vector<DeviceDataset>& train,
                                      const ClusterLayout& layout,
                                      const std::vector<ParamVec>& probes);

// Empirical mean of ||g - grad F_k||^2 over devices and sampled batches.
double estimate_sigma_sq(const LossModel& model, const ParamVec& params,
                         const std::vector<DeviceDataset>& train, int batch_size, int trials,
                         std::uint64_t seed);

// Largest observed ||grad F(x) - grad F(x')|| / ||x - x'|| over probe pairs.
double estimate_lipschitz(const LossModel& model, const std::vector<DeviceDataset>& train,
                          const std::vector<ParamVec>& probes);

struct BoundInputs {
  double smoothness = 0.0;            // L
  double sigma_sq = 0.0;
  double eps_sq = 0.0;
  std::vector<double> eps_i_sq;       // per cluster
  std::vector<double> cluster_weight; // n_i / n, aligned with eps_i_sq
  double zeta = 0.0;
  int pi = 1;
  int tau = 1;
  int q = 1;
  int n = 1;
  int m = 1;
  double eta = 0.0;
  double total_iterations = 0.0;      // T
  double f1_minus_finf = 0.0;
};

struct BoundBreakdown {
  double total = 0.0;
  // init, sgd_variance, inter_variance, inter_divergence, intra_variance,
  // intra_divergence
  std::array<double, 6> terms{};
  double omega1 = 0.0;
  double omega2 = 0.0;
  double lr_cap = 0.0;  // largest eta admitted by the step-size condition
  bool lr_ok = false;

  std::string to_json(const BoundInputs& in) const;
};

// Step-size cap min{1/(2*L*tau), 1/(2*sqrt(2*Omega2)*L*q*tau)}.
double learning_rate_cap(double smoothness, int tau, int q, double omega2);

// Evaluates the six-term convergence bound. Computes even when the step-size
// condition fails, with lr_ok = false.
BoundBreakdown theorem1_bound(const BoundInputs& inputs);

struct RateRow {
  double total_iterations = 0.0;
  double eta = 0.0;
  double bound = 0.0;
  bool feasible = false;        // eta fits the step-size condition
  bool beyond_q4tau4 = false;   // T > q^4 * tau^4
};

// Bound values over a T grid at eta = (1/L)*sqrt(n/T). Infeasible rows are
// kept but flagged.
std::vector<RateRow> corollary_rate_table(const BoundInputs& base,
                                          const std::vector<double>& t_grid);

// Least-squares slope of log(y) against log(x) over feasible points.
double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace cfel
