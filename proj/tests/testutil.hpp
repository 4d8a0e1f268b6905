#pragma once

#include <cmath>
#include <vector>

#include "cfel/dataset.hpp"
#include "cfel/loss.hpp"
#include "cfel/rng.hpp"

namespace cfel::testutil {

// Central finite-difference gradient of the mean loss over a dataset; the
// independent oracle for every analytic gradient.
inline ParamVec fd_gradient(const LossModel& model, const ParamVec& params,
                            const DeviceDataset& data, double h = 1e-5) {
  ParamVec g(params.size(), 0.0);
  ParamVec x = params;
  for (std::size_t c = 0; c < params.size(); ++c) {
    x[c] = params[c] + h;
    double up = model.mean_loss(x, data);
    x[c] = params[c] - h;
    double down = model.mean_loss(x, data);
    x[c] = params[c];
    g[c] = (up - down) / (2.0 * h);
  }
  return g;
}

// Worst relative error over components with |reference| > floor.
inline double max_rel_err(const ParamVec& value, const ParamVec& reference,
                          double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t c = 0; c < value.size(); ++c) {
    if (std::fabs(reference[c]) <= floor) continue;
    worst = std::max(worst, std::fabs(value[c] - reference[c]) / std::fabs(reference[c]));
  }
  return worst;
}

inline double max_abs_err(const ParamVec& a, const ParamVec& b) {
  double worst = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) worst = std::max(worst, std::fabs(a[c] - b[c]));
  return worst;
}

inline ParamVec random_params(std::size_t dim, std::uint64_t seed, double scale = 1.0) {
  StreamRng rng(seed, 0xF00D, 0);
  ParamVec p(dim);
  for (auto& v : p) v = scale * rng.next_gaussian();
  return p;
}

// Dataset with explicit rows.
inline DeviceDataset dataset_from_rows(const std::vector<std::vector<double>>& rows,
                                       const std::vector<int>& labels, int device_id = 0) {
  DeviceDataset d;
  d.device_id = device_id;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    d.append_row(rows[r], labels.empty() ? 0 : labels[r]);
  }
  return d;
}

inline DeviceDataset random_labeled_data(int rows, int fdim, int classes, std::uint64_t seed) {
  StreamRng rng(seed, 0xDA7A, 0);
  DeviceDataset d;
  d.feature_dim = fdim;
  std::vector<double> x(static_cast<std::size_t>(fdim));
  for (int r = 0; r < rows; ++r) {
    for (auto& v : x) v = rng.next_gaussian();
    d.append_row(x, static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes))));
  }
  return d;
}

}  // namespace cfel::testutil
