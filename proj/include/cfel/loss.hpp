#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfel/dataset.hpp"
#include "cfel/types.hpp"

namespace cfel {

// Local objective of one device: mean loss over the device's samples.
// Gradients are hand-written; each model documents its parameter layout.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual std::size_t dim() const = 0;
  virtual std::string kind() const = 0;

  // Loss of one sample.
  virtual double sample_loss(std::span<const double> params, const DeviceDataset& data,
                             int sample) const = 0;
  // out += weight * grad of sample_loss.
  virtual void add_sample_gradient(std::span<const double> params, const DeviceDataset& data,
                                   int sample, double weight, std::span<double> out) const = 0;

  // Classification models predict a label; quadratic returns -1.
  virtual int predict(std::span<const double> params, std::span<const double> features) const {
    (void)params;
    (void)features;
    return -1;
  }
  // Class probabilities (empty for non-classifiers).
  virtual std::vector<double> predict_proba(std::span<const double> params,
                                            std::span<const double> features) const {
    (void)params;
    (void)features;
    return {};
  }

  // Smoothness constant when analytically known.
  virtual std::optional<double> lipschitz() const { return std::nullopt; }

  // Fresh parameter vector for a run seed (keyed on rng_domain::kInit).
  virtual ParamVec init_params(std::uint64_t seed) const;

  double mean_loss(std::span<const double> params, const DeviceDataset& data) const;
  double accuracy(std::span<const double> params, const DeviceDataset& data) const;
};

// F(x) = mean_j 1/2 sum_c curvature[c] * (x[c] - b_j[c])^2 where the rows of
// the device dataset are the targets b_j. Exact minimizer: row mean.
class QuadraticModel : public LossModel {
 public:
  explicit QuadraticModel(int d);
  QuadraticModel(int d, std::vector<double> curvature);

  std::size_t dim() const override;
  std::string kind() const override { return "quadratic"; }
  double sample_loss(std::span<const double> params, const DeviceDataset& data,
                     int sample) const override;
  void add_sample_gradient(std::span<const double> params, const DeviceDataset& data, int sample,
                           double weight, std::span<double> out) const override;
  std::optional<double> lipschitz() const override;
  ParamVec init_params(std::uint64_t seed) const override;

  const std::vector<double>& curvature() const { return curvature_; }

 private:
  int d_;
  std::vector<double> curvature_;
};

// Multinomial logistic regression. Parameter layout: weights row-major
// (classes x features) followed by per-class biases.
class LogisticModel : public LossModel {
 public:
  LogisticModel(int feature_dim, int classes);

  std::size_t dim() const override;
  std::string kind() const override { return "logistic"; }
  double sample_loss(std::span<const double> params, const DeviceDataset& data,
                     int sample) const override;
  void add_sample_gradient(std::span<const double> params, const DeviceDataset& data, int sample,
                           double weight, std::span<double> out) const override;
  int predict(std::span<const double> params, std::span<const double> features) const override;
  std::vector<double> predict_proba(std::span<const double> params,
                                    std::span<const double> features) const override;
  ParamVec init_params(std::uint64_t seed) const override;

  int feature_dim() const { return f_; }
  int classes() const { return c_; }

 private:
  int f_;
  int c_;
};

// One-hidden-layer tanh network with softmax output. Parameter layout:
// W1 (hidden x features), b1, W2 (classes x hidden), b2.
class MlpModel : public LossModel {
 public:
  MlpModel(int feature_dim, int hidden, int classes);

  std::size_t dim() const override;
  std::string kind() const override { return "mlp"; }
  double sample_loss(std::span<const double> params, const DeviceDataset& data,
                     int sample) const override;
  void add_sample_gradient(std::span<const double> params, const DeviceDataset& data, int sample,
                           double weight, std::span<double> out) const override;
  int predict(std::span<const double> params, std::span<const double> features) const override;
  std::vector<double> predict_proba(std::span<const double> params,
                                    std::span<const double> features) const override;
  ParamVec init_params(std::uint64_t seed) const override;

 private:
  std::vector<double> forward_probs(std::span<const double> params,
                                    std::span<const double> features,
                                    std::vector<double>* hidden_out) const;
  int f_;
  int h_;
  int c_;
};

struct GradSample {
  ParamVec gradient;
  std::vector<int> batch_ids;
  int device_id = -1;
};

// Exact mean gradient over every sample of the device.
ParamVec full_gradient(const LossModel& model, std::span<const double> params,
                       const DeviceDataset& data);

// Mean gradient over exactly the listed batch indices.
GradSample stoch_gradient(const LossModel& model, std::span<const double> params,
                          const DeviceDataset& data, std::span<const int> batch);

// Plain SGD step, or classical momentum when mu > 0:
//   v <- mu*v + g,  x <- x - eta*v.
void sgd_step(ParamVec& params, const ParamVec& grad, double eta, ParamVec* momentum_state,
              double mu);

}  // namespace cfel
