#include "cfel/loss.hpp"

#include <algorithm>
#include <cmath>

#include "cfel/kernels.hpp"
#include "cfel/rng.hpp"

namespace cfel {

namespace {

void check_dims(std::size_t params, std::size_t model_dim, const char* where) {
  if (params != model_dim) {
    throw ConfigError(std::string(where) + ": parameter dimension " + std::to_string(params) +
                      " does not match model dimension " + std::to_string(model_dim));
  }
}

// Softmax with max-shift; logits is overwritten with probabilities.
void softmax_inplace(std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

ParamVec LossModel::init_params(std::uint64_t seed) const {
  (void)seed;
  return ParamVec(dim(), 0.0);
}

double LossModel::mean_loss(std::span<const double> params, const DeviceDataset& data) const {
  if (data.rows() == 0) throw ConfigError("mean_loss: empty dataset");
  double total = 0.0;
  for (std::size_t j = 0; j < data.rows(); ++j) {
    total += sample_loss(params, data, static_cast<int>(j));
  }
  return total / static_cast<double>(data.rows());
}

double LossModel::accuracy(std::span<const double> params, const DeviceDataset& data) const {
  if (data.rows() == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t j = 0; j < data.rows(); ++j) {
    if (predict(params, data.row(j)) == data.labels[j]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(data.rows());
}

// ---------------------------------------------------------------- quadratic

QuadraticModel::QuadraticModel(int d) : d_(d), curvature_(static_cast<std::size_t>(d), 1.0) {}

QuadraticModel::QuadraticModel(int d, std::vector<double> curvature)
    : d_(d), curvature_(std::move(curvature)) {
  if (curvature_.size() != static_cast<std::size_t>(d_)) {
    throw ConfigError("quadratic curvature length must equal dimension");
  }
  for (double a : curvature_) {
    if (!(a > 0.0)) throw ConfigError("quadratic curvature entries must be positive");
  }
}

std::size_t QuadraticModel::dim() const { return static_cast<std::size_t>(d_); }

double QuadraticModel::sample_loss(std::span<const double> params, const DeviceDataset& data,
                                   int sample) const {
  check_dims(params.size(), dim(), "quadratic loss");
  auto b = data.row(static_cast<std::size_t>(sample));
  double acc = 0.0;
  for (int c = 0; c < d_; ++c) {
    double r = params[c] - b[c];
    acc += 0.5 * curvature_[c] * r * r;
  }
  return acc;
}

void QuadraticModel::add_sample_gradient(std::span<const double> params,
                                         const DeviceDataset& data, int sample, double weight,
                                         std::span<double> out) const {
  check_dims(params.size(), dim(), "quadratic gradient");
  auto b = data.row(static_cast<std::size_t>(sample));
  for (int c = 0; c < d_; ++c) {
    out[c] += weight * curvature_[c] * (params[c] - b[c]);
  }
}

std::optional<double> QuadraticModel::lipschitz() const {
  return *std::max_element(curvature_.begin(), curvature_.end());
}

ParamVec QuadraticModel::init_params(std::uint64_t) const { return ParamVec(dim(), 0.0); }

// ----------------------------------------------------------------- logistic

LogisticModel::LogisticModel(int feature_dim, int classes) : f_(feature_dim), c_(classes) {
  if (f_ < 1 || c_ < 2) throw ConfigError("logistic model needs feature_dim >= 1, classes >= 2");
}

std::size_t LogisticModel::dim() const {
  return static_cast<std::size_t>(c_) * static_cast<std::size_t>(f_) +
         static_cast<std::size_t>(c_);
}

std::vector<double> LogisticModel::predict_proba(std::span<const double> params,
                                                 std::span<const double> x) const {
  const double* w = params.data();
  const double* b = params.data() + static_cast<std::size_t>(c_) * f_;
  std::vector<double> logits(static_cast<std::size_t>(c_));
  for (int c = 0; c < c_; ++c) {
    logits[c] = kernels::dot(w + static_cast<std::size_t>(c) * f_, x.data(), x.size()) + b[c];
  }
  softmax_inplace(logits);
  return logits;
}

double LogisticModel::sample_loss(std::span<const double> params, const DeviceDataset& data,
                                  int sample) const {
  check_dims(params.size(), dim(), "logistic loss");
  auto probs = predict_proba(params, data.row(static_cast<std::size_t>(sample)));
  double p = probs[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(sample)])];
  return -std::log(std::max(p, 1e-300));
}

void LogisticModel::add_sample_gradient(std::span<const double> params, const DeviceDataset& data,
                                        int sample, double weight, std::span<double> out) const {
  check_dims(params.size(), dim(), "logistic gradient");
  auto x = data.row(static_cast<std::size_t>(sample));
  int y = data.labels[static_cast<std::size_t>(sample)];
  auto probs = predict_proba(params, x);
  double* gw = out.data();
  double* gb = out.data() + static_cast<std::size_t>(c_) * f_;
  for (int c = 0; c < c_; ++c) {
    double coef = probs[static_cast<std::size_t>(c)] - (c == y ? 1.0 : 0.0);
    kernels::axpy(weight * coef, x.data(), gw + static_cast<std::size_t>(c) * f_, x.size());
    gb[c] += weight * coef;
  }
}

int LogisticModel::predict(std::span<const double> params, std::span<const double> x) const {
  return argmax(predict_proba(params, x));
}

ParamVec LogisticModel::init_params(std::uint64_t) const { return ParamVec(dim(), 0.0); }

// ---------------------------------------------------------------------- mlp

MlpModel::MlpModel(int feature_dim, int hidden, int classes)
    : f_(feature_dim), h_(hidden), c_(classes) {
  if (f_ < 1 || h_ < 1 || c_ < 2) {
    throw ConfigError("mlp model needs feature_dim, hidden >= 1 and classes >= 2");
  }
}

std::size_t MlpModel::dim() const {
  return static_cast<std::size_t>(h_) * f_ + h_ + static_cast<std::size_t>(c_) * h_ + c_;
}

std::vector<double> MlpModel::forward_probs(std::span<const double> params,
                                            std::span<const double> x,
                                            std::vector<double>* hidden_out) const {
  const double* w1 = params.data();
  const double* b1 = w1 + static_cast<std::size_t>(h_) * f_;
  const double* w2 = b1 + h_;
  const double* b2 = w2 + static_cast<std::size_t>(c_) * h_;
  std::vector<double> a1(static_cast<std::size_t>(h_));
  for (int i = 0; i < h_; ++i) {
    a1[i] = std::tanh(kernels::dot(w1 + static_cast<std::size_t>(i) * f_, x.data(), x.size()) +
                      b1[i]);
  }
  std::vector<double> logits(static_cast<std::size_t>(c_));
  for (int c = 0; c < c_; ++c) {
    logits[c] =
        kernels::dot(w2 + static_cast<std::size_t>(c) * h_, a1.data(), a1.size()) + b2[c];
  }
  softmax_inplace(logits);
  if (hidden_out != nullptr) *hidden_out = std::move(a1);
  return logits;
}

double MlpModel::sample_loss(std::span<const double> params, const DeviceDataset& data,
                             int sample) const {
  check_dims(params.size(), dim(), "mlp loss");
  auto probs = forward_probs(params, data.row(static_cast<std::size_t>(sample)), nullptr);
  double p = probs[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(sample)])];
  return -std::log(std::max(p, 1e-300));
}

void MlpModel::add_sample_gradient(std::span<const double> params, const DeviceDataset& data,
                                   int sample, double weight, std::span<double> out) const {
  check_dims(params.size(), dim(), "mlp gradient");
  auto x = data.row(static_cast<std::size_t>(sample));
  int y = data.labels[static_cast<std::size_t>(sample)];

  std::vector<double> a1;
  auto probs = forward_probs(params, x, &a1);

  const double* w2 = params.data() + static_cast<std::size_t>(h_) * f_ + h_;
  double* gw1 = out.data();
  double* gb1 = gw1 + static_cast<std::size_t>(h_) * f_;
  double* gw2 = gb1 + h_;
  double* gb2 = gw2 + static_cast<std::size_t>(c_) * h_;

  std::vector<double> dz2(static_cast<std::size_t>(c_));
  for (int c = 0; c < c_; ++c) {
    dz2[c] = probs[static_cast<std::size_t>(c)] - (c == y ? 1.0 : 0.0);
  }
  std::vector<double> da1(static_cast<std::size_t>(h_), 0.0);
  for (int c = 0; c < c_; ++c) {
    kernels::axpy(weight * dz2[static_cast<std::size_t>(c)], a1.data(),
                  gw2 + static_cast<std::size_t>(c) * h_, a1.size());
    gb2[c] += weight * dz2[static_cast<std::size_t>(c)];
    kernels::axpy(dz2[static_cast<std::size_t>(c)], w2 + static_cast<std::size_t>(c) * h_,
                  da1.data(), da1.size());
  }
  for (int i = 0; i < h_; ++i) {
    double dz1 = da1[static_cast<std::size_t>(i)] * (1.0 - a1[static_cast<std::size_t>(i)] *
                                                               a1[static_cast<std::size_t>(i)]);
    kernels::axpy(weight * dz1, x.data(), gw1 + static_cast<std::size_t>(i) * f_, x.size());
    gb1[i] += weight * dz1;
  }
}

int MlpModel::predict(std::span<const double> params, std::span<const double> x) const {
  return argmax(forward_probs(params, x, nullptr));
}

std::vector<double> MlpModel::predict_proba(std::span<const double> params,
                                            std::span<const double> x) const {
  return forward_probs(params, x, nullptr);
}

ParamVec MlpModel::init_params(std::uint64_t seed) const {
  ParamVec p(dim(), 0.0);
  StreamRng rng(seed, rng_domain::stream(rng_domain::kInit, 0), 0);
  double r1 = 1.0 / std::sqrt(static_cast<double>(f_));
  for (std::size_t i = 0; i < static_cast<std::size_t>(h_) * f_; ++i) {
    p[i] = (2.0 * rng.next_unit() - 1.0) * r1;
  }
  double r2 = 1.0 / std::sqrt(static_cast<double>(h_));
  std::size_t w2_begin = static_cast<std::size_t>(h_) * f_ + h_;
  for (std::size_t i = 0; i < static_cast<std::size_t>(c_) * h_; ++i) {
    p[w2_begin + i] = (2.0 * rng.next_unit() - 1.0) * r2;
  }
  return p;
}

// ---------------------------------------------------------------- gradients

ParamVec full_gradient(const LossModel& model, std::span<const double> params,
                       const DeviceDataset& data) {
  if (data.rows() == 0) throw ConfigError("full_gradient: empty dataset");
  check_dims(params.size(), model.dim(), "full_gradient");
  ParamVec g(model.dim(), 0.0);
  double w = 1.0 / static_cast<double>(data.rows());
  for (std::size_t j = 0; j < data.rows(); ++j) {
    model.add_sample_gradient(params, data, static_cast<int>(j), w, g);
  }
  return g;
}

GradSample stoch_gradient(const LossModel& model, std::span<const double> params,
                          const DeviceDataset& data, std::span<const int> batch) {
  if (batch.empty()) throw ConfigError("stoch_gradient: empty batch");
  check_dims(params.size(), model.dim(), "stoch_gradient");
  for (int j : batch) {
    if (j < 0 || static_cast<std::size_t>(j) >= data.rows()) {
      throw ConfigError("stoch_gradient: batch index " + std::to_string(j) +
                        " out of range for dataset with " + std::to_string(data.rows()) +
                        " rows");
    }
  }
  GradSample out;
  out.gradient.assign(model.dim(), 0.0);
  out.batch_ids.assign(batch.begin(), batch.end());
  out.device_id = data.device_id;
  double w = 1.0 / static_cast<double>(batch.size());
  for (int j : batch) {
    model.add_sample_gradient(params, data, j, w, out.gradient);
  }
  return out;
}

void sgd_step(ParamVec& params, const ParamVec& grad, double eta, ParamVec* momentum_state,
              double mu) {
  if (!(eta > 0.0)) throw ConfigError("sgd_step: learning rate must be positive");
  if (mu < 0.0 || mu >= 1.0) throw ConfigError("sgd_step: momentum must be in [0, 1)");
  if (grad.size() != params.size()) throw ConfigError("sgd_step: dimension mismatch");
  if (mu == 0.0) {
    kernels::axpy(-eta, grad.data(), params.data(), params.size());
    return;
  }
  if (momentum_state == nullptr) throw ConfigError("sgd_step: momentum requires a buffer");
  if (momentum_state->empty()) momentum_state->assign(params.size(), 0.0);
  if (momentum_state->size() != params.size()) throw ConfigError("sgd_step: bad momentum buffer");
  kernels::aypx(mu, grad.data(), momentum_state->data(), params.size());
  kernels::axpy(-eta, momentum_state->data(), params.data(), params.size());
}

}  // namespace cfel
