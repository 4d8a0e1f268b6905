#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cfel/loss.hpp"
#include "cfel/rng.hpp"
#include "testutil.hpp"

using namespace cfel;
using namespace cfel::testutil;

TEST_CASE("quadratic gradient at the minimizer is zero") {
  QuadraticModel model(2);
  auto data = dataset_from_rows({{1.0, 0.0}}, {0});
  ParamVec at_min{1.0, 0.0};
  auto g = full_gradient(model, at_min, data);
  CHECK(g == ParamVec{0.0, 0.0});
}

TEST_CASE("quadratic gradient is x - b") {
  QuadraticModel model(2);
  auto data = dataset_from_rows({{1.0, 0.0}}, {0});
  auto g = full_gradient(model, ParamVec{0.0, 0.0}, data);
  CHECK(g == ParamVec{-1.0, 0.0});
}

TEST_CASE("logistic gradient matches central finite differences at zero") {
  LogisticModel model(4, 3);
  auto data = random_labeled_data(20, 4, 3, 101);
  ParamVec zero(model.dim(), 0.0);
  auto analytic = full_gradient(model, zero, data);
  auto fd = fd_gradient(model, zero, data, 1e-5);
  CHECK(max_rel_err(analytic, fd) < 1e-6);
}

TEST_CASE("analytic gradients match finite differences across all model kinds") {
  // >= 50 random (params, data) pairs, 1e-5 relative on active components.
  int checked = 0;
  for (std::uint64_t trial = 0; trial < 18; ++trial) {
    {
      QuadraticModel model(5);
      auto data = random_labeled_data(6, 5, 1, 300 + trial);
      auto params = random_params(model.dim(), 900 + trial);
      CHECK(max_rel_err(full_gradient(model, params, data), fd_gradient(model, params, data)) <
            1e-5);
      ++checked;
    }
    {
      LogisticModel model(3, 4);
      auto data = random_labeled_data(8, 3, 4, 400 + trial);
      auto params = random_params(model.dim(), 1900 + trial, 0.5);
      CHECK(max_rel_err(full_gradient(model, params, data), fd_gradient(model, params, data)) <
            1e-5);
      ++checked;
    }
    {
      MlpModel model(3, 4, 3);
      auto data = random_labeled_data(7, 3, 3, 500 + trial);
      auto params = random_params(model.dim(), 2900 + trial, 0.4);
      CHECK(max_rel_err(full_gradient(model, params, data), fd_gradient(model, params, data)) <
            1e-5);
      ++checked;
    }
  }
  CHECK(checked >= 50);
}

TEST_CASE("quadratic smoothness constant is exact") {
  QuadraticModel model(3, {1.0, 2.5, 0.5});
  REQUIRE(model.lipschitz().has_value());
  double lip = *model.lipschitz();
  CHECK(lip == 2.5);
  auto data = random_labeled_data(4, 3, 1, 77);
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    auto x = random_params(3, 3000 + trial, 2.0);
    auto y = random_params(3, 4000 + trial, 2.0);
    auto gx = full_gradient(model, x, data);
    auto gy = full_gradient(model, y, data);
    double num = 0.0, den = 0.0;
    for (int c = 0; c < 3; ++c) {
      num += (gx[c] - gy[c]) * (gx[c] - gy[c]);
      den += (x[c] - y[c]) * (x[c] - y[c]);
    }
    CHECK(std::sqrt(num) <= lip * std::sqrt(den) * (1.0 + 1e-12));
  }
}

TEST_CASE("stochastic gradient over the full batch equals the full gradient") {
  LogisticModel model(3, 3);
  auto data = random_labeled_data(9, 3, 3, 55);
  auto params = random_params(model.dim(), 56, 0.3);
  std::vector<int> all(data.rows());
  std::iota(all.begin(), all.end(), 0);
  auto s = stoch_gradient(model, params, data, all);
  auto f = full_gradient(model, params, data);
  CHECK(s.gradient == f);
  CHECK(s.batch_ids == all);
}

TEST_CASE("singleton batch on per-sample quadratic targets gives x - b_j") {
  QuadraticModel model(2);
  auto data = dataset_from_rows({{1.0, 2.0}, {3.0, -1.0}}, {0, 0});
  ParamVec x{0.5, 0.5};
  std::vector<int> batch{0};
  auto g = stoch_gradient(model, x, data, batch).gradient;
  CHECK(g == ParamVec{-0.5, -1.5});
}

TEST_CASE("expectation over all singleton batches equals the full gradient") {
  LogisticModel model(3, 3);
  auto data = random_labeled_data(11, 3, 3, 66);
  auto params = random_params(model.dim(), 67, 0.4);
  ParamVec mean(model.dim(), 0.0);
  for (int j = 0; j < static_cast<int>(data.rows()); ++j) {
    std::vector<int> batch{j};
    auto g = stoch_gradient(model, params, data, batch).gradient;
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += g[c] / static_cast<double>(data.rows());
  }
  CHECK(max_abs_err(mean, full_gradient(model, params, data)) < 1e-12);
}

TEST_CASE("disjoint batches of one epoch average to the full gradient") {
  MlpModel model(3, 3, 3);
  auto data = random_labeled_data(12, 3, 3, 88);
  auto params = random_params(model.dim(), 89, 0.4);
  ParamVec mean(model.dim(), 0.0);
  const int batch_size = 4;
  for (int at = 0; at < 12; at += batch_size) {
    std::vector<int> batch(batch_size);
    std::iota(batch.begin(), batch.end(), at);
    auto g = stoch_gradient(model, params, data, batch).gradient;
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += g[c] * batch_size / 12.0;
  }
  CHECK(max_abs_err(mean, full_gradient(model, params, data)) < 1e-12);
}

TEST_CASE("sgd_step arithmetic") {
  ParamVec x{1.0, 1.0};
  sgd_step(x, ParamVec{1.0, 0.0}, 0.5, nullptr, 0.0);
  CHECK(x == ParamVec{0.5, 1.0});

  sgd_step(x, ParamVec{0.0, 0.0}, 0.5, nullptr, 0.0);
  CHECK(x == ParamVec{0.5, 1.0});  // zero gradient is a fixed point
}

TEST_CASE("classical momentum matches the hand-unrolled recurrence") {
  // x0=(1,1), constant g=(1,0), eta=0.5, mu=0.9:
  //   v1=g, x1=(0.5,1); v2=1.9g, x2=(0.5-0.95,1)=(-0.45,1).
  ParamVec x{1.0, 1.0};
  ParamVec v;
  ParamVec g{1.0, 0.0};
  sgd_step(x, g, 0.5, &v, 0.9);
  CHECK(x[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-15));
  sgd_step(x, g, 0.5, &v, 0.9);
  CHECK(x[0] == doctest::Approx(-0.45).epsilon(1e-12));
  CHECK(x[1] == 1.0);
  CHECK(v[0] == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("sgd_step preconditions") {
  ParamVec x{1.0};
  CHECK_THROWS_AS(sgd_step(x, ParamVec{1.0}, 0.0, nullptr, 0.0), ConfigError);
  CHECK_THROWS_AS(sgd_step(x, ParamVec{1.0}, 0.1, nullptr, 1.0), ConfigError);
  CHECK_THROWS_AS(sgd_step(x, ParamVec{1.0, 2.0}, 0.1, nullptr, 0.0), ConfigError);
}

TEST_CASE("classifier outputs stay on the probability simplex") {
  LogisticModel logistic(4, 5);
  MlpModel mlp(4, 6, 5);
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    auto x = random_params(4, 7000 + trial, 3.0);
    for (const LossModel* model : {static_cast<const LossModel*>(&logistic),
                                   static_cast<const LossModel*>(&mlp)}) {
      auto params = random_params(model->dim(), 8000 + trial, 2.0);
      auto probs = model->predict_proba(params, x);
      REQUIRE(probs.size() == 5);
      double sum = 0.0;
      for (double p : probs) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("mlp initializer is seeded and bounded by 1/sqrt(fan_in)") {
  MlpModel model(9, 4, 3);
  auto p1 = model.init_params(123);
  auto p2 = model.init_params(123);
  auto p3 = model.init_params(124);
  CHECK(p1 == p2);
  CHECK(p1 != p3);
  double r1 = 1.0 / 3.0;  // fan_in 9
  for (std::size_t i = 0; i < 9u * 4u; ++i) CHECK(std::fabs(p1[i]) <= r1);
  // Hidden-layer biases start at zero.
  for (std::size_t i = 9u * 4u; i < 9u * 4u + 4u; ++i) CHECK(p1[i] == 0.0);
}

TEST_CASE("gradient error paths") {
  QuadraticModel model(2);
  auto data = dataset_from_rows({{1.0, 0.0}}, {0});
  DeviceDataset empty;
  empty.feature_dim = 2;
  CHECK_THROWS_AS(full_gradient(model, ParamVec{0.0, 0.0}, empty), ConfigError);
  CHECK_THROWS_AS(full_gradient(model, ParamVec{0.0}, data), ConfigError);
  std::vector<int> bad{5};
  CHECK_THROWS_AS(stoch_gradient(model, ParamVec{0.0, 0.0}, data, bad), ConfigError);
}

TEST_CASE("mean loss and accuracy") {
  LogisticModel model(2, 2);
  auto data = dataset_from_rows({{5.0, 0.0}, {-5.0, 0.0}}, {1, 0});
  // Weights that push class 1 for positive x0.
  ParamVec params(model.dim(), 0.0);
  params[0] = -1.0;  // class 0 weight on feature 0
  params[2] = 1.0;   // class 1 weight on feature 0
  CHECK(model.accuracy(params, data) == 1.0);
  CHECK(model.mean_loss(params, data) < 0.01);
}
