#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "amr/lstm.hpp"
#include "amr/metrics.hpp"
#include "amr/models.hpp"
#include "test_util.hpp"

using namespace amr;
using amr::test::throws_code;

namespace {

FeatureMatrix toy(std::size_t n, std::size_t p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  FeatureMatrix X(n, p);
  for (std::size_t r = 0; r < n; ++r) {
    double y = 40.0;
    for (std::size_t c = 0; c < p; ++c) {
      X(r, c) = z(rng) * 10.0 + 30.0;
      y += (c == 0 ? 0.8 : 0.1) * (X(r, c) - 30.0);
    }
    X.target()[r] = std::clamp(y + z(rng), 0.0, 100.0);
  }
  return X;
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max(std::abs(a) + std::abs(n), 1e-8); }

}  // namespace

TEST_CASE("backpropagated gradient matches central finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const lstm::Layout L{3, 4};
    std::mt19937_64 rng(seed * 7919);
    std::normal_distribution<double> z(0.0, 1.0);
    auto theta = lstm::init_theta(L, seed);
    // Larger weights than the initialiser produces so every gate is exercised away from zero.
    for (auto& t : theta) t *= 3.0;
    std::vector<double> xs(5 * L.input), ys(5);
    for (auto& v : xs) v = z(rng);
    for (auto& v : ys) v = z(rng);

    std::vector<double> grad;
    lstm::loss_and_gradient(L, theta, xs, ys, grad);
    REQUIRE(grad.size() == L.size());

    const double eps = 1e-5;
    std::size_t bad = 0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      auto tp = theta;
      auto tm = theta;
      tp[k] += eps;
      tm[k] -= eps;
      const double num = (lstm::loss(L, tp, xs, ys) - lstm::loss(L, tm, xs, ys)) / (2.0 * eps);
      if (rel_err(grad[k], num) >= 1e-4) {
        ++bad;
        MESSAGE("seed " << seed << " param " << k << ": analytic " << grad[k] << " numeric " << num);
      }
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("loss_and_gradient reports the same loss as loss") {
  const lstm::Layout L{2, 3};
  const auto theta = lstm::init_theta(L, 5);
  const std::vector<double> xs{0.1, -0.3, 1.2, 0.4};
  const std::vector<double> ys{0.5, -1.0};
  std::vector<double> grad;
  CHECK(lstm::loss_and_gradient(L, theta, xs, ys, grad) == lstm::loss(L, theta, xs, ys));
}

TEST_CASE("parameter layout offsets") {
  const lstm::Layout L{8, 32};
  CHECK(L.wh() == 4 * 32 * 8);
  CHECK(L.bias() == L.wh() + 4 * 32 * 32);
  CHECK(L.w_out() == L.bias() + 128);
  CHECK(L.size() == L.w_out() + 33);
  const auto theta = lstm::init_theta(L, 1);
  const double bound = 1.0 / std::sqrt(32.0);
  CHECK(theta.size() == L.size());
  for (double t : theta) CHECK(std::abs(t) <= bound);
}

TEST_CASE("zero epochs returns the seeded initial network deterministically") {
  const auto train = toy(64, 4, 1);
  const auto val = toy(16, 4, 2);
  LstmSpec spec;
  spec.max_epochs = 0;
  const auto a = train_lstm(train, val, spec);
  const auto b = train_lstm(train, val, spec);
  CHECK(a.meta().epochs_run == 0);
  CHECK(a.meta().val_mae_trace.empty());
  const auto& p = std::get<LstmParams>(a.params());
  CHECK(p.theta == lstm::init_theta({4, spec.hidden_size}, spec.seed));
  CHECK(a.predict(val) == b.predict(val));
}

TEST_CASE("training is deterministic and keeps the best validation weights") {
  const auto train = toy(256, 4, 3);
  const auto val = toy(64, 4, 4);
  LstmSpec spec;
  spec.hidden_size = 8;
  spec.learning_rate = 0.01;
  spec.max_epochs = 40;
  spec.patience = 5;
  const auto a = train_lstm(train, val, spec);
  const auto b = train_lstm(train, val, spec);
  CHECK(std::get<LstmParams>(a.params()).theta == std::get<LstmParams>(b.params()).theta);

  const auto& trace = a.meta().val_mae_trace;
  REQUIRE_FALSE(trace.empty());
  CHECK(a.meta().epochs_run == trace.size());
  CHECK(a.meta().epochs_run <= spec.max_epochs);
  CHECK(a.meta().train_mae_trace.size() == trace.size());

  LstmSpec init_spec = spec;
  init_spec.max_epochs = 0;
  const double initial = mae(val.target(), train_lstm(train, val, init_spec).predict(val));
  const double final_mae = mae(val.target(), a.predict(val));
  CHECK(final_mae <= initial);
  const double best = std::min(initial, *std::min_element(trace.begin(), trace.end()));
  CHECK(final_mae <= best + 1e-4);

  // It learns something on an almost linear target.
  CHECK(final_mae < initial);
}

TEST_CASE("early stopping halts after patience epochs without improvement") {
  const auto train = toy(128, 3, 5);
  const auto val = toy(32, 3, 6);
  LstmSpec spec;
  spec.hidden_size = 4;
  spec.learning_rate = 1e-9;  // effectively frozen, so validation never improves
  spec.patience = 3;
  spec.max_epochs = 100;
  const auto m = train_lstm(train, val, spec);
  CHECK(m.meta().epochs_run == 3);
}

TEST_CASE("non-finite inputs raise NonFiniteLoss") {
  auto train = toy(32, 3, 7);
  train(5, 1) = std::numeric_limits<double>::infinity();
  LstmSpec spec;
  spec.max_epochs = 5;
  CHECK(throws_code([&] { train_lstm(train, FeatureMatrix(0, 3), spec); }, ErrorCode::NonFiniteLoss));
}

TEST_CASE("spec validation and shape errors") {
  const auto train = toy(8, 2, 8);
  LstmSpec s;
  s.hidden_size = 0;
  CHECK(throws_code([&] { train_lstm(train, train, s); }, ErrorCode::InvalidSpec));
  s = LstmSpec{};
  s.learning_rate = 0.0;
  CHECK(throws_code([&] { train_lstm(train, train, s); }, ErrorCode::InvalidSpec));
  CHECK(throws_code([&] { train_lstm(FeatureMatrix(0, 2), train, LstmSpec{}); }, ErrorCode::EmptyTraining));
  CHECK(throws_code([&] { train_lstm(train, toy(4, 3, 9), LstmSpec{}); }, ErrorCode::ColumnMismatch));
}

TEST_CASE("predictions stay within [0, 100] even far outside the training range") {
  const auto train = toy(64, 2, 10);
  LstmSpec spec;
  spec.max_epochs = 3;
  const auto m = train_lstm(train, FeatureMatrix(0, 2), spec);
  FeatureMatrix far(2, 2);
  far(0, 0) = 1e6;
  far(1, 0) = -1e6;
  for (double v : m.predict(far)) {
    CHECK(v >= 0.0);
    CHECK(v <= 100.0);
  }
}
