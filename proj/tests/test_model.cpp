#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "noisy_distill/errors.hpp"
#include "noisy_distill/metrics.hpp"
#include "noisy_distill/model.hpp"
#include "test_support.hpp"

using namespace noisy_distill;

namespace {

// Two well-separated blobs, one label each.
void toy_problem(Matrix& x, Matrix& y, std::uint64_t seed, std::size_t n = 20) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  x = Matrix(n, 2);
  y = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const bool first = i % 2 == 0;
    x(i, 0) = (first ? 2.0 : -2.0) + g(rng);
    x(i, 1) = (first ? -1.0 : 1.0) + g(rng);
    y(i, first ? 0 : 1) = 1.0;
  }
}

}  // namespace

TEST_CASE("a zero-weight model outputs its biases") {
  MLPClassifier model({3, 4, 2});
  auto b = model.bias(1);
  b[0] = 0.25;
  b[1] = -1.5;
  const Vector logits = model.forward(Vector{1.0, -2.0, 3.0});
  CHECK(logits == Vector{0.25, -1.5});
}

TEST_CASE("a single linear layer computes Wx + b") {
  MLPClassifier model({2, 2});
  auto w = model.weights(0);
  w(0, 0) = 1.0;
  w(0, 1) = 2.0;
  w(1, 0) = -1.0;
  w(1, 1) = 0.5;
  model.bias(0)[1] = 3.0;
  // [1 2; -1 0.5] [3, 4] + [0, 3] = [11, 2]
  CHECK(model.forward(Vector{3.0, 4.0}) == Vector{11.0, 2.0});
}

TEST_CASE("hidden layers apply the rectifier") {
  MLPClassifier model({1, 1, 1});
  model.weights(0)(0, 0) = 1.0;
  model.weights(1)(0, 0) = 2.0;
  model.bias(1)[0] = 0.5;
  CHECK(model.forward(Vector{3.0})[0] == 6.5);
  CHECK(model.forward(Vector{-3.0})[0] == 0.5);
}

TEST_CASE("batch forward equals row-by-row forward") {
  const auto model = MLPClassifier::random({4, 8, 3}, 7);
  std::mt19937_64 rng(1);
  Matrix x = test_support::random_matrix(5, 4, rng);
  for (std::size_t j = 0; j < 4; ++j) x(4, j) = x(3, j);
  const Matrix batch = model.forward(x);
  for (std::size_t i = 0; i < 5; ++i) {
    const Vector single = model.forward(x.row(i));
    for (std::size_t j = 0; j < 3; ++j) CHECK(batch(i, j) == single[j]);
  }
  CHECK(batch(3, 0) == batch(4, 0));
  CHECK_THROWS_AS(model.forward(Vector{1.0, 2.0}), DimensionError);
}

TEST_CASE("random initialization stays within the fan-in bound and is seeded") {
  const auto a = MLPClassifier::random({10, 6, 3}, 42);
  const auto b = MLPClassifier::random({10, 6, 3}, 42);
  const auto c = MLPClassifier::random({10, 6, 3}, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.param_count() == 10 * 6 + 6 + 6 * 3 + 3);
  const auto w0 = a.weights(0);
  for (std::size_t i = 0; i < w0.rows * w0.cols; ++i) {
    CHECK(std::abs(w0.data[i]) <= 1.0 / std::sqrt(10.0));
  }
}

TEST_CASE("soft_predict applies the temperature") {
  MLPClassifier model({1, 2});
  model.bias(0)[0] = 2.0;
  model.bias(0)[1] = -2.0;
  const Vector x{0.0};
  const Vector t1 = soft_predict(model, x, 1.0);
  CHECK(t1[0] == doctest::Approx(sigmoid(2.0)));
  const Vector t2 = soft_predict(model, x, 2.0);
  CHECK(t2[0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(t2[1] == doctest::Approx(0.2689).epsilon(1e-4));
  const Vector hot = soft_predict(model, x, 1e6);
  CHECK(std::abs(hot[0] - 0.5) < 1e-5);
  CHECK(std::abs(hot[1] - 0.5) < 1e-5);
  CHECK_THROWS_AS(soft_predict(model, x, 0.0), ParameterError);
  CHECK_THROWS_AS(soft_predict(model, x, -1.0), ParameterError);

  MLPClassifier zero({3, 2});
  const Vector half = soft_predict(zero, Vector{1, 2, 3}, 1.0);
  CHECK(half == Vector{0.5, 0.5});
}

TEST_CASE("loss gradient matches central differences on random MLPs") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> width(1, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = width(rng), h = width(rng), L = width(rng), n = 1 + trial % 5;
    std::vector<std::size_t> dims{d, h};
    if (trial % 2) dims.push_back(width(rng));
    dims.push_back(L);
    auto model = MLPClassifier::random(dims, 1000 + trial);
    const Matrix x = test_support::random_matrix(n, d, rng, -2.0, 2.0);
    const Matrix t = test_support::random_matrix(n, L, rng, 0.0, 1.0);
    Vector grad;
    model.loss_and_gradient(x, t, &grad);
    const Vector base(model.params().begin(), model.params().end());
    auto loss = [&](std::span<const double> p) {
      std::copy(p.begin(), p.end(), model.params().begin());
      return model.loss_and_gradient(x, t, nullptr);
    };
    const auto check = grad_check(loss, base, grad);
    CHECK(check.max_relative_error < 1e-5);
  }
}

TEST_CASE("loss is the mean per-row bce") {
  const auto model = MLPClassifier::random({3, 4, 2}, 5);
  std::mt19937_64 rng(2);
  const Matrix x = test_support::random_matrix(4, 3, rng);
  const Matrix t = test_support::random_binary(4, 2, rng);
  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i) expect += bce_loss(t.row(i), model.forward(x.row(i)));
  CHECK(model.loss_and_gradient(x, t, nullptr) == doctest::Approx(expect / 4).epsilon(1e-13));
  CHECK_THROWS_AS(model.loss_and_gradient(x, Matrix(4, 3), nullptr), DimensionError);
  CHECK_THROWS_AS(model.loss_and_gradient(Matrix(0, 3), Matrix(0, 2), nullptr), DataError);
}

TEST_CASE("learning-rate schedule decays every decay_every epochs") {
  TrainConfig cfg;
  CHECK(cfg.learning_rate(1) == doctest::Approx(1e-3));
  CHECK(cfg.learning_rate(5) == doctest::Approx(1e-3));
  CHECK(cfg.learning_rate(6) == doctest::Approx(9e-4));
  CHECK(cfg.learning_rate(11) == doctest::Approx(8.1e-4));
  CHECK(cfg.learning_rate(250) == doctest::Approx(1e-3 * std::pow(0.9, 49)));
}

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.lr_decay = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.lr_decay = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("training separates a toy problem") {
  Matrix x, y;
  toy_problem(x, y, 3);
  StaticTargets targets(y);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.initial_lr = 1e-2;
  cfg.batch_size = 8;
  const auto result = train({2, 8, 2}, x, targets, EvalSet{x, y}, cfg);
  CHECK(mean_average_precision(result.model.forward(x), y) == 1.0);
}

TEST_CASE("training history and checkpoint semantics") {
  Matrix x, y, dx, dy;
  toy_problem(x, y, 4, 40);
  toy_problem(dx, dy, 5, 20);
  // Noisy targets make the dev curve non-monotone.
  for (std::size_t i = 0; i < 40; i += 3) std::swap(y(i, 0), y(i, 1));
  StaticTargets targets(y);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 5;
  cfg.seed = 9;
  const auto r = train({2, 4, 2}, x, targets, EvalSet{dx, dy}, cfg);
  CHECK(r.history.train_loss.size() == cfg.epochs + 1);
  CHECK(r.history.dev_map.size() == cfg.epochs + 1);
  const auto best = std::max_element(r.history.dev_map.begin(), r.history.dev_map.end());
  CHECK(r.history.best_epoch == static_cast<std::size_t>(best - r.history.dev_map.begin()));
  CHECK(mean_average_precision(r.model.forward(dx), dy) == *best);

  const auto again = train({2, 4, 2}, x, targets, EvalSet{dx, dy}, cfg);
  CHECK(again.model == r.model);
  CHECK(again.history.train_loss == r.history.train_loss);
}

TEST_CASE("train equals finetune from the seeded random initialization") {
  Matrix x, y;
  toy_problem(x, y, 6, 30);
  StaticTargets targets(y);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 7;
  cfg.seed = 31;
  const auto a = train({2, 5, 2}, x, targets, EvalSet{x, y}, cfg);
  const auto b = finetune(MLPClassifier::random({2, 5, 2}, 31), x, targets, EvalSet{x, y}, cfg);
  CHECK(a.model == b.model);
  CHECK(a.history.dev_map == b.history.dev_map);
}

TEST_CASE("finetune with zero epochs returns the initialization") {
  Matrix x, y;
  toy_problem(x, y, 7);
  StaticTargets targets(y);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto init = MLPClassifier::random({2, 3, 2}, 1);
  CHECK(finetune(init, x, targets, std::nullopt, cfg).model == init);
}

TEST_CASE("finetuning cannot lose dev mAP when epoch 0 is a candidate checkpoint") {
  Matrix x, y, dx, dy;
  toy_problem(x, y, 8, 40);
  toy_problem(dx, dy, 9, 20);
  StaticTargets targets(y);
  TrainConfig cfg;
  cfg.epochs = 8;
  const auto base = train({2, 6, 2}, x, targets, EvalSet{dx, dy}, cfg).model;
  const double before = mean_average_precision(base.forward(dx), dy);
  cfg.seed = 3;
  const auto tuned = finetune(base, x, targets, EvalSet{dx, dy}, cfg).model;
  CHECK(mean_average_precision(tuned.forward(dx), dy) >= before - 1e-12);
}

TEST_CASE("train rejects empty data and mismatched targets") {
  TrainConfig cfg;
  cfg.epochs = 1;
  StaticTargets none(Matrix(0, 2));
  CHECK_THROWS_AS(train({2, 2}, Matrix(0, 2), none, std::nullopt, cfg), DataError);
  StaticTargets wrong(Matrix(3, 5));
  CHECK_THROWS_AS(train({2, 2}, Matrix(3, 2), wrong, std::nullopt, cfg), DimensionError);
}

TEST_CASE("model JSON round trip is exact") {
  const auto model = MLPClassifier::random({5, 7, 3}, 12);
  const auto doc = to_json(model);
  CHECK(doc.at("activation") == "relu");
  CHECK(doc.at("layer_dims") == nlohmann::json({5, 7, 3}));
  const auto back = model_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back == model);
  auto broken = doc;
  broken["biases"][0] = nlohmann::json::array({1.0});
  CHECK_THROWS(model_from_json(broken));
}
