#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisy_distill/numerics.hpp"
#include "noisy_distill/targets.hpp"

namespace noisy_distill {

enum class Activation { kRelu };

// Multi-label MLP: rectifier hidden layers, linear output layer producing one
// logit per label. All parameters live in one flat vector laid out layer by
// layer as [weights (out x in, row-major), bias (out)].
class MLPClassifier {
 public:
  MLPClassifier() = default;
  // All parameters zero. Needs at least an input and an output dimension.
  explicit MLPClassifier(std::vector<std::size_t> layer_dims,
                         Activation activation = Activation::kRelu);

  // Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MLPClassifier random(std::vector<std::size_t> layer_dims, std::uint64_t seed);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t layer_count() const noexcept { return dims_.size() - 1; }
  Activation activation() const noexcept { return activation_; }

  ConstMatrixView weights(std::size_t layer) const;
  MatrixView weights(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);

  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }

  Vector forward(std::span<const double> x) const;
  // Row-wise logits for a batch.
  Matrix forward(const Matrix& x) const;

  // Mean over rows of bce_loss(target_i, forward(x_i)). When grad is non-null
  // it receives the gradient with respect to params().
  double loss_and_gradient(const Matrix& x, const Matrix& targets, Vector* grad) const;

  bool operator==(const MLPClassifier&) const = default;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + dims_[layer + 1] * dims_[layer];
  }

  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  Activation activation_ = Activation::kRelu;
  Vector params_;
};

// sigmoid(forward(x) / T). Throws ParameterError for T <= 0.
Vector soft_predict(const MLPClassifier& model, std::span<const double> x, double temperature);
Matrix soft_predict(const MLPClassifier& model, const Matrix& x, double temperature);

nlohmann::json to_json(const MLPClassifier& model);
MLPClassifier model_from_json(const nlohmann::json& doc);
void save_model(const MLPClassifier& model, const std::string& path);
MLPClassifier load_model(const std::string& path);

struct TrainConfig {
  std::size_t epochs = 250;
  double initial_lr = 1e-3;
  double lr_decay = 0.9;
  std::size_t decay_every = 5;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool early_stop = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Learning rate in effect during a 1-based epoch.
  double learning_rate(std::size_t epoch) const;
};

// Entry e of each series describes the model after e epochs; entry 0 is the
// initialization, evaluated before any update.
struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> dev_map;
  std::size_t best_epoch = 0;
};

// Held-out data used for checkpoint selection.
struct EvalSet {
  const Matrix& x;
  const Matrix& truth;
};

struct TrainResult {
  MLPClassifier model;
  TrainHistory history;
};

// Mini-batch Adam on bce_loss(target, forward(x)). Initialization and batch
// shuffling draw from independent streams derived from cfg.seed, so
// train(dims, ...) == finetune(MLPClassifier::random(dims, cfg.seed), ...).
// With a dev set and cfg.early_stop the best-dev-mAP checkpoint is returned.
TrainResult train(const std::vector<std::size_t>& layer_dims, const Matrix& x,
                  TargetProvider& targets, std::optional<EvalSet> dev, const TrainConfig& cfg);

TrainResult finetune(const MLPClassifier& init, const Matrix& x, TargetProvider& targets,
                     std::optional<EvalSet> dev, const TrainConfig& cfg);

}  // namespace noisy_distill
