#include "noisy_distill/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "noisy_distill/errors.hpp"
#include "noisy_distill/kernels.hpp"
#include "noisy_distill/metrics.hpp"

namespace noisy_distill {

namespace {

constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
  }
  return "relu";
}

}  // namespace

MLPClassifier::MLPClassifier(std::vector<std::size_t> layer_dims, Activation activation)
    : dims_(std::move(layer_dims)), activation_(activation) {
  if (dims_.size() < 2) throw DimensionError("MLPClassifier needs input and output dimensions");
  if (std::any_of(dims_.begin(), dims_.end(), [](std::size_t d) { return d == 0; })) {
    throw DimensionError("MLPClassifier layer dimensions must be positive");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
}

MLPClassifier MLPClassifier::random(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  MLPClassifier model(std::move(layer_dims));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(model.dims_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t begin = model.offsets_[l];
    const std::size_t end = begin + model.dims_[l + 1] * (model.dims_[l] + 1);
    for (std::size_t i = begin; i < end; ++i) model.params_[i] = dist(rng);
  }
  return model;
}

ConstMatrixView MLPClassifier::weights(std::size_t layer) const {
  return {params_.data() + weight_offset(layer), dims_[layer + 1], dims_[layer]};
}

MatrixView MLPClassifier::weights(std::size_t layer) {
  return {params_.data() + weight_offset(layer), dims_[layer + 1], dims_[layer]};
}

std::span<const double> MLPClassifier::bias(std::size_t layer) const {
  return {params_.data() + bias_offset(layer), dims_[layer + 1]};
}

std::span<double> MLPClassifier::bias(std::size_t layer) {
  return {params_.data() + bias_offset(layer), dims_[layer + 1]};
}

Vector MLPClassifier::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.size()) +
                         " features, model expects " + std::to_string(input_dim()));
  }
  Matrix batch(1, x.size());
  std::copy(x.begin(), x.end(), batch.row(0).begin());
  const Matrix logits = forward(batch);
  return {logits.data().begin(), logits.data().end()};
}

Matrix MLPClassifier::forward(const Matrix& x) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                         " features, model expects " + std::to_string(input_dim()));
  }
  Matrix current = x;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    Matrix next(x.rows(), dims_[l + 1]);
    kernels::omp::gemm_nt(current, weights(l), bias(l), next.view());
    if (l + 1 < layer_count()) {
      for (double& v : next.data()) v = std::max(v, 0.0);
    }
    current = std::move(next);
  }
  return current;
}

double MLPClassifier::loss_and_gradient(const Matrix& x, const Matrix& targets,
                                        Vector* grad) const {
  if (x.rows() != targets.rows()) throw DimensionError("loss_and_gradient: row count mismatch");
  if (targets.cols() != output_dim()) {
    throw DimensionError("loss_and_gradient: target length " + std::to_string(targets.cols()) +
                         " differs from label count " + std::to_string(output_dim()));
  }
  if (x.cols() != input_dim()) throw DimensionError("loss_and_gradient: feature length mismatch");
  const std::size_t n = x.rows();
  if (n == 0) throw DataError("loss_and_gradient: empty batch");

  // activations[l] is the input of layer l; activations.back() holds logits.
  std::vector<Matrix> activations;
  activations.reserve(layer_count() + 1);
  activations.push_back(x);
  for (std::size_t l = 0; l < layer_count(); ++l) {
    Matrix next(n, dims_[l + 1]);
    kernels::omp::gemm_nt(activations.back(), weights(l), bias(l), next.view());
    if (l + 1 < layer_count()) {
      for (double& v : next.data()) v = std::max(v, 0.0);
    }
    activations.push_back(std::move(next));
  }

  const Matrix& logits = activations.back();
  Vector per_sample(n);
  for (std::size_t i = 0; i < n; ++i) per_sample[i] = bce_loss(targets.row(i), logits.row(i));
  const double loss = kernels::omp::sum(per_sample) / static_cast<double>(n);
  if (grad == nullptr) return loss;

  grad->assign(params_.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(n);
  Matrix delta(n, output_dim());
  for (std::size_t i = 0; i < n; ++i) {
    bce_grad(targets.row(i), logits.row(i), delta.row(i));
    for (double& d : delta.row(i)) d *= scale;
  }

  for (std::size_t l = layer_count(); l-- > 0;) {
    MatrixView dw{grad->data() + weight_offset(l), dims_[l + 1], dims_[l]};
    kernels::omp::gemm_tn(delta, activations[l], dw);
    kernels::omp::column_sums(delta, {grad->data() + bias_offset(l), dims_[l + 1]});
    if (l == 0) break;
    Matrix upstream(n, dims_[l]);
    kernels::omp::gemm_nn(delta, weights(l), upstream.view());
    // Rectifier derivative: activations[l] is the post-ReLU output of layer l-1.
    const auto& post = activations[l].data();
    auto up = upstream.data();
    for (std::size_t i = 0; i < up.size(); ++i) {
      if (post[i] <= 0.0) up[i] = 0.0;
    }
    delta = std::move(upstream);
  }
  return loss;
}

Vector soft_predict(const MLPClassifier& model, std::span<const double> x, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("soft_predict: temperature must be > 0");
  Vector logits = model.forward(x);
  for (double& v : logits) v = sigmoid(v / temperature);
  return logits;
}

Matrix soft_predict(const MLPClassifier& model, const Matrix& x, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("soft_predict: temperature must be > 0");
  Matrix logits = model.forward(x);
  for (double& v : logits.data()) v = sigmoid(v / temperature);
  return logits;
}

nlohmann::json to_json(const MLPClassifier& model) {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto w = model.weights(l);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < w.rows; ++r) {
      const auto row = w.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    weights.push_back(std::move(rows));
    const auto b = model.bias(l);
    biases.push_back(std::vector<double>(b.begin(), b.end()));
  }
  return {{"layer_dims", model.layer_dims()},
          {"weights", std::move(weights)},
          {"biases", std::move(biases)},
          {"activation", activation_name(model.activation())}};
}

MLPClassifier model_from_json(const nlohmann::json& doc) {
  try {
    const auto dims = doc.at("layer_dims").get<std::vector<std::size_t>>();
    if (doc.at("activation").get<std::string>() != "relu") {
      throw ConfigError("model: unsupported activation " + doc.at("activation").dump());
    }
    MLPClassifier model(dims);
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    if (weights.size() != model.layer_count() || biases.size() != model.layer_count()) {
      throw DimensionError("model: layer count disagrees with layer_dims");
    }
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      const auto w = model.weights(l);
      if (weights[l].size() != w.rows) throw DimensionError("model: weight rows mismatch");
      for (std::size_t r = 0; r < w.rows; ++r) {
        const auto row = weights[l][r].get<std::vector<double>>();
        if (row.size() != w.cols) throw DimensionError("model: weight cols mismatch");
        std::copy(row.begin(), row.end(), w.row(r).begin());
      }
      const auto b = biases[l].get<std::vector<double>>();
      if (b.size() != model.bias(l).size()) throw DimensionError("model: bias length mismatch");
      std::copy(b.begin(), b.end(), model.bias(l).begin());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: malformed document: ") + e.what());
  }
}

void save_model(const MLPClassifier& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file " + path);
  out << to_json(model).dump() << '\n';
}

MLPClassifier load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read model file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 1, e.what());
  }
  return model_from_json(doc);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(initial_lr > 0.0)) throw ConfigError("train: initial_lr must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay must be in (0, 1]");
  if (decay_every < 1) throw ConfigError("train: decay_every must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

double TrainConfig::learning_rate(std::size_t epoch) const {
  const std::size_t decays = epoch == 0 ? 0 : (epoch - 1) / decay_every;
  return initial_lr * std::pow(lr_decay, static_cast<double>(decays));
}

namespace {

double dev_map(const MLPClassifier& model, const EvalSet& dev) {
  return mean_average_precision(model.forward(dev.x), dev.truth);
}

Matrix gather_targets(const TargetProvider& targets, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), targets.label_count());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto t = targets.target(rows[i]);
    std::copy(t.begin(), t.end(), out.row(i).begin());
  }
  return out;
}

TrainResult fit(MLPClassifier model, const Matrix& x, TargetProvider& targets,
                std::optional<EvalSet> dev, const TrainConfig& cfg, bool allow_zero_epochs) {
  if (!(allow_zero_epochs && cfg.epochs == 0)) cfg.validate();
  if (x.rows() == 0) throw DataError("train: empty training split");
  if (targets.size() != x.rows()) {
    throw DimensionError("train: target provider covers " + std::to_string(targets.size()) +
                         " samples, training split has " + std::to_string(x.rows()));
  }
  if (targets.label_count() != model.output_dim()) {
    throw DimensionError("train: target length " + std::to_string(targets.label_count()) +
                         " differs from model output " + std::to_string(model.output_dim()));
  }
  if (dev && (dev->x.rows() != dev->truth.rows() || dev->truth.cols() != model.output_dim())) {
    throw DimensionError("train: dev split shape mismatch");
  }

  TrainHistory history;
  if (cfg.epochs == 0) return {std::move(model), std::move(history)};

  const bool checkpoint = dev.has_value() && cfg.early_stop;
  std::mt19937_64 shuffle_rng(cfg.seed ^ kShuffleStream);
  AdamState adam(model.param_count());
  AdamConfig adam_cfg{cfg.initial_lr, cfg.beta1, cfg.beta2, cfg.epsilon};

  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});

  targets.on_epoch_begin(model, x);
  {
    const Matrix all_targets = gather_targets(targets, order);
    history.train_loss.push_back(model.loss_and_gradient(x, all_targets, nullptr));
  }
  double best = -1.0;
  Vector best_params;
  if (dev) {
    history.dev_map.push_back(dev_map(model, *dev));
    best = history.dev_map.back();
    best_params.assign(model.params().begin(), model.params().end());
  }

  Vector grad;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (epoch > 1) targets.on_epoch_begin(model, x);
    adam_cfg.learning_rate = cfg.learning_rate(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Matrix batch_x = x.select_rows(rows);
      const Matrix batch_t = gather_targets(targets, rows);
      const double loss = model.loss_and_gradient(batch_x, batch_t, &grad);
      epoch_loss += loss * static_cast<double>(rows.size());
      adam_step(model.params(), grad, adam, adam_cfg);
    }
    history.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    if (!std::isfinite(history.train_loss.back())) {
      throw NumericError("train: loss became non-finite at epoch " + std::to_string(epoch));
    }

    if (dev) {
      history.dev_map.push_back(dev_map(model, *dev));
      if (history.dev_map.back() > best) {
        best = history.dev_map.back();
        history.best_epoch = epoch;
        best_params.assign(model.params().begin(), model.params().end());
      }
    }
  }

  if (checkpoint) {
    std::copy(best_params.begin(), best_params.end(), model.params().begin());
  } else if (!dev) {
    history.best_epoch = cfg.epochs;
  }
  return {std::move(model), std::move(history)};
}

}  // namespace

TrainResult train(const std::vector<std::size_t>& layer_dims, const Matrix& x,
                  TargetProvider& targets, std::optional<EvalSet> dev, const TrainConfig& cfg) {
  cfg.validate();
  return fit(MLPClassifier::random(layer_dims, cfg.seed), x, targets, dev, cfg, false);
}

TrainResult finetune(const MLPClassifier& init, const Matrix& x, TargetProvider& targets,
                     std::optional<EvalSet> dev, const TrainConfig& cfg) {
  return fit(init, x, targets, dev, cfg, true);
}

}  // namespace noisy_distill
