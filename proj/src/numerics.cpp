#include "noisy_distill/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "noisy_distill/errors.hpp"

namespace noisy_distill {

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) {
      throw DimensionError("ragged rows: row " + std::to_string(r) + " has " +
                           std::to_string(rows[r].size()) + " entries, expected " +
                           std::to_string(m.cols()));
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw DimensionError("row index out of range");
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double log_sigmoid(double a) {
  if (a >= 0.0) return -std::log1p(std::exp(-a));
  return a - std::log1p(std::exp(a));
}

double bce_loss(std::span<const double> target, std::span<const double> logits) {
  if (target.size() != logits.size()) {
    throw DimensionError("bce_loss: target has " + std::to_string(target.size()) +
                         " entries, logits " + std::to_string(logits.size()));
  }
  static const double log_floor = std::log(kLogClamp);
  double loss = 0.0;
  for (std::size_t m = 0; m < target.size(); ++m) {
    // log(1 - sigmoid(z)) == log_sigmoid(-z)
    const double log_p = std::max(log_sigmoid(logits[m]), log_floor);
    const double log_q = std::max(log_sigmoid(-logits[m]), log_floor);
    loss -= target[m] * log_p + (1.0 - target[m]) * log_q;
  }
  return loss;
}

void bce_grad(std::span<const double> target, std::span<const double> logits,
              std::span<double> grad) {
  if (target.size() != logits.size() || grad.size() != logits.size()) {
    throw DimensionError("bce_grad: length mismatch");
  }
  for (std::size_t m = 0; m < target.size(); ++m) grad[m] = sigmoid(logits[m]) - target[m];
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw DimensionError("adam_step: params, grads and moments must share one shape");
  }
  if (!(config.learning_rate > 0.0)) throw ParameterError("adam_step: learning rate must be > 0");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

GradCheckResult grad_check(const LossFunction& loss, std::span<const double> params,
                           std::span<const double> analytic_gradient, double h,
                           double tolerance) {
  if (params.size() != analytic_gradient.size()) {
    throw DimensionError("grad_check: gradient length differs from parameter count");
  }
  if (!(h >= 1e-7 && h <= 1e-3)) throw ParameterError("grad_check: h must lie in [1e-7, 1e-3]");

  Vector probe(params.begin(), params.end());
  GradCheckResult result;
  result.numeric_gradient.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double up = loss(probe);
    probe[i] = original - h;
    const double down = loss(probe);
    probe[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite loss at coordinate " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * h);
    result.numeric_gradient[i] = numeric;
    const double err =
        std::abs(analytic_gradient[i] - numeric) / std::max(1.0, std::abs(numeric));
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
    }
  }
  result.passed = result.max_relative_error < tolerance;
  return result;
}

}  // namespace noisy_distill
