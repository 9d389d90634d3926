#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace noisy_distill {

using Vector = std::vector<double>;

// Row-major view over externally owned storage.
struct ConstMatrixView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t r) const { return {data + r * cols, cols}; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct MatrixView {
  double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<double> row(std::size_t r) const { return {data + r * cols, cols}; }
  double& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  operator ConstMatrixView() const { return {data, rows, cols}; }
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  // Throws DimensionError when the rows are ragged.
  static Matrix from_rows(const std::vector<Vector>& rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  MatrixView view() noexcept { return {data_.data(), rows_, cols_}; }
  ConstMatrixView view() const noexcept { return {data_.data(), rows_, cols_}; }
  operator ConstMatrixView() const noexcept { return view(); }

  // Gathers the listed rows, in order, into a new matrix.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool all_finite() const noexcept;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

// 1 / (1 + e^{-a}), evaluated without overflow for any finite a.
double sigmoid(double a);

// log(sigmoid(a)) without cancellation.
double log_sigmoid(double a);

inline constexpr double kLogClamp = 1e-12;

// Binary cross-entropy summed over labels. Targets may be soft (any value in
// [0,1]); the loss is linear in the target. Log arguments are clamped at
// kLogClamp.
double bce_loss(std::span<const double> target, std::span<const double> logits);

// d bce_loss / d logits = sigmoid(z) - t, written into grad.
void bce_grad(std::span<const double> target, std::span<const double> logits,
              std::span<double> grad);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}

  Vector first_moment;
  Vector second_moment;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update applied to params in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config);

using LossFunction = std::function<double(std::span<const double>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  Vector numeric_gradient;
  bool passed = true;
};

// Compares an analytic gradient against central differences with step h.
// Relative error per coordinate is |g - g_fd| / max(1, |g_fd|).
GradCheckResult grad_check(const LossFunction& loss, std::span<const double> params,
                           std::span<const double> analytic_gradient, double h = 1e-5,
                           double tolerance = 1e-5);

}  // namespace noisy_distill
