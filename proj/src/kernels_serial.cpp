#include <cmath>

#include "noisy_distill/errors.hpp"
#include "noisy_distill/kernels.hpp"
#include "noisy_distill/metrics.hpp"

namespace noisy_distill::kernels::serial {

double sum(std::span<const double> values) {
  // Neumaier's variant of Kahan summation.
  double total = 0.0;
  double compensation = 0.0;
  for (double v : values) {
    const double t = total + v;
    if (std::abs(total) >= std::abs(v)) {
      compensation += (total - t) + v;
    } else {
      compensation += (v - t) + total;
    }
    total = t;
  }
  return total + compensation;
}

void gemm_nt(ConstMatrixView a, ConstMatrixView b, std::span<const double> bias,
             MatrixView out) {
  if (a.cols != b.cols || out.rows != a.rows || out.cols != b.rows ||
      (!bias.empty() && bias.size() != b.rows)) {
    throw DimensionError("gemm_nt: shape mismatch");
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = bias.empty() ? 0.0 : bias[j];
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  }
}

void gemm_nn(ConstMatrixView a, ConstMatrixView b, MatrixView out) {
  if (a.cols != b.rows || out.rows != a.rows || out.cols != b.cols) {
    throw DimensionError("gemm_nn: shape mismatch");
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
}

void gemm_tn(ConstMatrixView a, ConstMatrixView b, MatrixView out) {
  if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols) {
    throw DimensionError("gemm_tn: shape mismatch");
  }
  for (std::size_t i = 0; i < a.cols; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < a.rows; ++r) acc += a(r, i) * b(r, j);
      out(i, j) = acc;
    }
  }
}

void column_sums(ConstMatrixView a, std::span<double> out) {
  if (out.size() != a.cols) throw DimensionError("column_sums: shape mismatch");
  for (std::size_t c = 0; c < a.cols; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r) acc += a(r, c);
    out[c] = acc;
  }
}

void row_sq_dist(ConstMatrixView a, ConstMatrixView b, std::span<double> out) {
  if (a.rows != b.rows || a.cols != b.cols || out.size() != a.rows) {
    throw DimensionError("row_sq_dist: shape mismatch");
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) {
      const double d = a(i, c) - b(i, c);
      acc += d * d;
    }
    out[i] = acc;
  }
}

void row_blend_sq_dist(double lambda, ConstMatrixView y, ConstMatrixView s,
                       ConstMatrixView truth, std::span<double> out) {
  if (y.rows != s.rows || y.rows != truth.rows || y.cols != s.cols || y.cols != truth.cols ||
      out.size() != y.rows) {
    throw DimensionError("row_blend_sq_dist: shape mismatch");
  }
  const double mu = 1.0 - lambda;
  for (std::size_t i = 0; i < y.rows; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < y.cols; ++c) {
      const double d = (lambda * y(i, c) + mu * s(i, c)) - truth(i, c);
      acc += d * d;
    }
    out[i] = acc;
  }
}

void row_cross(ConstMatrixView y, ConstMatrixView s, ConstMatrixView truth,
               std::span<double> out) {
  if (y.rows != s.rows || y.rows != truth.rows || y.cols != s.cols || y.cols != truth.cols ||
      out.size() != y.rows) {
    throw DimensionError("row_cross: shape mismatch");
  }
  for (std::size_t i = 0; i < y.rows; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < y.cols; ++c) {
      acc += (y(i, c) - truth(i, c)) * (s(i, c) - truth(i, c));
    }
    out[i] = acc;
  }
}

std::vector<std::optional<double>> column_average_precision(ConstMatrixView scores,
                                                            ConstMatrixView truth) {
  if (scores.rows != truth.rows || scores.cols != truth.cols) {
    throw DimensionError("column_average_precision: shape mismatch");
  }
  std::vector<std::optional<double>> out(scores.cols);
  Vector column_scores(scores.rows);
  Vector column_truth(scores.rows);
  for (std::size_t c = 0; c < scores.cols; ++c) {
    for (std::size_t r = 0; r < scores.rows; ++r) {
      column_scores[r] = scores(r, c);
      column_truth[r] = truth(r, c);
    }
    out[c] = average_precision(column_scores, column_truth);
  }
  return out;
}

}  // namespace noisy_distill::kernels::serial
