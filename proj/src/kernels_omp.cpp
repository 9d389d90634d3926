#include <algorithm>
#include <cstddef>

#ifdef NOISY_DISTILL_HAVE_OPENMP
#include <omp.h>
#endif

#include "noisy_distill/errors.hpp"
#include "noisy_distill/kernels.hpp"
#include "noisy_distill/metrics.hpp"

namespace noisy_distill::kernels {

int thread_count() {
#ifdef NOISY_DISTILL_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_thread_count(int threads) {
#ifdef NOISY_DISTILL_HAVE_OPENMP
  if (threads >= 1) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

namespace omp {
namespace {

// Below this many scalar multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;

using Index = std::ptrdiff_t;

double pairwise(std::span<const double> v) {
  if (v.size() <= 2) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
  }
  const std::size_t half = v.size() / 2;
  return pairwise(v.first(half)) + pairwise(v.subspan(half));
}

}  // namespace

double sum(std::span<const double> values) {
  const std::size_t blocks = (values.size() + kReductionBlock - 1) / kReductionBlock;
  if (blocks == 0) return 0.0;
  Vector partial(blocks, 0.0);
#pragma omp parallel for schedule(static) if (values.size() > kParallelWork)
  for (Index b = 0; b < static_cast<Index>(blocks); ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kReductionBlock;
    const std::size_t end = std::min(values.size(), begin + kReductionBlock);
    partial[b] = pairwise(values.subspan(begin, end - begin));
  }
  return pairwise(partial);
}

void gemm_nt(ConstMatrixView a, ConstMatrixView b, std::span<const double> bias,
             MatrixView out) {
  if (a.cols != b.cols || out.rows != a.rows || out.cols != b.rows ||
      (!bias.empty() && bias.size() != b.rows)) {
    throw DimensionError("gemm_nt: shape mismatch");
  }
  const std::size_t work = a.rows * b.rows * a.cols;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (Index i = 0; i < static_cast<Index>(a.rows); ++i) {
    const double* arow = a.data + i * a.cols;
    double* orow = out.data + i * out.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.data + j * b.cols;
      double acc = bias.empty() ? 0.0 : bias[j];
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      orow[j] = acc;
    }
  }
}

void gemm_nn(ConstMatrixView a, ConstMatrixView b, MatrixView out) {
  if (a.cols != b.rows || out.rows != a.rows || out.cols != b.cols) {
    throw DimensionError("gemm_nn: shape mismatch");
  }
  const std::size_t work = a.rows * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (Index i = 0; i < static_cast<Index>(a.rows); ++i) {
    double* orow = out.data + i * out.cols;
    std::fill(orow, orow + out.cols, 0.0);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.data[i * a.cols + k];
      const double* brow = b.data + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
}

void gemm_tn(ConstMatrixView a, ConstMatrixView b, MatrixView out) {
  if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols) {
    throw DimensionError("gemm_tn: shape mismatch");
  }
  const std::size_t work = a.rows * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (Index i = 0; i < static_cast<Index>(a.cols); ++i) {
    double* orow = out.data + i * out.cols;
    std::fill(orow, orow + out.cols, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
      const double ari = a.data[r * a.cols + i];
      const double* brow = b.data + r * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += ari * brow[j];
    }
  }
}

void column_sums(ConstMatrixView a, std::span<double> out) {
  if (out.size() != a.cols) throw DimensionError("column_sums: shape mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* arow = a.data + r * a.cols;
    for (std::size_t c = 0; c < a.cols; ++c) out[c] += arow[c];
  }
}

void row_sq_dist(ConstMatrixView a, ConstMatrixView b, std::span<double> out) {
  if (a.rows != b.rows || a.cols != b.cols || out.size() != a.rows) {
    throw DimensionError("row_sq_dist: shape mismatch");
  }
#pragma omp parallel for schedule(static) if (a.rows * a.cols > kParallelWork)
  for (Index i = 0; i < static_cast<Index>(a.rows); ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) {
      const double d = a.data[i * a.cols + c] - b.data[i * b.cols + c];
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
#pragma omp parallel for schedule(static) if (y.rows * y.cols > kParallelWork)
  for (Index i = 0; i < static_cast<Index>(y.rows); ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < y.cols; ++c) {
      const std::size_t at = i * y.cols + c;
      const double d = (lambda * y.data[at] + mu * s.data[at]) - truth.data[at];
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
#pragma omp parallel for schedule(static) if (y.rows * y.cols > kParallelWork)
  for (Index i = 0; i < static_cast<Index>(y.rows); ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < y.cols; ++c) {
      const std::size_t at = i * y.cols + c;
      acc += (y.data[at] - truth.data[at]) * (s.data[at] - truth.data[at]);
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
#pragma omp parallel for schedule(dynamic) if (scores.rows * scores.cols > kParallelWork)
  for (Index c = 0; c < static_cast<Index>(scores.cols); ++c) {
    Vector column_scores(scores.rows);
    Vector column_truth(scores.rows);
    for (std::size_t r = 0; r < scores.rows; ++r) {
      column_scores[r] = scores.data[r * scores.cols + c];
      column_truth[r] = truth.data[r * truth.cols + c];
    }
    out[c] = average_precision(column_scores, column_truth);
  }
  return out;
}

}  // namespace omp
}  // namespace noisy_distill::kernels
