#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the plain
// reference kept for testing, `omp` is the OpenMP version the library calls.
//
// Matrix products compute each output element with the same in-order dot
// product in both variants, so their results are bit-identical. Reductions
// differ: the serial sum is Neumaier-compensated, the parallel sum adds fixed
// 1024-element blocks and then combines block partials pairwise. The block
// layout does not depend on the thread count, so parallel results are
// reproducible run to run; the two variants agree to ~1e-15 relative.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "noisy_distill/numerics.hpp"

namespace noisy_distill::kernels {

inline constexpr std::size_t kReductionBlock = 1024;

// Number of threads the OpenMP kernels will use (1 without OpenMP).
int thread_count();
// Caps the OpenMP team size; values < 1 are ignored.
void set_thread_count(int threads);

#define NOISY_DISTILL_KERNEL_DECLS                                                          \
  double sum(std::span<const double> values);                                             \
  /* out(n x m) = a(n x k) * b(m x k)^T + bias(m); bias may be empty. */                   \
  void gemm_nt(ConstMatrixView a, ConstMatrixView b, std::span<const double> bias,        \
               MatrixView out);                                                           \
  /* out(n x k) = a(n x m) * b(m x k) */                                                  \
  void gemm_nn(ConstMatrixView a, ConstMatrixView b, MatrixView out);                     \
  /* out(m x k) = a(n x m)^T * b(n x k) */                                                \
  void gemm_tn(ConstMatrixView a, ConstMatrixView b, MatrixView out);                     \
  /* out(c) = sum over rows of a(r, c) */                                                 \
  void column_sums(ConstMatrixView a, std::span<double> out);                             \
  /* out(i) = ||a_i - b_i||^2 */                                                          \
  void row_sq_dist(ConstMatrixView a, ConstMatrixView b, std::span<double> out);          \
  /* out(i) = ||lambda y_i + (1 - lambda) s_i - t_i||^2 */                                \
  void row_blend_sq_dist(double lambda, ConstMatrixView y, ConstMatrixView s,             \
                         ConstMatrixView truth, std::span<double> out);                   \
  /* out(i) = (y_i - t_i) . (s_i - t_i) */                                                \
  void row_cross(ConstMatrixView y, ConstMatrixView s, ConstMatrixView truth,             \
                 std::span<double> out);                                                  \
  /* Average precision of every column; nullopt for columns without positives. */         \
  std::vector<std::optional<double>> column_average_precision(ConstMatrixView scores,     \
                                                              ConstMatrixView truth);

namespace serial {
NOISY_DISTILL_KERNEL_DECLS
}  // namespace serial

namespace omp {
NOISY_DISTILL_KERNEL_DECLS
}  // namespace omp

#undef NOISY_DISTILL_KERNEL_DECLS

}  // namespace noisy_distill::kernels
