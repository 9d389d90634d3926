#include "noisy_distill/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "noisy_distill/errors.hpp"
#include "noisy_distill/kernels.hpp"

namespace noisy_distill {

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const double> truth) {
  if (scores.size() != truth.size()) {
    throw DimensionError("average_precision: scores and truth differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  double hits = 0.0;
  double precision_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (truth[order[rank]] > 0.5) {
      hits += 1.0;
      precision_sum += hits / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0.0) return std::nullopt;
  return precision_sum / hits;
}

namespace {

MapResult reduce_map(std::vector<std::optional<double>> per_class) {
  MapResult result;
  double total = 0.0;
  for (const auto& ap : per_class) {
    if (!ap) continue;
    total += *ap;
    ++result.classes_used;
  }
  if (result.classes_used == 0) {
    throw DataError("mean_average_precision: no class has a positive example");
  }
  result.map = total / static_cast<double>(result.classes_used);
  result.per_class = std::move(per_class);
  return result;
}

void check_shapes(const Matrix& scores, const Matrix& truth) {
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols()) {
    throw DimensionError("mean_average_precision: score and truth matrices differ in shape");
  }
}

}  // namespace

MapResult mean_average_precision_detail(const Matrix& scores, const Matrix& truth) {
  check_shapes(scores, truth);
  return reduce_map(kernels::omp::column_average_precision(scores, truth));
}

double mean_average_precision(const Matrix& scores, const Matrix& truth) {
  return mean_average_precision_detail(scores, truth).map;
}

double mean_average_precision_serial(const Matrix& scores, const Matrix& truth) {
  check_shapes(scores, truth);
  return reduce_map(kernels::serial::column_average_precision(scores, truth)).map;
}

}  // namespace noisy_distill
