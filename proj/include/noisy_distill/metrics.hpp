#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "noisy_distill/numerics.hpp"

namespace noisy_distill {

// Average precision of one class. Items are ranked by descending score, ties
// broken by ascending index; AP = (1/P) * sum over positive hits at rank k of
// (positives so far / k). Returns nullopt when truth has no positive.
// truth entries are 0/1; anything > 0.5 counts as positive.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const double> truth);

struct MapResult {
  double map = 0.0;
  std::vector<std::optional<double>> per_class;
  std::size_t classes_used = 0;
};

// Mean of per-class AP over the classes with at least one positive. Rows are
// samples, columns are classes. Throws DataError when no class has a positive.
MapResult mean_average_precision_detail(const Matrix& scores, const Matrix& truth);
double mean_average_precision(const Matrix& scores, const Matrix& truth);

// Same contract, evaluated with the serial reference kernel.
double mean_average_precision_serial(const Matrix& scores, const Matrix& truth);

}  // namespace noisy_distill
