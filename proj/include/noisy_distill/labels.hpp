#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>

#include "noisy_distill/kgraph.hpp"
#include "noisy_distill/model.hpp"
#include "noisy_distill/numerics.hpp"
#include "noisy_distill/targets.hpp"

namespace noisy_distill {

enum class Strategy { kNoisy, kDistill, kGuidedDistill, kSmooth, kBootstrap, kCleanTruth };

std::string to_string(Strategy strategy);
// Accepts the names produced by to_string; throws ConfigError otherwise.
Strategy parse_strategy(const std::string& name);

struct PseudoLabelSpec {
  Strategy strategy = Strategy::kNoisy;
  double lambda = 1.0;
  double temperature = 1.0;
  std::optional<RelationMatrix> relation;

  // Throws ConfigError / ParameterError on an inconsistent spec.
  void validate(std::size_t label_count) const;
};

// lambda * y + (1 - lambda) * s
Vector pseudo_distill(std::span<const double> y, std::span<const double> s, double lambda);
// lambda * y + (1 - lambda) / L
Vector pseudo_smooth(std::span<const double> y, double lambda);
// lambda * y + (1 - lambda) * s_prev, s_prev being the current model's own prediction.
Vector pseudo_bootstrap(std::span<const double> y, std::span<const double> s_prev, double lambda);
// G s
Vector guided_soft(const RelationMatrix& relation, std::span<const double> s);
// map_clean / (map_noisy + map_clean)
double lambda_heuristic(double map_clean, double map_noisy);

// Rows of every input matrix are training samples. `truth` is needed for the
// clean-truth strategy, `aux` for distill and guided-distill. Auxiliary soft
// labels are computed once, at construction.
std::unique_ptr<TargetProvider> build_target_provider(const PseudoLabelSpec& spec,
                                                      const Matrix& features,
                                                      const Matrix& observed,
                                                      const Matrix* truth,
                                                      const MLPClassifier* aux);

// Pseudo-label matrices, exposed for ranking and analysis.
Matrix distill_targets(const Matrix& observed, const Matrix& soft, double lambda);
Matrix guided_soft_matrix(const RelationMatrix& relation, const Matrix& soft);

}  // namespace noisy_distill
