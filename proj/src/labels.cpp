#include "noisy_distill/labels.hpp"

#include <array>
#include <utility>

#include "noisy_distill/errors.hpp"
#include "noisy_distill/kernels.hpp"

namespace noisy_distill {

namespace {

constexpr std::array<std::pair<Strategy, const char*>, 6> kStrategyNames{{
    {Strategy::kNoisy, "noisy"},
    {Strategy::kDistill, "distill"},
    {Strategy::kGuidedDistill, "guided-distill"},
    {Strategy::kSmooth, "smooth"},
    {Strategy::kBootstrap, "bootstrap"},
    {Strategy::kCleanTruth, "clean-truth"},
}};

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ParameterError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
}

Vector blend(std::span<const double> y, std::span<const double> s, double lambda) {
  if (y.size() != s.size()) throw DimensionError("pseudo label inputs differ in length");
  check_lambda(lambda);
  const double mu = 1.0 - lambda;
  Vector out(y.size());
  for (std::size_t m = 0; m < y.size(); ++m) out[m] = lambda * y[m] + mu * s[m];
  return out;
}

// Refreshes lambda * y + (1 - lambda) * sigmoid(f(x)) from the model under
// training at every epoch boundary.
class BootstrapTargets final : public TargetProvider {
 public:
  BootstrapTargets(Matrix observed, double lambda)
      : observed_(std::move(observed)), targets_(observed_), lambda_(lambda) {}

  std::size_t size() const override { return targets_.rows(); }
  std::size_t label_count() const override { return targets_.cols(); }
  std::span<const double> target(std::size_t row) const override { return targets_.row(row); }

  void on_epoch_begin(const MLPClassifier& model, const Matrix& features) override {
    targets_ = distill_targets(observed_, soft_predict(model, features, 1.0), lambda_);
  }

 private:
  Matrix observed_;
  Matrix targets_;
  double lambda_;
};

}  // namespace

std::string to_string(Strategy strategy) {
  for (const auto& [s, name] : kStrategyNames) {
    if (s == strategy) return name;
  }
  return "noisy";
}

Strategy parse_strategy(const std::string& name) {
  for (const auto& [s, n] : kStrategyNames) {
    if (name == n) return s;
  }
  throw ConfigError("unknown strategy: " + name);
}

void PseudoLabelSpec::validate(std::size_t label_count) const {
  check_lambda(lambda);
  if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
  if (strategy == Strategy::kGuidedDistill) {
    if (!relation) throw ConfigError("guided-distill requires a relation matrix");
    if (relation->g.rows() != label_count || relation->g.cols() != label_count) {
      throw DimensionError("relation matrix is not L x L");
    }
  }
}

Vector pseudo_distill(std::span<const double> y, std::span<const double> s, double lambda) {
  return blend(y, s, lambda);
}

Vector pseudo_smooth(std::span<const double> y, double lambda) {
  if (y.empty()) throw DataError("pseudo_smooth: empty label vector");
  const Vector uniform(y.size(), 1.0 / static_cast<double>(y.size()));
  return blend(y, uniform, lambda);
}

Vector pseudo_bootstrap(std::span<const double> y, std::span<const double> s_prev,
                        double lambda) {
  return blend(y, s_prev, lambda);
}

Vector guided_soft(const RelationMatrix& relation, std::span<const double> s) {
  const Matrix& g = relation.g;
  if (g.rows() != s.size() || g.cols() != s.size()) {
    throw DimensionError("guided_soft: relation matrix is " + std::to_string(g.rows()) + "x" +
                         std::to_string(g.cols()) + ", soft label has " +
                         std::to_string(s.size()) + " entries");
  }
  Vector out(s.size(), 0.0);
  for (std::size_t m = 0; m < s.size(); ++m) {
    double acc = 0.0;
    for (std::size_t n = 0; n < s.size(); ++n) acc += g(m, n) * s[n];
    out[m] = acc;
  }
  return out;
}

double lambda_heuristic(double map_clean, double map_noisy) {
  if (!(map_clean >= 0.0 && map_clean <= 1.0 && map_noisy >= 0.0 && map_noisy <= 1.0)) {
    throw ParameterError("lambda_heuristic: mAP values must lie in [0, 1]");
  }
  if (map_clean + map_noisy == 0.0) {
    throw ParameterError("lambda_heuristic: both mAP values are zero");
  }
  return map_clean / (map_noisy + map_clean);
}

Matrix distill_targets(const Matrix& observed, const Matrix& soft, double lambda) {
  if (observed.rows() != soft.rows() || observed.cols() != soft.cols()) {
    throw DimensionError("distill_targets: observed and soft labels differ in shape");
  }
  check_lambda(lambda);
  Matrix out(observed.rows(), observed.cols());
  const auto y = observed.data();
  const auto s = soft.data();
  auto o = out.data();
  const double mu = 1.0 - lambda;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = lambda * y[i] + mu * s[i];
  return out;
}

Matrix guided_soft_matrix(const RelationMatrix& relation, const Matrix& soft) {
  if (relation.g.cols() != soft.cols() || relation.g.rows() != soft.cols()) {
    throw DimensionError("guided_soft_matrix: relation matrix is not L x L");
  }
  // Row i of the result is G s_i, i.e. (S G^T)_i.
  Matrix out(soft.rows(), soft.cols());
  kernels::omp::gemm_nt(soft, relation.g, {}, out.view());
  return out;
}

std::unique_ptr<TargetProvider> build_target_provider(const PseudoLabelSpec& spec,
                                                      const Matrix& features,
                                                      const Matrix& observed,
                                                      const Matrix* truth,
                                                      const MLPClassifier* aux) {
  const std::size_t n_labels = observed.cols();
  spec.validate(n_labels);
  if (features.rows() != observed.rows()) {
    throw DimensionError("build_target_provider: features and labels differ in row count");
  }

  switch (spec.strategy) {
    case Strategy::kNoisy:
      return std::make_unique<StaticTargets>(observed);
    case Strategy::kCleanTruth:
      if (truth == nullptr) throw ConfigError("clean-truth targets need true labels");
      if (truth->rows() != observed.rows() || truth->cols() != n_labels) {
        throw DimensionError("true labels differ in shape from observed labels");
      }
      return std::make_unique<StaticTargets>(*truth);
    case Strategy::kSmooth: {
      Matrix out(observed.rows(), n_labels);
      for (std::size_t i = 0; i < observed.rows(); ++i) {
        const Vector row = pseudo_smooth(observed.row(i), spec.lambda);
        std::copy(row.begin(), row.end(), out.row(i).begin());
      }
      return std::make_unique<StaticTargets>(std::move(out));
    }
    case Strategy::kBootstrap:
      return std::make_unique<BootstrapTargets>(observed, spec.lambda);
    case Strategy::kDistill:
    case Strategy::kGuidedDistill: {
      if (aux == nullptr) throw ConfigError(to_string(spec.strategy) + " requires an auxiliary model");
      if (aux->output_dim() != n_labels) {
        throw DimensionError("auxiliary model output differs from label count");
      }
      Matrix soft = soft_predict(*aux, features, spec.temperature);
      if (spec.strategy == Strategy::kGuidedDistill) soft = guided_soft_matrix(*spec.relation, soft);
      return std::make_unique<StaticTargets>(distill_targets(observed, soft, spec.lambda));
    }
  }
  throw ConfigError("unhandled strategy");
}

}  // namespace noisy_distill
