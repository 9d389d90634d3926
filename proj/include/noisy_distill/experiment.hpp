#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisy_distill/datagen.hpp"
#include "noisy_distill/kgraph.hpp"
#include "noisy_distill/labels.hpp"
#include "noisy_distill/model.hpp"
#include "noisy_distill/risk.hpp"

namespace noisy_distill {

enum class Method {
  kBaselineClean,
  kBaselineNoisy,
  kBaselineEnsemble,
  kBootstrap,
  kLabelSmooth,
  kFinetune,
  kDistillation,
  kGuidedDistillation,
  kUpperBound,
};

std::string to_string(Method method);
// Accepts the display names ("Baseline-Clean", "Label Smooth", ...).
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();
std::size_t method_index(Method method);

struct BenchmarkConfig {
  std::vector<std::size_t> hidden = {64};
  TrainConfig train;
  // nullopt selects lambda from the baselines' dev mAPs.
  std::optional<double> lambda;
  double temperature = 1.0;
  double beta = kDefaultSiblingWeight;
  // Candidate lambdas for Bootstrap and Label Smooth, picked by dev mAP.
  std::vector<double> revision_grid = {0.5, 0.6, 0.7, 0.8, 0.9};
  std::uint64_t seed = 0;
  std::vector<Method> methods = all_methods();
  // Independent method runs executed concurrently.
  int jobs = 1;

  // Training seed of a method: seed XOR method index.
  std::uint64_t method_seed(Method method) const;
  TrainConfig train_config(Method method) const;
  nlohmann::json to_json() const;
};

// Schedule used for the desk-scale synthetic benchmark: fewer epochs than the
// reference schedule, with a larger initial step so the small clean split is
// trained to convergence.
TrainConfig desk_train_config();
BenchmarkConfig desk_benchmark_config(std::uint64_t seed = 0);

struct MethodResult {
  Method method = Method::kBaselineClean;
  std::optional<double> lambda;
  std::optional<double> temperature;
  double dev_map = 0.0;
  double test_map = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const MethodResult&) const = default;
};

struct ExperimentReport {
  std::vector<MethodResult> rows;
  std::string dataset_hash;
  std::string config_hash;
  std::string timestamp;

  const MethodResult& row(Method method) const;
};

nlohmann::json to_json(const ExperimentReport& report);
std::string report_csv(const std::vector<MethodResult>& rows);

// The dataset split into training pools and evaluation sets.
struct PreparedData {
  Matrix clean_x, clean_y;
  Matrix noisy_x, noisy_y;
  // D = clean-train followed by noisy-train.
  Matrix pool_x, pool_y;
  std::optional<Matrix> pool_truth;
  Matrix dev_x, dev_y;
  Matrix test_x, test_y;

  explicit PreparedData(const Dataset& dataset);
};

// The auxiliary (Baseline-Clean) and Baseline-Noisy models with the lambda
// derived from them.
struct Baselines {
  TrainResult clean;
  TrainResult noisy;
  double clean_dev_map = 0.0;
  double noisy_dev_map = 0.0;
  double lambda = 0.0;
};

Baselines prepare_baselines(const PreparedData& data, const BenchmarkConfig& cfg);

double evaluate_map(const MLPClassifier& model, const Matrix& x, const Matrix& truth);

// Elementwise sqrt(p_clean * p_noisy) of the two models' probabilities.
Matrix ensemble_scores(const MLPClassifier& clean, const MLPClassifier& noisy, const Matrix& x);

ExperimentReport run_benchmark(const Dataset& dataset, const KnowledgeGraph* graph,
                               const BenchmarkConfig& cfg);

struct TemperatureResult {
  double temperature = 1.0;
  double dev_map = 0.0;
  double test_map = 0.0;
};

// Reruns Distillation once per distinct temperature (first occurrence order).
std::vector<TemperatureResult> temperature_sweep(const Dataset& dataset,
                                                 const std::vector<double>& temperatures,
                                                 const BenchmarkConfig& cfg);
std::vector<TemperatureResult> temperature_sweep(const PreparedData& data,
                                                 const Baselines& baselines,
                                                 const std::vector<double>& temperatures,
                                                 const BenchmarkConfig& cfg);

struct RankRow {
  std::string id;
  double pseudo = 0.0;
  std::optional<int> truth;
  int observed = 1;
};

struct Ranking {
  std::vector<RankRow> distill;
  // Empty when no relation matrix was supplied.
  std::vector<RankRow> guided;
};

// Observed positives of one class across D (clean-train and noisy-train),
// ranked by descending pseudo label lambda * y[m] + (1 - lambda) * s[m] (and
// by the guided variant with G s), ties by ascending id.
Ranking rank_by_pseudo(const Dataset& dataset, std::size_t class_index, double lambda,
                       double temperature, const MLPClassifier& aux,
                       const RelationMatrix* relation);

std::string ranking_csv(const std::vector<RankRow>& rows);

// Mean 1-based rank of true and of false positives within a ranking.
struct RankSeparation {
  double mean_rank_true = 0.0;
  double mean_rank_false = 0.0;
  std::size_t true_count = 0;
  std::size_t false_count = 0;
};
RankSeparation rank_separation(const std::vector<RankRow>& rows);

// Optimum-risk checks with a trained auxiliary model: s is its soft output on
// noisy-train, y the observed labels there, truth the hidden labels.
// `ensemble_size` auxiliaries trained with distinct seeds feed bias/variance.
Prop1Result verify_with_trained_auxiliary(const Dataset& dataset, const BenchmarkConfig& cfg,
                                          std::size_t ensemble_size, const std::vector<double>& grid,
                                          const Prop1Tolerances& tol);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace noisy_distill
