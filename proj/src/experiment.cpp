#include "noisy_distill/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <iomanip>
#include <sstream>

#include "noisy_distill/errors.hpp"
#include "noisy_distill/metrics.hpp"

namespace noisy_distill {

namespace {

constexpr std::array<std::pair<Method, const char*>, 9> kMethodNames{{
    {Method::kBaselineClean, "Baseline-Clean"},
    {Method::kBaselineNoisy, "Baseline-Noisy"},
    {Method::kBaselineEnsemble, "Baseline-Ensemble"},
    {Method::kBootstrap, "Bootstrap"},
    {Method::kLabelSmooth, "Label Smooth"},
    {Method::kFinetune, "Finetune"},
    {Method::kDistillation, "Distillation"},
    {Method::kGuidedDistillation, "Guided Distillation"},
    {Method::kUpperBound, "Upper Bound"},
}};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::vector<std::size_t> concat(std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

bool contains(const std::vector<Method>& methods, Method m) {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

std::vector<std::size_t> model_dims(const BenchmarkConfig& cfg, std::size_t in, std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(out);
  return dims;
}

MethodResult evaluated(Method method, const MLPClassifier& model, const PreparedData& data,
                       std::uint64_t seed) {
  MethodResult row;
  row.method = method;
  row.dev_map = evaluate_map(model, data.dev_x, data.dev_y);
  row.test_map = evaluate_map(model, data.test_x, data.test_y);
  row.seed = seed;
  return row;
}

// Trains on D with the given targets from a fresh initialization.
TrainResult train_on_pool(const PreparedData& data, const BenchmarkConfig& cfg, Method method,
                          TargetProvider& targets) {
  const auto dims = model_dims(cfg, data.pool_x.cols(), data.pool_y.cols());
  return train(dims, data.pool_x, targets, EvalSet{data.dev_x, data.dev_y},
               cfg.train_config(method));
}

MethodResult run_distillation(const PreparedData& data, const Baselines& baselines,
                              const BenchmarkConfig& cfg, Method method, double temperature,
                              const RelationMatrix* relation) {
  PseudoLabelSpec spec;
  spec.strategy = relation ? Strategy::kGuidedDistill : Strategy::kDistill;
  spec.lambda = baselines.lambda;
  spec.temperature = temperature;
  if (relation) spec.relation = *relation;
  auto targets =
      build_target_provider(spec, data.pool_x, data.pool_y, nullptr, &baselines.clean.model);
  const auto trained = train_on_pool(data, cfg, method, *targets);
  MethodResult row = evaluated(method, trained.model, data, cfg.method_seed(method));
  row.lambda = baselines.lambda;
  row.temperature = temperature;
  return row;
}

// Trains one model per grid lambda and keeps the best dev mAP (first on ties).
MethodResult run_revision_grid(const PreparedData& data, const BenchmarkConfig& cfg,
                               Method method, Strategy strategy) {
  std::optional<MethodResult> best;
  for (double lambda : cfg.revision_grid) {
    PseudoLabelSpec spec;
    spec.strategy = strategy;
    spec.lambda = lambda;
    auto targets = build_target_provider(spec, data.pool_x, data.pool_y, nullptr, nullptr);
    const auto trained = train_on_pool(data, cfg, method, *targets);
    MethodResult row = evaluated(method, trained.model, data, cfg.method_seed(method));
    row.lambda = lambda;
    if (!best || row.dev_map > best->dev_map) best = row;
  }
  return *best;
}

}  // namespace

std::string to_string(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "Baseline-Clean";
}

Method parse_method(const std::string& name) {
  for (const auto& [m, n] : kMethodNames) {
    if (name == n) return m;
  }
  std::string valid;
  for (const auto& [m, n] : kMethodNames) valid += std::string(valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown method: " + name + " (valid: " + valid + ")");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const auto& [m, name] : kMethodNames) out.push_back(m);
    return out;
  }();
  return methods;
}

std::size_t method_index(Method method) { return static_cast<std::size_t>(method); }

std::uint64_t BenchmarkConfig::method_seed(Method method) const {
  return seed ^ static_cast<std::uint64_t>(method_index(method));
}

TrainConfig BenchmarkConfig::train_config(Method method) const {
  TrainConfig out = train;
  out.seed = method_seed(method);
  return out;
}

nlohmann::json BenchmarkConfig::to_json() const {
  std::vector<std::string> names;
  for (Method m : methods) names.push_back(to_string(m));
  nlohmann::json lambda_json = lambda ? nlohmann::json(*lambda) : nlohmann::json("auto");
  return {{"hidden", hidden},
          {"epochs", train.epochs},
          {"initial_lr", train.initial_lr},
          {"lr_decay", train.lr_decay},
          {"decay_every", train.decay_every},
          {"batch_size", train.batch_size},
          {"early_stop", train.early_stop},
          {"lambda", lambda_json},
          {"temperature", temperature},
          {"beta", beta},
          {"revision_grid", revision_grid},
          {"seed", seed},
          {"methods", names}};
}

TrainConfig desk_train_config() {
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.initial_lr = 3e-3;
  return cfg;
}

BenchmarkConfig desk_benchmark_config(std::uint64_t seed) {
  BenchmarkConfig cfg;
  cfg.train = desk_train_config();
  cfg.seed = seed;
  return cfg;
}

const MethodResult& ExperimentReport::row(Method method) const {
  for (const auto& r : rows) {
    if (r.method == method) return r;
  }
  throw LookupError("report has no row for " + to_string(method));
}

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"method", to_string(r.method)},
                    {"lambda", r.lambda ? nlohmann::json(*r.lambda) : nlohmann::json(nullptr)},
                    {"T", r.temperature ? nlohmann::json(*r.temperature) : nlohmann::json(nullptr)},
                    {"dev_map", r.dev_map},
                    {"test_map", r.test_map},
                    {"seed", r.seed}});
  }
  return {{"rows", std::move(rows)},
          {"metadata",
           {{"dataset_hash", report.dataset_hash},
            {"config_hash", report.config_hash},
            {"timestamp", report.timestamp}}}};
}

std::string report_csv(const std::vector<MethodResult>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "method,lambda,T,dev_map,test_map,seed\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',';
    if (r.lambda) out << *r.lambda;
    out << ',';
    if (r.temperature) out << *r.temperature;
    out << ',' << r.dev_map << ',' << r.test_map << ',' << r.seed << '\n';
  }
  return out.str();
}

PreparedData::PreparedData(const Dataset& dataset) {
  const auto clean = dataset.indices({Split::kCleanTrain});
  const auto noisy = dataset.indices({Split::kNoisyTrain});
  const auto pool = concat(clean, noisy);
  const auto dev = dataset.indices({Split::kDev});
  const auto test = dataset.indices({Split::kTest});
  if (clean.empty()) throw DataError("dataset has no clean-train records");
  if (dev.empty() || test.empty()) throw DataError("dataset needs dev and test records");

  clean_x = dataset.features(clean);
  clean_y = dataset.observed(clean);
  noisy_x = dataset.features(noisy);
  noisy_y = dataset.observed(noisy);
  pool_x = dataset.features(pool);
  pool_y = dataset.observed(pool);
  const bool pool_has_truth = std::all_of(pool.begin(), pool.end(), [&](std::size_t i) {
    return dataset.records[i].y_true.has_value();
  });
  if (pool_has_truth) pool_truth = dataset.truth(pool);
  // Dev and test observed labels are clean by construction.
  dev_x = dataset.features(dev);
  dev_y = dataset.observed(dev);
  test_x = dataset.features(test);
  test_y = dataset.observed(test);
}

double evaluate_map(const MLPClassifier& model, const Matrix& x, const Matrix& truth) {
  return mean_average_precision(model.forward(x), truth);
}

Matrix ensemble_scores(const MLPClassifier& clean, const MLPClassifier& noisy, const Matrix& x) {
  const Matrix a = soft_predict(clean, x, 1.0);
  const Matrix b = soft_predict(noisy, x, 1.0);
  Matrix out(a.rows(), a.cols());
  const auto pa = a.data();
  const auto pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = std::sqrt(pa[i] * pb[i]);
  return out;
}

Baselines prepare_baselines(const PreparedData& data, const BenchmarkConfig& cfg) {
  Baselines out;
  const EvalSet dev{data.dev_x, data.dev_y};
  {
    StaticTargets targets(data.clean_y);
    out.clean = train(model_dims(cfg, data.clean_x.cols(), data.clean_y.cols()), data.clean_x,
                      targets, dev, cfg.train_config(Method::kBaselineClean));
  }
  {
    StaticTargets targets(data.pool_y);
    out.noisy = train(model_dims(cfg, data.pool_x.cols(), data.pool_y.cols()), data.pool_x,
                      targets, dev, cfg.train_config(Method::kBaselineNoisy));
  }
  out.clean_dev_map = evaluate_map(out.clean.model, data.dev_x, data.dev_y);
  out.noisy_dev_map = evaluate_map(out.noisy.model, data.dev_x, data.dev_y);
  out.lambda = cfg.lambda ? *cfg.lambda : lambda_heuristic(out.clean_dev_map, out.noisy_dev_map);
  return out;
}

ExperimentReport run_benchmark(const Dataset& dataset, const KnowledgeGraph* graph,
                               const BenchmarkConfig& cfg) {
  if (cfg.methods.empty()) throw ConfigError("benchmark: no methods configured");
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.methods.size(); ++j) {
      if (cfg.methods[i] == cfg.methods[j]) {
        throw ConfigError("benchmark: method listed twice: " + to_string(cfg.methods[i]));
      }
    }
  }
  if (cfg.lambda && !(*cfg.lambda >= 0.0 && *cfg.lambda <= 1.0)) {
    throw ConfigError("benchmark: lambda must lie in [0, 1]");
  }
  if (!(cfg.temperature > 0.0)) throw ConfigError("benchmark: temperature must be > 0");
  if (contains(cfg.methods, Method::kGuidedDistillation) && graph == nullptr) {
    throw ConfigError("Guided Distillation requires a knowledge graph");
  }
  if ((contains(cfg.methods, Method::kBootstrap) || contains(cfg.methods, Method::kLabelSmooth)) &&
      cfg.revision_grid.empty()) {
    throw ConfigError("Bootstrap and Label Smooth require a non-empty revision_grid");
  }
  const PreparedData data(dataset);
  if (contains(cfg.methods, Method::kUpperBound) && !data.pool_truth) {
    throw ConfigError("Upper Bound requires y_true on every training record");
  }
  if (contains(cfg.methods, Method::kFinetune) && data.noisy_x.rows() == 0) {
    throw ConfigError("Finetune requires noisy-train records");
  }
  cfg.train.validate();

  const bool only_clean = cfg.methods.size() == 1 && cfg.methods.front() == Method::kBaselineClean;
  Baselines baselines;
  if (only_clean) {
    StaticTargets targets(data.clean_y);
    baselines.clean = train(model_dims(cfg, data.clean_x.cols(), data.clean_y.cols()), data.clean_x,
                            targets, EvalSet{data.dev_x, data.dev_y},
                            cfg.train_config(Method::kBaselineClean));
  } else {
    baselines = prepare_baselines(data, cfg);
  }

  std::optional<RelationMatrix> relation;
  if (graph != nullptr && contains(cfg.methods, Method::kGuidedDistillation)) {
    relation = build_relation_matrix(*graph, dataset.label_names, cfg.beta);
  }

  std::vector<std::function<MethodResult()>> tasks;
  for (Method method : cfg.methods) {
    switch (method) {
      case Method::kBaselineClean:
        tasks.emplace_back([&, method] {
          return evaluated(method, baselines.clean.model, data, cfg.method_seed(method));
        });
        break;
      case Method::kBaselineNoisy:
        tasks.emplace_back([&, method] {
          return evaluated(method, baselines.noisy.model, data, cfg.method_seed(method));
        });
        break;
      case Method::kBaselineEnsemble:
        tasks.emplace_back([&, method] {
          MethodResult row;
          row.method = method;
          row.dev_map = mean_average_precision(
              ensemble_scores(baselines.clean.model, baselines.noisy.model, data.dev_x), data.dev_y);
          row.test_map = mean_average_precision(
              ensemble_scores(baselines.clean.model, baselines.noisy.model, data.test_x),
              data.test_y);
          row.seed = cfg.method_seed(method);
          return row;
        });
        break;
      case Method::kBootstrap:
        tasks.emplace_back(
            [&, method] { return run_revision_grid(data, cfg, method, Strategy::kBootstrap); });
        break;
      case Method::kLabelSmooth:
        tasks.emplace_back(
            [&, method] { return run_revision_grid(data, cfg, method, Strategy::kSmooth); });
        break;
      case Method::kFinetune:
        tasks.emplace_back([&, method] {
          StaticTargets targets(data.noisy_y);
          const auto trained = finetune(baselines.clean.model, data.noisy_x, targets,
                                        EvalSet{data.dev_x, data.dev_y}, cfg.train_config(method));
          return evaluated(method, trained.model, data, cfg.method_seed(method));
        });
        break;
      case Method::kDistillation:
        tasks.emplace_back([&, method] {
          return run_distillation(data, baselines, cfg, method, cfg.temperature, nullptr);
        });
        break;
      case Method::kGuidedDistillation:
        tasks.emplace_back([&, method] {
          return run_distillation(data, baselines, cfg, method, cfg.temperature, &*relation);
        });
        break;
      case Method::kUpperBound:
        tasks.emplace_back([&, method] {
          StaticTargets targets(*data.pool_truth);
          const auto trained = train_on_pool(data, cfg, method, targets);
          return evaluated(method, trained.model, data, cfg.method_seed(method));
        });
        break;
    }
  }

  std::vector<MethodResult> rows(tasks.size());
  const int jobs = std::max(1, cfg.jobs);
  std::vector<std::string> failures(tasks.size());
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(tasks.size()); ++i) {
    try {
      rows[i] = tasks[i]();
    } catch (const std::exception& e) {
      failures[i] = to_string(cfg.methods[i]) + ": " + e.what();
    }
  }
  for (const auto& f : failures) {
    if (!f.empty()) throw DataError("benchmark method failed: " + f);
  }

  ExperimentReport report;
  report.rows = std::move(rows);
  std::ostringstream serialized;
  write_dataset(dataset, serialized);
  report.dataset_hash = fnv1a_hex(serialized.str());
  report.config_hash = fnv1a_hex(cfg.to_json().dump());
  report.timestamp = utc_timestamp();
  return report;
}

std::vector<TemperatureResult> temperature_sweep(const PreparedData& data,
                                                 const Baselines& baselines,
                                                 const std::vector<double>& temperatures,
                                                 const BenchmarkConfig& cfg) {
  if (temperatures.empty()) throw ConfigError("temperature sweep: empty temperature list");
  std::vector<double> distinct;
  for (double t : temperatures) {
    if (!(t > 0.0)) throw ConfigError("temperature sweep: temperatures must be > 0");
    if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) distinct.push_back(t);
  }
  std::vector<TemperatureResult> out;
  for (double t : distinct) {
    const MethodResult row =
        run_distillation(data, baselines, cfg, Method::kDistillation, t, nullptr);
    out.push_back({t, row.dev_map, row.test_map});
  }
  return out;
}

std::vector<TemperatureResult> temperature_sweep(const Dataset& dataset,
                                                 const std::vector<double>& temperatures,
                                                 const BenchmarkConfig& cfg) {
  const PreparedData data(dataset);
  const Baselines baselines = prepare_baselines(data, cfg);
  return temperature_sweep(data, baselines, temperatures, cfg);
}

Ranking rank_by_pseudo(const Dataset& dataset, std::size_t class_index, double lambda,
                       double temperature, const MLPClassifier& aux,
                       const RelationMatrix* relation) {
  if (class_index >= dataset.label_count()) {
    throw LookupError("class index " + std::to_string(class_index) + " out of range");
  }
  std::vector<std::size_t> rows;
  for (std::size_t i : dataset.indices({Split::kCleanTrain, Split::kNoisyTrain})) {
    if (dataset.records[i].y_observed[class_index]) rows.push_back(i);
  }
  if (rows.empty()) {
    throw DataError("class " + dataset.label_names[class_index] + " has no observed positives");
  }
  const Matrix x = dataset.features(rows);
  const Matrix y = dataset.observed(rows);
  const Matrix soft = soft_predict(aux, x, temperature);

  auto build = [&](const Matrix& source) {
    const Matrix pseudo = distill_targets(y, source, lambda);
    std::vector<RankRow> out;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Record& r = dataset.records[rows[k]];
      RankRow row;
      row.id = r.id;
      row.pseudo = pseudo(k, class_index);
      if (r.y_true) row.truth = (*r.y_true)[class_index];
      row.observed = r.y_observed[class_index];
      out.push_back(std::move(row));
    }
    std::stable_sort(out.begin(), out.end(), [](const RankRow& a, const RankRow& b) {
      if (a.pseudo != b.pseudo) return a.pseudo > b.pseudo;
      return a.id < b.id;
    });
    return out;
  };

  Ranking ranking;
  ranking.distill = build(soft);
  if (relation) ranking.guided = build(guided_soft_matrix(*relation, soft));
  return ranking;
}

std::string ranking_csv(const std::vector<RankRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "rank,id,pseudo,true,observed\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out << (k + 1) << ',' << rows[k].id << ',' << rows[k].pseudo << ',';
    if (rows[k].truth) out << *rows[k].truth;
    out << ',' << rows[k].observed << '\n';
  }
  return out.str();
}

RankSeparation rank_separation(const std::vector<RankRow>& rows) {
  RankSeparation out;
  double true_sum = 0.0;
  double false_sum = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!rows[k].truth) continue;
    if (*rows[k].truth) {
      true_sum += static_cast<double>(k + 1);
      ++out.true_count;
    } else {
      false_sum += static_cast<double>(k + 1);
      ++out.false_count;
    }
  }
  if (out.true_count) out.mean_rank_true = true_sum / static_cast<double>(out.true_count);
  if (out.false_count) out.mean_rank_false = false_sum / static_cast<double>(out.false_count);
  return out;
}

Prop1Result verify_with_trained_auxiliary(const Dataset& dataset, const BenchmarkConfig& cfg,
                                          std::size_t ensemble_size,
                                          const std::vector<double>& grid,
                                          const Prop1Tolerances& tol) {
  const auto clean = dataset.indices({Split::kCleanTrain});
  const auto noisy = dataset.indices({Split::kNoisyTrain});
  const auto dev = dataset.indices({Split::kDev});
  if (clean.empty() || noisy.empty()) {
    throw DataError("trained-auxiliary verification needs clean-train and noisy-train records");
  }
  const Matrix clean_x = dataset.features(clean);
  const Matrix clean_y = dataset.observed(clean);
  const Matrix noisy_x = dataset.features(noisy);
  const Matrix y = dataset.observed(noisy);
  const Matrix truth = dataset.truth(noisy);
  const Matrix dev_x = dataset.features(dev);
  const Matrix dev_y = dataset.observed(dev);
  std::optional<EvalSet> dev_set;
  if (!dev.empty()) dev_set.emplace(EvalSet{dev_x, dev_y});

  const auto dims = model_dims(cfg, clean_x.cols(), clean_y.cols());
  auto train_aux = [&](std::uint64_t seed) {
    StaticTargets targets(clean_y);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    return train(dims, clean_x, targets, dev_set, tc).model;
  };

  const MLPClassifier aux = train_aux(cfg.method_seed(Method::kBaselineClean));
  const Matrix s = soft_predict(aux, noisy_x, cfg.temperature);
  std::vector<Matrix> ensemble;
  for (std::size_t k = 0; k < ensemble_size; ++k) {
    ensemble.push_back(soft_predict(train_aux(cfg.seed + 1000 + k), noisy_x, cfg.temperature));
  }
  return verify_blend_risk(y, s, truth, grid, tol, ConstructionMode::kTrainedAuxiliary, ensemble);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace noisy_distill
