#include "noisy_distill/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "noisy_distill/errors.hpp"
#include "noisy_distill/metrics.hpp"

namespace noisy_distill {

namespace {

namespace fs = std::filesystem;

void ensure_parent(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  const fs::path p(path);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
}

std::vector<std::size_t> dims_for(const std::vector<std::size_t>& hidden, std::size_t in,
                                  std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

void print_rows(const std::vector<MethodResult>& rows, std::ostream& out) {
  out << std::left << std::setw(22) << "method" << std::setw(9) << "lambda" << std::setw(6) << "T"
      << std::setw(9) << "dev_mAP" << "test_mAP\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(22) << to_string(r.method) << std::setw(9)
        << (r.lambda ? fixed(*r.lambda) : "-") << std::setw(6)
        << (r.temperature ? fixed(*r.temperature, 1) : "-") << std::setw(9) << fixed(r.dev_map)
        << fixed(r.test_map) << '\n';
  }
}

Dataset load_input_dataset(const std::string& path) {
  require_file(path, "dataset");
  return load_dataset(path);
}

std::size_t class_index(const Dataset& dataset, const std::string& name) {
  const auto it = std::find(dataset.label_names.begin(), dataset.label_names.end(), name);
  if (it == dataset.label_names.end()) {
    std::string valid;
    for (const auto& n : dataset.label_names) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown class: " + name + " (valid: " + valid + ")");
  }
  return static_cast<std::size_t>(it - dataset.label_names.begin());
}

nlohmann::json prop1_json(const Prop1Result& result, ConstructionMode mode) {
  nlohmann::json doc = to_json(result.report);
  doc["mode"] = to_string(mode);
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : result.checks) {
    checks.push_back({{"name", c.name},
                      {"applicable", c.applicable},
                      {"passed", c.passed},
                      {"detail", c.detail}});
  }
  doc["checks"] = std::move(checks);
  doc["all_passed"] = result.all_passed();
  return doc;
}

}  // namespace

nlohmann::json resolve_config(const std::string& command, const CommandOptions& options) {
  nlohmann::json doc = load_config_document(options.config_path);
  if (const auto env_seed = seed_from_environment()) doc["seed"] = *env_seed;
  for (const auto& assignment : options.overrides) apply_override(doc, assignment);
  if (options.seed) doc["seed"] = *options.seed;
  if (options.jobs) {
    if (command != "benchmark") throw ConfigError("--jobs applies to benchmark only");
    doc["jobs"] = *options.jobs;
  }
  if (options.lambda) doc["lambda"] = *options.lambda;
  if (options.guided) {
    if (command != "rank") throw ConfigError("--guided applies to rank only");
    doc["guided"] = true;
  }
  if (options.class_name) {
    if (command != "rank") throw ConfigError("--class applies to rank only");
    doc["class"] = *options.class_name;
  }
  return doc;
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& out,
                std::ostream& err) {
  try {
    ConfigReader reader(resolve_config(command, options));
    if (command == "gen-data") return cmd_gen_data(parse_gen_data(reader), out);
    if (command == "train") return cmd_train(parse_train(reader), out);
    if (command == "benchmark") return cmd_benchmark(parse_benchmark(reader), out);
    if (command == "verify-prop1") return cmd_verify_prop1(parse_verify(reader), out);
    if (command == "temp-sweep") return cmd_temp_sweep(parse_temp_sweep(reader), out);
    if (command == "rank") return cmd_rank(parse_rank(reader), out);
    err << "error: unknown command: " << command << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

int cmd_gen_data(const GenDataConfig& cfg, std::ostream& out) {
  const GeneratedData generated = generate(cfg.spec);
  const Dataset& data = generated.dataset;
  ensure_parent(cfg.dataset_path);
  ensure_parent(cfg.graph_path);
  save_dataset(data, cfg.dataset_path);
  save_triples(generated.graph, cfg.graph_path);

  out << "wrote " << data.records.size() << " records (" << data.label_count() << " labels, d="
      << data.feature_dim << ") to " << cfg.dataset_path << '\n';
  out << "wrote " << generated.graph.triples().size() << " triples to " << cfg.graph_path << '\n';
  for (Split s : {Split::kCleanTrain, Split::kNoisyTrain, Split::kDev, Split::kTest}) {
    out << "  " << std::left << std::setw(12) << to_string(s) << data.count(s) << '\n';
  }
  std::size_t true_pos = 0, kept = 0, spurious = 0, background = 0;
  for (const auto& r : data.records) {
    if (r.split != Split::kNoisyTrain) continue;
    const bool is_background =
        std::none_of(r.y_true->begin(), r.y_true->end(), [](std::uint8_t v) { return v != 0; });
    background += is_background;
    for (std::size_t m = 0; m < data.label_count(); ++m) {
      true_pos += (*r.y_true)[m];
      kept += (*r.y_true)[m] && r.y_observed[m];
      spurious += !(*r.y_true)[m] && r.y_observed[m];
    }
  }
  if (true_pos > 0) {
    out << "noisy-train: " << fixed(1.0 - static_cast<double>(kept) / true_pos)
        << " of true positives replaced, " << spurious << " spurious positives, " << background
        << " background records\n";
  }
  const auto noisy = data.indices({Split::kNoisyTrain});
  if (!noisy.empty()) {
    out << "noisy-train label risk vs truth: "
        << fixed(risk(data.observed(noisy), data.truth(noisy))) << '\n';
  }
  return kExitOk;
}

int cmd_train(const TrainCommandConfig& cfg, std::ostream& out) {
  const Dataset data = load_input_dataset(cfg.dataset_path);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    if (std::find(cfg.train_splits.begin(), cfg.train_splits.end(), data.records[i].split) !=
        cfg.train_splits.end()) {
      rows.push_back(i);
    }
  }
  if (rows.empty()) throw DataError("no records in the configured train_splits");
  const Matrix x = data.features(rows);
  const Matrix y = data.observed(rows);
  std::optional<Matrix> truth;
  if (cfg.strategy == Strategy::kCleanTruth) truth = data.truth(rows);

  const auto dev_rows = data.indices({Split::kDev});
  const Matrix dev_x = data.features(dev_rows);
  const Matrix dev_y = data.observed(dev_rows);
  std::optional<EvalSet> dev;
  if (!dev_rows.empty()) dev.emplace(EvalSet{dev_x, dev_y});

  std::optional<MLPClassifier> aux;
  if (!cfg.aux_model_path.empty()) {
    require_file(cfg.aux_model_path, "aux_model");
    aux = load_model(cfg.aux_model_path);
  }
  const auto dims = dims_for(cfg.hidden, data.feature_dim, data.label_count());

  PseudoLabelSpec spec;
  spec.strategy = cfg.strategy;
  spec.temperature = cfg.temperature;
  if (cfg.lambda) {
    spec.lambda = *cfg.lambda;
  } else {
    if (!dev) throw DataError("lambda \"auto\" needs dev records");
    StaticTargets noisy_targets(y);
    TrainConfig noisy_cfg = cfg.train;
    noisy_cfg.seed = cfg.train.seed ^ method_index(Method::kBaselineNoisy);
    const auto noisy = train(dims, x, noisy_targets, dev, noisy_cfg);
    const double clean_map = mean_average_precision(aux->forward(dev_x), dev_y);
    const double noisy_map = mean_average_precision(noisy.model.forward(dev_x), dev_y);
    spec.lambda = lambda_heuristic(clean_map, noisy_map);
    out << "lambda (auto) = " << fixed(spec.lambda) << " from dev mAP " << fixed(clean_map)
        << " (aux) and " << fixed(noisy_map) << " (noisy)\n";
  }
  if (cfg.strategy == Strategy::kGuidedDistill) {
    require_file(cfg.graph_path, "graph");
    spec.relation = build_relation_matrix(load_triples(cfg.graph_path), data.label_names, cfg.beta);
  }

  auto targets = build_target_provider(spec, x, y, truth ? &*truth : nullptr, aux ? &*aux : nullptr);
  const TrainResult result = train(dims, x, *targets, dev, cfg.train);
  ensure_parent(cfg.model_path);
  save_model(result.model, cfg.model_path);

  std::ostringstream history;
  history.precision(17);
  history << "epoch,train_loss,dev_map\n";
  for (std::size_t e = 0; e < result.history.train_loss.size(); ++e) {
    history << e << ',' << result.history.train_loss[e] << ',';
    if (e < result.history.dev_map.size()) history << result.history.dev_map[e];
    history << '\n';
  }
  write_text(cfg.history_path, history.str());

  out << "trained " << to_string(cfg.strategy) << " model on " << rows.size() << " records; best epoch "
      << result.history.best_epoch << '\n';
  if (dev) out << "dev mAP  " << fixed(mean_average_precision(result.model.forward(dev_x), dev_y)) << '\n';
  const auto test_rows = data.indices({Split::kTest});
  if (!test_rows.empty()) {
    out << "test mAP " << fixed(mean_average_precision(result.model.forward(data.features(test_rows)),
                                                       data.observed(test_rows)))
        << '\n';
  }
  out << "wrote " << cfg.model_path << " and " << cfg.history_path << '\n';
  return kExitOk;
}

std::vector<MethodResult> median_rows(const std::vector<ExperimentReport>& reports) {
  std::vector<MethodResult> out;
  if (reports.empty()) return out;
  for (const auto& first : reports.front().rows) {
    std::vector<double> dev, test, lambda, temperature;
    for (const auto& report : reports) {
      const auto& r = report.row(first.method);
      dev.push_back(r.dev_map);
      test.push_back(r.test_map);
      if (r.lambda) lambda.push_back(*r.lambda);
      if (r.temperature) temperature.push_back(*r.temperature);
    }
    MethodResult m;
    m.method = first.method;
    m.dev_map = median(dev);
    m.test_map = median(test);
    if (!lambda.empty()) m.lambda = median(lambda);
    if (!temperature.empty()) m.temperature = median(temperature);
    m.seed = first.seed;
    out.push_back(m);
  }
  return out;
}

int cmd_benchmark(const BenchmarkCommandConfig& cfg, std::ostream& out) {
  const Dataset data = load_input_dataset(cfg.dataset_path);
  std::optional<KnowledgeGraph> graph;
  if (!cfg.graph_path.empty()) {
    require_file(cfg.graph_path, "graph");
    graph = load_triples(cfg.graph_path);
  }

  std::vector<ExperimentReport> reports;
  for (std::size_t k = 0; k < cfg.seed_count; ++k) {
    BenchmarkConfig bench = cfg.bench;
    bench.seed = cfg.bench.seed + k;
    ExperimentReport report = run_benchmark(data, graph ? &*graph : nullptr, bench);
    const std::string stem = cfg.output_dir + "/report_seed" + std::to_string(bench.seed);
    write_text(stem + ".json", to_json(report).dump(2) + "\n");
    write_text(stem + ".csv", report_csv(report.rows));
    out << "seed " << bench.seed << '\n';
    print_rows(report.rows, out);
    reports.push_back(std::move(report));
  }

  const auto medians = median_rows(reports);
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "method,lambda,T,dev_map,test_map,seeds\n";
  for (const auto& r : medians) {
    rows.push_back({{"method", to_string(r.method)},
                    {"lambda", r.lambda ? nlohmann::json(*r.lambda) : nlohmann::json(nullptr)},
                    {"T", r.temperature ? nlohmann::json(*r.temperature) : nlohmann::json(nullptr)},
                    {"dev_map", r.dev_map},
                    {"test_map", r.test_map}});
    csv << to_string(r.method) << ',';
    if (r.lambda) csv << *r.lambda;
    csv << ',';
    if (r.temperature) csv << *r.temperature;
    csv << ',' << r.dev_map << ',' << r.test_map << ',' << reports.size() << '\n';
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < cfg.seed_count; ++k) seeds.push_back(cfg.bench.seed + k);
  const nlohmann::json aggregate = {
      {"statistic", "median"},
      {"seeds", seeds},
      {"rows", std::move(rows)},
      {"metadata",
       {{"dataset_hash", reports.front().dataset_hash},
        {"config_hash", reports.front().config_hash},
        {"timestamp", reports.back().timestamp}}}};
  write_text(cfg.output_dir + "/aggregate.json", aggregate.dump(2) + "\n");
  write_text(cfg.output_dir + "/aggregate.csv", csv.str());
  if (cfg.seed_count > 1) {
    out << "median over " << cfg.seed_count << " seeds\n";
    print_rows(medians, out);
  }
  out << "wrote reports to " << cfg.output_dir << '\n';
  return kExitOk;
}

int cmd_verify_prop1(const VerifyCommandConfig& cfg, std::ostream& out) {
  const auto grid = lambda_grid(cfg.grid_points);
  Prop1Result result;
  if (cfg.mode == ConstructionMode::kTrainedAuxiliary) {
    const Dataset data = load_input_dataset(cfg.dataset_path);
    result = verify_with_trained_auxiliary(data, cfg.bench, cfg.ensemble_size, grid, cfg.tolerances);
  } else {
    SyntheticSources src = make_independent_sources(cfg.n, cfg.labels, cfg.flip_rate, cfg.sigma,
                                                    cfg.ensemble_size, cfg.seed);
    if (cfg.mode == ConstructionMode::kCorrelated) {
      src.s = src.y;
      src.ensemble.clear();
    }
    result = verify_blend_risk(src.y, src.s, src.truth, grid, cfg.tolerances, cfg.mode,
                               src.ensemble);
  }
  write_text(cfg.report_path, prop1_json(result, cfg.mode).dump(2) + "\n");
  write_text(cfg.curve_path, curve_csv(result.report.curve));

  const RiskReport& r = result.report;
  out << "R_y=" << fixed(r.r_y, 6) << " R_s=" << fixed(r.r_s, 6) << " R_u=" << fixed(r.r_u, 6)
      << " cross=" << fixed(r.cross.mean, 6) << "\n";
  out << "lambda* predicted " << fixed(r.lambda_star_predicted) << ", empirical "
      << fixed(r.lambda_star_empirical) << "; R_min predicted " << fixed(r.r_min_predicted, 6)
      << ", empirical " << fixed(r.r_min_empirical, 6) << '\n';
  for (const auto& c : result.checks) {
    const char* tag = !c.applicable ? "SKIP" : (c.passed ? "PASS" : "FAIL");
    out << tag << ' ' << c.name << ": " << c.detail << '\n';
  }
  out << "wrote " << cfg.report_path << " and " << cfg.curve_path << '\n';
  return result.all_passed() ? kExitOk : kExitCheckFailed;
}

int cmd_temp_sweep(const TempSweepCommandConfig& cfg, std::ostream& out) {
  const Dataset data = load_input_dataset(cfg.dataset_path);
  const auto rows = temperature_sweep(data, cfg.temperatures, cfg.bench);
  std::ostringstream csv;
  csv.precision(17);
  csv << "T,dev_map,test_map\n";
  double lo = rows.front().test_map, hi = lo;
  for (const auto& r : rows) {
    csv << r.temperature << ',' << r.dev_map << ',' << r.test_map << '\n';
    out << "T=" << r.temperature << " dev mAP " << fixed(r.dev_map) << " test mAP "
        << fixed(r.test_map) << '\n';
    lo = std::min(lo, r.test_map);
    hi = std::max(hi, r.test_map);
  }
  out << "test mAP spread (max - min): " << fixed(hi - lo) << '\n';
  write_text(cfg.output_path, csv.str());
  out << "wrote " << cfg.output_path << '\n';
  return kExitOk;
}

int cmd_rank(const RankCommandConfig& cfg, std::ostream& out) {
  const Dataset data = load_input_dataset(cfg.dataset_path);
  const std::size_t cls = class_index(data, cfg.class_name);
  require_file(cfg.aux_model_path, "aux_model");
  const MLPClassifier aux = load_model(cfg.aux_model_path);

  double lambda = 0.0;
  if (cfg.lambda) {
    lambda = *cfg.lambda;
  } else {
    require_file(cfg.noisy_model_path, "noisy_model");
    const MLPClassifier noisy = load_model(cfg.noisy_model_path);
    const auto dev = data.indices({Split::kDev});
    if (dev.empty()) throw DataError("lambda \"auto\" needs dev records");
    const Matrix dev_x = data.features(dev);
    const Matrix dev_y = data.observed(dev);
    lambda = lambda_heuristic(mean_average_precision(aux.forward(dev_x), dev_y),
                              mean_average_precision(noisy.forward(dev_x), dev_y));
  }

  std::optional<RelationMatrix> relation;
  if (cfg.guided) {
    require_file(cfg.graph_path, "graph");
    relation = build_relation_matrix(load_triples(cfg.graph_path), data.label_names, cfg.beta);
  }
  const Ranking ranking =
      rank_by_pseudo(data, cls, lambda, cfg.temperature, aux, relation ? &*relation : nullptr);
  write_text(cfg.distill_output, ranking_csv(ranking.distill));
  out << "ranked " << ranking.distill.size() << " observed positives of " << cfg.class_name
      << " with lambda " << fixed(lambda) << '\n';
  auto summarize = [&](const char* label, const std::vector<RankRow>& rows) {
    const RankSeparation sep = rank_separation(rows);
    if (sep.true_count && sep.false_count) {
      out << label << ": mean rank of true positives " << fixed(sep.mean_rank_true, 1)
          << ", of false positives " << fixed(sep.mean_rank_false, 1) << '\n';
    }
  };
  summarize("distill", ranking.distill);
  out << "wrote " << cfg.distill_output << '\n';
  if (relation) {
    write_text(cfg.guided_output, ranking_csv(ranking.guided));
    summarize("guided", ranking.guided);
    out << "wrote " << cfg.guided_output << '\n';
  }
  return kExitOk;
}

}  // namespace noisy_distill
