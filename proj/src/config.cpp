#include "noisy_distill/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "noisy_distill/errors.hpp"

namespace noisy_distill {

namespace {

ConfigError bad_type(const std::string& key, const std::string& expected) {
  return ConfigError("key " + key + ": expected " + expected);
}

std::string fmt_double(double v) { return nlohmann::json(v).dump(); }

template <typename T>
std::string fmt_list(const std::vector<T>& values) {
  return nlohmann::json(values).dump();
}

void require_positive(const std::string& key, double v) {
  if (!(v > 0.0)) throw ConfigError("key " + key + ": must be > 0");
}

void require_rate(const std::string& key, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("key " + key + ": must lie in [0, 1]");
}

TrainConfig read_train(ConfigReader& r, const TrainConfig& defaults) {
  TrainConfig cfg;
  cfg.epochs = r.get_uint("epochs", defaults.epochs, "training epochs");
  cfg.initial_lr = r.get_double("initial_lr", defaults.initial_lr, "initial Adam step size");
  cfg.lr_decay = r.get_double("lr_decay", defaults.lr_decay, "step-size multiplier per decay");
  cfg.decay_every = r.get_uint("decay_every", defaults.decay_every, "epochs between decays");
  cfg.batch_size = r.get_uint("batch_size", defaults.batch_size, "mini-batch size");
  cfg.early_stop = r.get_bool("early_stop", defaults.early_stop,
                              "keep the best dev-mAP checkpoint");
  cfg.beta1 = r.get_double("adam_beta1", defaults.beta1, "Adam first-moment decay");
  cfg.beta2 = r.get_double("adam_beta2", defaults.beta2, "Adam second-moment decay");
  cfg.epsilon = r.get_double("adam_epsilon", defaults.epsilon, "Adam denominator offset");
  cfg.seed = r.get_uint("seed", defaults.seed, "global seed");
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::vector<std::size_t> read_hidden(ConfigReader& r) {
  return r.get_sizes("hidden", {64}, "hidden layer widths");
}

BenchmarkConfig read_bench(ConfigReader& r, bool with_methods) {
  BenchmarkConfig cfg;
  cfg.hidden = read_hidden(r);
  cfg.train = read_train(r, TrainConfig{});
  cfg.seed = cfg.train.seed;
  cfg.lambda = r.get_lambda("lambda", std::nullopt,
                            "pseudo-label weight on observed labels, or \"auto\"");
  cfg.temperature = r.get_double("temperature", 1.0, "distillation temperature");
  require_positive("temperature", cfg.temperature);
  cfg.beta = r.get_double("beta", kDefaultSiblingWeight, "sibling weight of the relation matrix");
  if (!(cfg.beta >= 0.0)) throw ConfigError("key beta: must be >= 0");
  if (with_methods) {
    cfg.revision_grid = r.get_doubles("revision_grid", cfg.revision_grid,
                                      "lambda candidates for Bootstrap and Label Smooth");
    for (double v : cfg.revision_grid) require_rate("revision_grid", v);
    std::vector<std::string> names;
    for (Method m : all_methods()) names.push_back(to_string(m));
    const auto chosen = r.get_strings("methods", names, "methods to run");
    cfg.methods.clear();
    for (const auto& name : chosen) {
      try {
        cfg.methods.push_back(parse_method(name));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("key methods: ") + e.what());
      }
    }
    const auto jobs = r.get_uint("jobs", 1, "concurrent method runs");
    if (jobs == 0) throw ConfigError("key jobs: must be >= 1");
    cfg.jobs = static_cast<int>(jobs);
  }
  return cfg;
}

}  // namespace

ConfigReader::ConfigReader(nlohmann::json doc) : doc_(std::move(doc)) {
  if (doc_.is_null()) doc_ = nlohmann::json::object();
  if (!doc_.is_object()) throw ConfigError("config must be a JSON object");
}

const nlohmann::json* ConfigReader::find(const std::string& key, const std::string& type,
                                         const std::string& fallback, const std::string& help) {
  keys_.push_back({key, type, fallback, help});
  const auto it = doc_.find(key);
  return it == doc_.end() ? nullptr : &*it;
}

bool ConfigReader::get_bool(const std::string& key, bool fallback, const std::string& help) {
  const auto* v = find(key, "bool", fallback ? "true" : "false", help);
  if (!v) return fallback;
  if (!v->is_boolean()) throw bad_type(key, "true or false");
  return v->get<bool>();
}

double ConfigReader::get_double(const std::string& key, double fallback, const std::string& help) {
  const auto* v = find(key, "number", fmt_double(fallback), help);
  if (!v) return fallback;
  if (!v->is_number()) throw bad_type(key, "a number");
  return v->get<double>();
}

std::uint64_t ConfigReader::get_uint(const std::string& key, std::uint64_t fallback,
                                     const std::string& help) {
  const auto* v = find(key, "integer", std::to_string(fallback), help);
  if (!v) return fallback;
  if (v->is_number_unsigned()) return v->get<std::uint64_t>();
  if (v->is_number_integer()) {
    if (v->get<std::int64_t>() < 0) throw ConfigError("key " + key + ": must be >= 0");
    return static_cast<std::uint64_t>(v->get<std::int64_t>());
  }
  throw bad_type(key, "a non-negative integer");
}

std::string ConfigReader::get_string(const std::string& key, const std::string& fallback,
                                     const std::string& help) {
  const auto* v = find(key, "string", fallback.empty() ? "\"\"" : "\"" + fallback + "\"", help);
  if (!v) return fallback;
  if (!v->is_string()) throw bad_type(key, "a string");
  return v->get<std::string>();
}

std::vector<double> ConfigReader::get_doubles(const std::string& key,
                                              const std::vector<double>& fallback,
                                              const std::string& help) {
  const auto* v = find(key, "number list", fmt_list(fallback), help);
  if (!v) return fallback;
  if (!v->is_array()) throw bad_type(key, "a list of numbers");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number()) throw bad_type(key, "a list of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::size_t> ConfigReader::get_sizes(const std::string& key,
                                                 const std::vector<std::size_t>& fallback,
                                                 const std::string& help) {
  const auto* v = find(key, "integer list", fmt_list(fallback), help);
  if (!v) return fallback;
  if (!v->is_array()) throw bad_type(key, "a list of positive integers");
  std::vector<std::size_t> out;
  for (const auto& e : *v) {
    if (!e.is_number_integer() || e.get<std::int64_t>() <= 0) {
      throw bad_type(key, "a list of positive integers");
    }
    out.push_back(static_cast<std::size_t>(e.get<std::int64_t>()));
  }
  return out;
}

std::vector<std::string> ConfigReader::get_strings(const std::string& key,
                                                   const std::vector<std::string>& fallback,
                                                   const std::string& help) {
  const auto* v = find(key, "string list", fmt_list(fallback), help);
  if (!v) return fallback;
  if (!v->is_array()) throw bad_type(key, "a list of strings");
  std::vector<std::string> out;
  for (const auto& e : *v) {
    if (!e.is_string()) throw bad_type(key, "a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::optional<double> ConfigReader::get_lambda(const std::string& key,
                                               std::optional<double> fallback,
                                               const std::string& help) {
  const auto* v =
      find(key, "number|\"auto\"", fallback ? fmt_double(*fallback) : "\"auto\"", help);
  if (!v) return fallback;
  if (v->is_string() && v->get<std::string>() == "auto") return std::nullopt;
  if (!v->is_number()) throw bad_type(key, "a number in [0, 1] or \"auto\"");
  const double lambda = v->get<double>();
  require_rate(key, lambda);
  return lambda;
}

void ConfigReader::finish() const {
  for (const auto& item : doc_.items()) {
    const bool known = std::any_of(keys_.begin(), keys_.end(),
                                   [&](const KeyInfo& k) { return k.name == item.key(); });
    if (!known) throw ConfigError("unknown key: " + item.key());
  }
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-data",     "train",      "benchmark",
                                              "verify-prop1", "temp-sweep", "rank"};
  return names;
}

GenDataConfig parse_gen_data(ConfigReader& r) {
  GenDataConfig cfg;
  SyntheticSpec& s = cfg.spec;
  const SyntheticSpec d;
  s.parents = r.get_uint("parents", d.parents, "parent entities in the hierarchy");
  s.children_per_parent =
      r.get_uint("children_per_parent", d.children_per_parent, "labels under each parent");
  s.feature_dim = r.get_uint("feature_dim", d.feature_dim, "feature dimension");
  s.min_labels = r.get_uint("min_labels", d.min_labels, "fewest true labels per record");
  s.max_labels = r.get_uint("max_labels", d.max_labels, "most true labels per record");
  s.samples = r.get_uint("samples", d.samples, "records to generate");
  s.parent_spread = r.get_double("parent_spread", d.parent_spread, "sd of parent centers");
  s.child_spread =
      r.get_double("child_spread", d.child_spread, "sd of label centers around their parent");
  s.cluster_spread =
      r.get_double("cluster_spread", d.cluster_spread, "sd of features around the label mean");
  s.background_spread =
      r.get_double("background_spread", d.background_spread, "sd of background features");
  s.noise.flip_rate =
      r.get_double("flip_rate", d.noise.flip_rate, "probability a true positive is replaced");
  s.noise.sibling_bias = r.get_double("sibling_bias", d.noise.sibling_bias,
                                      "probability a replacement is a sibling label");
  s.noise.background_fraction = r.get_double("background_fraction", d.noise.background_fraction,
                                             "fraction of each split replaced by background");
  const auto ratios = r.get_doubles(
      "split_ratios", {d.split_ratios.train, d.split_ratios.dev, d.split_ratios.test},
      "train:dev:test weights");
  if (ratios.size() != 3) throw ConfigError("key split_ratios: expected three numbers");
  s.split_ratios = {ratios[0], ratios[1], ratios[2]};
  s.clean_fraction =
      r.get_double("clean_fraction", d.clean_fraction, "fraction of train tagged clean-train");
  s.seed = r.get_uint("seed", d.seed, "global seed");
  s.noise.seed = s.seed;
  cfg.dataset_path = r.get_string("dataset", "dataset.jsonl", "output dataset (JSON lines)");
  cfg.graph_path = r.get_string("graph", "graph.tsv", "output knowledge graph (TSV triples)");
  r.finish();
  s.validate();
  return cfg;
}

TrainCommandConfig parse_train(ConfigReader& r) {
  TrainCommandConfig cfg;
  cfg.dataset_path = r.get_string("dataset", "dataset.jsonl", "input dataset");
  cfg.graph_path = r.get_string("graph", "", "knowledge graph (guided-distill)");
  cfg.aux_model_path =
      r.get_string("aux_model", "", "auxiliary model (distill, guided-distill)");
  cfg.model_path = r.get_string("model", "model.json", "output model");
  cfg.history_path = r.get_string("history", "history.csv", "output per-epoch history");
  const auto splits = r.get_strings("train_splits", {"clean-train", "noisy-train"},
                                    "splits used as training data");
  for (const auto& name : splits) {
    try {
      cfg.train_splits.push_back(parse_split(name));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("key train_splits: ") + e.what());
    }
  }
  if (cfg.train_splits.empty()) throw ConfigError("key train_splits: must not be empty");
  const auto strategy = r.get_string(
      "strategy", "noisy",
      "noisy, distill, guided-distill, smooth, bootstrap or clean-truth");
  try {
    cfg.strategy = parse_strategy(strategy);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("key strategy: ") + e.what());
  }
  cfg.lambda = r.get_lambda("lambda", 0.5, "pseudo-label weight on observed labels");
  cfg.temperature = r.get_double("temperature", 1.0, "distillation temperature");
  require_positive("temperature", cfg.temperature);
  cfg.beta = r.get_double("beta", kDefaultSiblingWeight, "sibling weight of the relation matrix");
  if (!(cfg.beta >= 0.0)) throw ConfigError("key beta: must be >= 0");
  cfg.hidden = read_hidden(r);
  cfg.train = read_train(r, TrainConfig{});
  r.finish();
  const bool needs_aux =
      cfg.strategy == Strategy::kDistill || cfg.strategy == Strategy::kGuidedDistill;
  if (needs_aux && cfg.aux_model_path.empty()) {
    throw ConfigError("strategy " + strategy + " requires aux_model");
  }
  if (cfg.strategy == Strategy::kGuidedDistill && cfg.graph_path.empty()) {
    throw ConfigError("strategy guided-distill requires graph");
  }
  if (!cfg.lambda && !needs_aux) {
    throw ConfigError("key lambda: \"auto\" is only available for distill strategies");
  }
  return cfg;
}

BenchmarkCommandConfig parse_benchmark(ConfigReader& r) {
  BenchmarkCommandConfig cfg;
  cfg.dataset_path = r.get_string("dataset", "dataset.jsonl", "input dataset");
  cfg.graph_path = r.get_string("graph", "graph.tsv", "knowledge graph (Guided Distillation)");
  cfg.output_dir = r.get_string("output_dir", "benchmark", "directory for the reports");
  cfg.seed_count = r.get_uint("seeds", 1, "number of seeds, seed .. seed + seeds - 1");
  if (cfg.seed_count == 0) throw ConfigError("key seeds: must be >= 1");
  cfg.bench = read_bench(r, true);
  r.finish();
  return cfg;
}

VerifyCommandConfig parse_verify(ConfigReader& r) {
  VerifyCommandConfig cfg;
  const auto mode = r.get_string("mode", "independent", "independent, correlated or trained");
  try {
    cfg.mode = parse_construction_mode(mode);
  } catch (const Error& e) {
    throw ConfigError(std::string("key mode: ") + e.what());
  }
  cfg.n = r.get_uint("n", cfg.n, "samples (independent and correlated modes)");
  cfg.labels = r.get_uint("labels", cfg.labels, "label count (independent and correlated modes)");
  cfg.flip_rate = r.get_double("flip_rate", cfg.flip_rate, "per-coordinate flip probability of y");
  cfg.sigma = r.get_double("sigma", cfg.sigma, "sd of the Gaussian noise on s");
  cfg.ensemble_size =
      r.get_uint("ensemble_size", cfg.ensemble_size, "soft predictors for bias/variance");
  cfg.grid_points = r.get_uint("grid_points", cfg.grid_points, "lambda grid size over [0, 1]");
  cfg.tolerances.standard_errors = r.get_double(
      "standard_errors", cfg.tolerances.standard_errors, "strict-improvement margin in SEs");
  cfg.tolerances.lambda_tolerance = r.get_double(
      "lambda_tolerance", cfg.tolerances.lambda_tolerance, "allowed |argmin - lambda*|");
  cfg.tolerances.relative_min_tolerance =
      r.get_double("min_tolerance", cfg.tolerances.relative_min_tolerance,
                   "allowed relative error of the minimum risk");
  cfg.tolerances.relative_fit_tolerance =
      r.get_double("fit_tolerance", cfg.tolerances.relative_fit_tolerance,
                   "allowed relative residual of the quadratic fit");
  cfg.dataset_path = r.get_string("dataset", "", "dataset (trained mode)");
  cfg.bench = read_bench(r, false);
  cfg.seed = cfg.bench.seed;
  cfg.report_path = r.get_string("report", "risk_report.json", "output report");
  cfg.curve_path = r.get_string("curve", "risk_curve.csv", "output risk curve");
  r.finish();

  if (cfg.mode != ConstructionMode::kTrainedAuxiliary) {
    if (cfg.n == 0) throw ConfigError("key n: must be >= 1");
    if (cfg.labels == 0) throw ConfigError("key labels: must be >= 1");
  } else if (cfg.dataset_path.empty()) {
    throw ConfigError("mode trained requires dataset");
  }
  require_rate("flip_rate", cfg.flip_rate);
  if (!(cfg.sigma >= 0.0)) throw ConfigError("key sigma: must be >= 0");
  if (cfg.grid_points < 2) throw ConfigError("key grid_points: must be >= 2");
  if (cfg.ensemble_size == 1) throw ConfigError("key ensemble_size: must be 0 or >= 2");
  return cfg;
}

TempSweepCommandConfig parse_temp_sweep(ConfigReader& r) {
  TempSweepCommandConfig cfg;
  cfg.dataset_path = r.get_string("dataset", "dataset.jsonl", "input dataset");
  cfg.output_path = r.get_string("output", "temperature_sweep.csv", "output CSV");
  cfg.temperatures =
      r.get_doubles("temperatures", {1.0, 2.0, 5.0, 10.0}, "distillation temperatures");
  if (cfg.temperatures.empty()) throw ConfigError("key temperatures: must not be empty");
  for (double t : cfg.temperatures) require_positive("temperatures", t);
  cfg.bench = read_bench(r, false);
  r.finish();
  return cfg;
}

RankCommandConfig parse_rank(ConfigReader& r) {
  RankCommandConfig cfg;
  cfg.dataset_path = r.get_string("dataset", "dataset.jsonl", "input dataset");
  cfg.graph_path = r.get_string("graph", "", "knowledge graph (guided ranking)");
  cfg.aux_model_path = r.get_string("aux_model", "aux_model.json", "trained auxiliary model");
  cfg.noisy_model_path =
      r.get_string("noisy_model", "", "noisy baseline model (needed when lambda is \"auto\")");
  cfg.class_name = r.get_string("class", "", "label to rank");
  cfg.lambda = r.get_lambda("lambda", 0.5, "pseudo-label weight on observed labels");
  cfg.temperature = r.get_double("temperature", 1.0, "distillation temperature");
  require_positive("temperature", cfg.temperature);
  cfg.beta = r.get_double("beta", kDefaultSiblingWeight, "sibling weight of the relation matrix");
  if (!(cfg.beta >= 0.0)) throw ConfigError("key beta: must be >= 0");
  cfg.guided = r.get_bool("guided", false, "also emit the guided ranking");
  cfg.distill_output = r.get_string("output", "ranking.csv", "output ranking CSV");
  cfg.guided_output =
      r.get_string("guided_output", "ranking_guided.csv", "output guided ranking CSV");
  // Ranking draws no random numbers; the key is accepted so a global seed
  // (NOISY_DISTILL_SEED, --seed) can be set for every command alike.
  r.get_uint("seed", 0, "unused by rank");
  r.finish();
  if (cfg.class_name.empty()) throw ConfigError("key class: required");
  if (cfg.guided && cfg.graph_path.empty()) throw ConfigError("guided ranking requires graph");
  if (!cfg.lambda && cfg.noisy_model_path.empty()) {
    throw ConfigError("key lambda: \"auto\" requires noisy_model");
  }
  return cfg;
}

std::vector<KeyInfo> command_keys(const std::string& command) {
  ConfigReader r(nlohmann::json::object());
  // Defaults can fail cross-key validation (rank needs a class); the key list
  // is complete by then.
  try {
    if (command == "gen-data") {
      parse_gen_data(r);
    } else if (command == "train") {
      parse_train(r);
    } else if (command == "benchmark") {
      parse_benchmark(r);
    } else if (command == "verify-prop1") {
      parse_verify(r);
    } else if (command == "temp-sweep") {
      parse_temp_sweep(r);
    } else if (command == "rank") {
      parse_rank(r);
    } else {
      throw ConfigError("unknown command: " + command);
    }
  } catch (const ConfigError& e) {
    if (r.keys().empty()) throw;
  }
  return r.keys();
}

std::string describe_keys(const std::string& command) {
  const auto keys = command_keys(command);
  std::size_t width = 0;
  for (const auto& k : keys) width = std::max(width, k.name.size());
  std::ostringstream out;
  out << "Config keys for " << command << ":\n";
  for (const auto& k : keys) {
    out << "  " << k.name << std::string(width - k.name.size() + 2, ' ') << k.help << " ("
        << k.type << ", default " << k.default_value << ")\n";
  }
  return out.str();
}

nlohmann::json load_config_document(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(path + ": config must be a JSON object");
  return doc;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  doc[key] = std::move(value);
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* raw = std::getenv("NOISY_DISTILL_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string text(raw);
  if (!std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ConfigError("NOISY_DISTILL_SEED must be a non-negative integer, got " + text);
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError("NOISY_DISTILL_SEED out of range: " + text);
  }
}

}  // namespace noisy_distill
