#pragma once

// Per-command run configuration: a flat JSON object whose keys are checked
// strictly, with command-line overrides applied on top.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisy_distill/datagen.hpp"
#include "noisy_distill/experiment.hpp"
#include "noisy_distill/risk.hpp"

namespace noisy_distill {

struct KeyInfo {
  std::string name;
  std::string type;
  std::string default_value;
  std::string help;
};

// Reads typed values out of a JSON object and remembers which keys were
// asked for, so leftovers can be rejected and key listings generated.
class ConfigReader {
 public:
  explicit ConfigReader(nlohmann::json doc);

  bool get_bool(const std::string& key, bool fallback, const std::string& help);
  double get_double(const std::string& key, double fallback, const std::string& help);
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback, const std::string& help);
  std::string get_string(const std::string& key, const std::string& fallback,
                         const std::string& help);
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback,
                                  const std::string& help);
  std::vector<std::size_t> get_sizes(const std::string& key,
                                     const std::vector<std::size_t>& fallback,
                                     const std::string& help);
  std::vector<std::string> get_strings(const std::string& key,
                                       const std::vector<std::string>& fallback,
                                       const std::string& help);
  // A number in [0, 1] or the string "auto" (returned as nullopt).
  std::optional<double> get_lambda(const std::string& key, std::optional<double> fallback,
                                   const std::string& help);

  // Throws ConfigError("unknown key: <k>") for the first key never read.
  void finish() const;
  const std::vector<KeyInfo>& keys() const noexcept { return keys_; }

 private:
  const nlohmann::json* find(const std::string& key, const std::string& type,
                             const std::string& fallback, const std::string& help);

  nlohmann::json doc_;
  std::vector<KeyInfo> keys_;
};

struct GenDataConfig {
  SyntheticSpec spec;
  std::string dataset_path;
  std::string graph_path;
};

struct TrainCommandConfig {
  std::string dataset_path;
  std::string graph_path;
  std::string aux_model_path;
  std::string model_path;
  std::string history_path;
  std::vector<Split> train_splits;
  Strategy strategy = Strategy::kNoisy;
  // nullopt: derived from the auxiliary model and a noisy baseline.
  std::optional<double> lambda;
  double temperature = 1.0;
  double beta = kDefaultSiblingWeight;
  std::vector<std::size_t> hidden;
  TrainConfig train;
};

struct BenchmarkCommandConfig {
  std::string dataset_path;
  std::string graph_path;
  std::string output_dir;
  std::size_t seed_count = 1;
  BenchmarkConfig bench;
};

struct VerifyCommandConfig {
  ConstructionMode mode = ConstructionMode::kIndependent;
  std::size_t n = 10000;
  std::size_t labels = 10;
  double flip_rate = 0.3;
  double sigma = 0.3;
  std::size_t ensemble_size = 5;
  std::size_t grid_points = 101;
  std::uint64_t seed = 0;
  Prop1Tolerances tolerances;
  // Trained-auxiliary mode: the dataset and the auxiliary's training schedule.
  std::string dataset_path;
  BenchmarkConfig bench;
  std::string report_path;
  std::string curve_path;
};

struct TempSweepCommandConfig {
  std::string dataset_path;
  std::string output_path;
  std::vector<double> temperatures;
  BenchmarkConfig bench;
};

struct RankCommandConfig {
  std::string dataset_path;
  std::string graph_path;
  std::string aux_model_path;
  std::string noisy_model_path;
  std::string class_name;
  std::optional<double> lambda;
  double temperature = 1.0;
  double beta = kDefaultSiblingWeight;
  bool guided = false;
  std::string distill_output;
  std::string guided_output;
};

const std::vector<std::string>& command_names();

// Parsers consume every key they know (so they double as key listings) and
// reject the rest.
GenDataConfig parse_gen_data(ConfigReader& reader);
TrainCommandConfig parse_train(ConfigReader& reader);
BenchmarkCommandConfig parse_benchmark(ConfigReader& reader);
VerifyCommandConfig parse_verify(ConfigReader& reader);
TempSweepCommandConfig parse_temp_sweep(ConfigReader& reader);
RankCommandConfig parse_rank(ConfigReader& reader);

// Accepted keys of a command with their defaults, one per line.
std::vector<KeyInfo> command_keys(const std::string& command);
std::string describe_keys(const std::string& command);

// Reads a JSON object from a file; an empty path yields {}.
nlohmann::json load_config_document(const std::string& path);

// "key=value": value parsed as JSON, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Value of NOISY_DISTILL_SEED when set; ConfigError when not an integer.
std::optional<std::uint64_t> seed_from_environment();

}  // namespace noisy_distill
