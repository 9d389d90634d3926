#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "noisy_distill/config.hpp"

namespace noisy_distill {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2 };

// Command-line inputs shared by every subcommand. Precedence, lowest first:
// config file, NOISY_DISTILL_SEED, --set overrides, dedicated flags.
struct CommandOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> jobs;
  std::optional<double> lambda;
  bool guided = false;
  std::optional<std::string> class_name;
};

// Config document after all overrides, before key checking.
nlohmann::json resolve_config(const std::string& command, const CommandOptions& options);

// Runs one subcommand and maps failures to exit codes; messages go to `err`.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& out,
                std::ostream& err);

int cmd_gen_data(const GenDataConfig& cfg, std::ostream& out);
int cmd_train(const TrainCommandConfig& cfg, std::ostream& out);
int cmd_benchmark(const BenchmarkCommandConfig& cfg, std::ostream& out);
int cmd_verify_prop1(const VerifyCommandConfig& cfg, std::ostream& out);
int cmd_temp_sweep(const TempSweepCommandConfig& cfg, std::ostream& out);
int cmd_rank(const RankCommandConfig& cfg, std::ostream& out);

// Per-method medians of lambda, dev mAP and test mAP across seed reports.
std::vector<MethodResult> median_rows(const std::vector<ExperimentReport>& reports);

}  // namespace noisy_distill
