#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "noisy_distill/commands.hpp"

namespace nd = noisy_distill;

int main(int argc, char** argv) {
  CLI::App app{"Label-noise distillation experiments: data generation, training, benchmarks"};
  app.require_subcommand(1);

  const std::map<std::string, std::string> descriptions{
      {"gen-data", "Generate a synthetic dataset and its knowledge graph"},
      {"train", "Train one model with a chosen pseudo-label strategy"},
      {"benchmark", "Compare all methods over one or more seeds"},
      {"verify-prop1", "Check the optimal blend-risk claims on constructed sources"},
      {"temp-sweep", "Rerun distillation across temperatures"},
      {"rank", "Rank a class's observed positives by pseudo label"},
  };

  nd::CommandOptions options;
  std::uint64_t seed = 0;
  std::uint64_t jobs = 1;
  double lambda = 0.0;
  std::string class_name;
  std::map<std::string, CLI::App*> subs;

  for (const auto& name : nd::command_names()) {
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    sub->add_option("-c,--config", options.config_path, "JSON config file");
    sub->add_option("--set", options.overrides, "Override a config key (key=value), repeatable");
    sub->add_option("--seed", seed, "Global seed (overrides config and NOISY_DISTILL_SEED)");
    if (name == "benchmark") sub->add_option("--jobs", jobs, "Concurrent method runs");
    if (name == "train" || name == "benchmark" || name == "temp-sweep" || name == "rank") {
      sub->add_option("--lambda", lambda, "Pseudo-label weight on observed labels");
    }
    if (name == "rank") {
      sub->add_flag("--guided", options.guided, "Also emit the guided ranking");
      sub->add_option("--class", class_name, "Label to rank");
    }
    sub->footer(nd::describe_keys(name));
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? nd::kExitOk : nd::kExitUsage;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) options.seed = seed;
    if (sub->get_option_no_throw("--jobs") && sub->count("--jobs")) options.jobs = jobs;
    if (sub->get_option_no_throw("--lambda") && sub->count("--lambda")) options.lambda = lambda;
    if (sub->get_option_no_throw("--class") && sub->count("--class")) options.class_name = class_name;
    return nd::run_command(name, options, std::cout, std::cerr);
  }
  return nd::kExitUsage;
}
