#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "octbio/cli/commands.hpp"
#include "octbio/cli/config.hpp"
#include "octbio/core/error.hpp"

namespace {

using octbio::cli::ConfigMap;

struct CommonFlags {
  std::string config_file;
  std::optional<std::string> seed;
  std::optional<std::string> output_dir;
  bool force = false;
  std::map<std::string, std::optional<std::string>> keys;
};

void add_common(CLI::App& cmd, CommonFlags& flags) {
  cmd.add_option("--config", flags.config_file, "Flat key = value config file");
  cmd.add_option("--seed", flags.seed, "Run seed (same as seed = ...)");
  cmd.add_option("--output-dir", flags.output_dir, "Run directory (same as output_dir = ...)");
  cmd.add_flag("--force", flags.force, "Replace an existing run directory");
  for (const auto& key : octbio::cli::known_keys()) {
    if (key == "seed" || key == "output_dir") continue;
    cmd.add_option("--" + key, flags.keys[key], "Overrides config key " + key)
        ->group("Config keys")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

octbio::cli::RunConfig resolve(const CommonFlags& flags) {
  ConfigMap map;
  if (!flags.config_file.empty()) map = octbio::cli::read_config_file(flags.config_file);
  for (const auto& [key, value] : flags.keys) {
    if (value) map[key] = *value;
  }
  if (flags.seed) map["seed"] = *flags.seed;
  if (flags.output_dir) map["output_dir"] = *flags.output_dir;
  return octbio::cli::make_run_config(map);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-label OCT biomarker training and evaluation"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* fixtures = app.add_subcommand("fixtures", "Write the planted train and test fixtures");
  auto* cv = app.add_subcommand("cv", "Cross-validated training with per-epoch test inference");
  auto* ens = app.add_subcommand("ensemble", "Combine the predictions of two cv runs");
  auto* eval = app.add_subcommand("evaluate", "Score predictions against a labelled manifest");
  auto* ablate = app.add_subcommand("ablate-cbam", "Train CONV_CBAM with and without CBAM and compare");
  auto* show = app.add_subcommand("show-config", "Print the resolved configuration");
  for (auto* cmd : {fixtures, cv, ens, eval, ablate, show}) add_common(*cmd, flags);

  std::string run_a, run_b, predictions, truth;
  ens->add_option("--run-a", run_a, "cv run directory routed as MODEL_A (local attention)")->required();
  ens->add_option("--run-b", run_b, "cv run directory routed as MODEL_B (global attention)")->required();
  eval->add_option("--predictions", predictions, "predictions.csv to score")->required();
  eval->add_option("--truth", truth, "Labelled manifest (default: dataset.test_manifest)");

  CLI11_PARSE(app, argc, argv);

  octbio::cli::RunConfig config;
  try {
    config = resolve(flags);
  } catch (const octbio::Error& e) {
    std::cerr << "config: " << e.what() << '\n';
    return octbio::cli::kExitUsage;
  }

  const octbio::cli::CommandOptions options{flags.force, &std::cout, &std::cerr};
  if (*fixtures) return octbio::cli::cmd_fixtures(config, options);
  if (*cv) return octbio::cli::cmd_cv(config, options);
  if (*ens) return octbio::cli::cmd_ensemble(config, run_a, run_b, options);
  if (*eval) {
    return octbio::cli::cmd_evaluate(config, predictions, truth.empty() ? config.test_manifest : std::filesystem::path(truth), options);
  }
  if (*ablate) return octbio::cli::cmd_ablate_cbam(config, options);
  std::cout << config.snapshot();
  return octbio::cli::kExitOk;
}
