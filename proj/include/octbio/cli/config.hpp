#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "octbio/core/fixture.hpp"
#include "octbio/cv/scores.hpp"
#include "octbio/cv/train.hpp"
#include "octbio/ensemble/ensemble.hpp"
#include "octbio/metrics/metrics.hpp"
#include "octbio/models/model.hpp"

namespace octbio::cli {

// Flat `key = value` document with dotted keys; `#` starts a comment.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text, const std::string& origin = "<config>");
ConfigMap read_config_file(const std::filesystem::path& path);
std::string render_config(const ConfigMap& map);

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";

  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  bool test_unlabeled = false;

  FixtureConfig fixture;  // cmd_fixtures; its seed follows `seed`
  int fixture_test_patients = 4;

  models::BackboneSpec model;
  cv::TrainConfig train;  // its seed follows `seed`
  cv::Reduction reduction = cv::Reduction::MEAN_ALL;
  int jobs = 1;

  ensemble::Scheme scheme = ensemble::Scheme::AVERAGE;
  double weight_a = 0.5;
  std::string routing;  // overrides on the default table, "VD=MODEL_A,..."
  double threshold = 0.5;

  metrics::EvaluateOptions metrics;
  double outlier_threshold = 0.65;

  // Every key with its current value; parsing this back gives an equal config.
  ConfigMap to_map() const;
  std::string snapshot() const { return render_config(to_map()); }
  std::string digest() const;
};

// Defaults, then the training defaults of model.kind, then `map`.
// Unknown keys and malformed values raise ContractError naming the key.
RunConfig make_run_config(const ConfigMap& map);

std::vector<std::string> known_keys();

}  // namespace octbio::cli
