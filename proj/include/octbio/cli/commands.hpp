#pragma once

#include <filesystem>
#include <ostream>

#include "octbio/cli/config.hpp"

namespace octbio::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitInvalidData = 3,
  kExitTrainingFailed = 4,
  kExitDigestMismatch = 5,
  kExitUnknownIds = 6,
  kExitRunDir = 7,
};

struct CommandOptions {
  bool force = false;
  std::ostream* out = nullptr;  // progress and summaries
  std::ostream* err = nullptr;  // diagnostics
};

// <output_dir>/{train,test}/manifest.jsonl + images. The test fixture uses a
// seed derived from the run seed and `fixture.test_patients` patients.
int cmd_fixtures(const RunConfig& config, const CommandOptions& options);

// Cross-validated training on dataset.train_manifest with test inference each
// epoch. Writes folds/fold_<f>/ fragments (resumable per fold), the merged
// scores.csv + val_f1.csv, and predictions.csv for the configured reduction
// plus predictions.<reduction>.csv for both.
int cmd_cv(const RunConfig& config, const CommandOptions& options);

// Combines <run>/predictions.csv of two cv runs per ensemble.scheme.
int cmd_ensemble(const RunConfig& config, const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                 const CommandOptions& options);

// Scores a predictions file against a labelled manifest; writes metrics.json
// and metrics.txt.
int cmd_evaluate(const RunConfig& config, const std::filesystem::path& predictions,
                 const std::filesystem::path& truth_manifest, const CommandOptions& options);

// cmd_cv for CONV_CBAM with use_cbam on and off under the same seeds, each
// evaluated on the test manifest; writes report.txt and report.json.
int cmd_ablate_cbam(const RunConfig& config, const CommandOptions& options);

}  // namespace octbio::cli
