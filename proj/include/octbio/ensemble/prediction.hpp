#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "octbio/metrics/metrics.hpp"

namespace octbio::ensemble {

using ProbRow = std::array<double, kNumBiomarkers>;

struct PredictionMatrix {
  std::vector<std::string> image_ids;
  std::vector<ProbRow> probabilities;
  std::optional<metrics::BitMatrix> decisions;
  std::optional<double> threshold;  // set together with decisions
  std::string source;

  std::size_t size() const { return image_ids.size(); }
  std::optional<std::size_t> row_of(const std::string& image_id) const;
  // Empty iff rows line up, ids are unique, probabilities lie in [0, 1] and
  // decisions equal the thresholded probabilities.
  std::vector<std::string> check_invariants() const;
};

// Writes `path` (image_id + 6 probabilities), `<stem>.decisions.csv` when
// decisions exist, and `<path>.meta.json` with source, threshold and `extra`.
void write_predictions(const PredictionMatrix& pm, const std::filesystem::path& path,
                       const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());
// Reads the files written above; throws ValidationError if invariants fail.
PredictionMatrix read_predictions(const std::filesystem::path& path);

std::filesystem::path decisions_path(const std::filesystem::path& predictions);
std::filesystem::path meta_path(const std::filesystem::path& artifact);

// Shared CSV helpers. Header: `<key columns>,IRHRF,PAVF,FAVF,IRF,DRT_DME,VD`.
std::string biomarker_header();
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace octbio::ensemble
