#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "octbio/core/biomarker.hpp"
#include "octbio/core/image.hpp"

namespace octbio {

inline constexpr std::int8_t kUnknownLabel = -1;

enum class SplitTag { TRAIN, TEST_PHASE1, TEST_PHASE2 };

std::string_view to_string(SplitTag s);
SplitTag parse_split_tag(std::string_view s);

struct ImageRecord {
  std::string image_id;
  std::string patient_id;
  int week = 0;
  std::filesystem::path image_path;  // relative to the dataset root unless absolute
  std::vector<std::int8_t> labels;   // 6 entries in {0, 1, kUnknownLabel}
  std::optional<std::array<double, 2>> clinical;

  bool operator==(const ImageRecord&) const = default;
};

// An ordered, immutable collection of records. Construction does not
// validate; use validate_dataset or load_manifest for checked values.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<ImageRecord> records, SplitTag split, std::filesystem::path root = {},
          bool unlabeled = false);

  const std::vector<ImageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  SplitTag split() const { return split_; }
  const std::filesystem::path& root() const { return root_; }
  bool unlabeled() const { return unlabeled_; }
  const std::set<std::string>& patients() const { return patients_; }

  std::filesystem::path resolve(const ImageRecord& r) const;
  std::optional<std::size_t> find(std::string_view image_id) const;

  // Same records and split; root and flags are not part of the value.
  bool operator==(const Dataset& other) const {
    return split_ == other.split_ && records_ == other.records_;
  }

 private:
  std::vector<ImageRecord> records_;
  SplitTag split_ = SplitTag::TRAIN;
  std::filesystem::path root_;
  bool unlabeled_ = false;
  std::set<std::string> patients_;
};

// Empty iff every invariant holds. Checks ids, label vectors and that each
// image path resolves to a readable file.
std::vector<std::string> validate_dataset(const Dataset& ds);

struct ManifestOptions {
  SplitTag split = SplitTag::TRAIN;
  bool unlabeled = false;
  bool check_images = true;
};

// JSON-lines manifest. Throws ParseError (with line) on malformed input and
// ValidationError for duplicate ids, missing images or bad label vectors.
Dataset load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});
void write_manifest(const Dataset& ds, const std::filesystem::path& path);
std::string manifest_line(const ImageRecord& r);

// Decoded pixels for every record, in record order.
std::vector<GrayImage> load_images(const Dataset& ds);

}  // namespace octbio
