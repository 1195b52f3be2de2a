#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "octbio/core/dataset.hpp"

namespace octbio::cv {

enum class FoldGrouping { BY_PATIENT, BY_IMAGE };
std::string to_string(FoldGrouping g);
FoldGrouping parse_grouping(const std::string& text);

struct FoldAssignment {
  int k = 5;
  FoldGrouping grouping = FoldGrouping::BY_PATIENT;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignments;  // image_id -> fold

  int fold_of(const std::string& image_id) const;
  // Record indices of `ds` whose image falls in / outside `fold`.
  std::vector<std::size_t> validation_rows(const Dataset& ds, int fold) const;
  std::vector<std::size_t> training_rows(const Dataset& ds, int fold) const;
  bool operator==(const FoldAssignment&) const = default;
};

// Groups (patients or images) are shuffled by the seed and dealt round-robin.
FoldAssignment make_folds(const Dataset& ds, int k = 5, FoldGrouping grouping = FoldGrouping::BY_PATIENT,
                          std::uint64_t seed = 0);

}  // namespace octbio::cv
