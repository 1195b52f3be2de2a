#include "octbio/cv/folds.hpp"

#include "octbio/core/error.hpp"
#include "octbio/core/rng.hpp"

namespace octbio::cv {

std::string to_string(FoldGrouping g) { return g == FoldGrouping::BY_PATIENT ? "BY_PATIENT" : "BY_IMAGE"; }

FoldGrouping parse_grouping(const std::string& text) {
  if (text == "BY_PATIENT") return FoldGrouping::BY_PATIENT;
  if (text == "BY_IMAGE") return FoldGrouping::BY_IMAGE;
  throw ContractError("unknown fold grouping '" + text + "' (expected BY_PATIENT or BY_IMAGE)");
}

int FoldAssignment::fold_of(const std::string& image_id) const {
  const auto it = assignments.find(image_id);
  if (it == assignments.end()) throw ContractError("image " + image_id + " has no fold");
  return it->second;
}

std::vector<std::size_t> FoldAssignment::validation_rows(const Dataset& ds, int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (fold_of(ds.records()[i].image_id) == fold) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> FoldAssignment::training_rows(const Dataset& ds, int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (fold_of(ds.records()[i].image_id) != fold) rows.push_back(i);
  }
  return rows;
}

FoldAssignment make_folds(const Dataset& ds, int k, FoldGrouping grouping, std::uint64_t seed) {
  if (k < 2) throw ContractError("k must be at least 2, got " + std::to_string(k));
  std::vector<std::string> groups;
  if (grouping == FoldGrouping::BY_PATIENT) {
    groups.assign(ds.patients().begin(), ds.patients().end());
  } else {
    for (const auto& r : ds.records()) groups.push_back(r.image_id);
  }
  if (static_cast<int>(groups.size()) < k) {
    throw ContractError("cannot make " + std::to_string(k) + " folds from " + std::to_string(groups.size()) +
                        (grouping == FoldGrouping::BY_PATIENT ? " patients" : " images"));
  }
  Rng rng(derive_seed(seed, "folds"));
  for (std::size_t i = groups.size(); i > 1; --i) {
    std::swap(groups[i - 1], groups[static_cast<std::size_t>(rng.randint(0, static_cast<std::int64_t>(i)))]);
  }
  std::map<std::string, int> fold_of_group;
  for (std::size_t i = 0; i < groups.size(); ++i) fold_of_group[groups[i]] = static_cast<int>(i % static_cast<std::size_t>(k));

  FoldAssignment fa;
  fa.k = k;
  fa.grouping = grouping;
  fa.seed = seed;
  for (const auto& r : ds.records()) {
    fa.assignments[r.image_id] =
        fold_of_group.at(grouping == FoldGrouping::BY_PATIENT ? r.patient_id : r.image_id);
  }
  return fa;
}

}  // namespace octbio::cv
