#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "octbio/ensemble/prediction.hpp"

namespace octbio::cv {

using ensemble::ProbRow;

// Per-(fold, epoch) test-set probabilities and fold-validation macro F1.
// Probabilities are held at the persisted precision (6 decimals), so a
// store read back from CSV compares equal to the one that wrote it.
class ScoreStore {
 public:
  using Key = std::tuple<int, int, std::string>;  // fold, epoch, image_id

  void add(int fold, int epoch, const std::string& image_id, const ProbRow& probabilities);
  void set_val_f1(int fold, int epoch, double f1);

  const std::map<Key, ProbRow>& entries() const { return entries_; }
  const std::map<std::pair<int, int>, double>& val_f1() const { return val_f1_; }
  std::set<std::pair<int, int>> slices() const;
  std::set<int> folds() const;
  bool empty() const { return entries_.empty() && val_f1_.empty(); }

  ScoreStore fold_fragment(int fold) const;
  // Union; a key present in both with different values is a contract error.
  void merge(const ScoreStore& other);

  // scores: fold,epoch,image_id,<6 probabilities>; val: fold,epoch,val_macro_f1.
  void write_csv(const std::filesystem::path& scores, const std::filesystem::path& val) const;
  static ScoreStore read_csv(const std::filesystem::path& scores, const std::filesystem::path& val);

  bool operator==(const ScoreStore&) const = default;

 private:
  std::map<Key, ProbRow> entries_;
  std::map<std::pair<int, int>, double> val_f1_;
};

enum class Reduction { MEAN_ALL, MEAN_BEST_EPOCH };
std::string to_string(Reduction r);
Reduction parse_reduction(const std::string& text);

// Epoch with the highest val F1 per fold; ties go to the later epoch.
std::map<int, int> best_epochs(const ScoreStore& store);

// One row per image in `image_ids`. Requires every fold in [0, k) to have at
// least one slice, every slice to cover every image, and (for
// MEAN_BEST_EPOCH) a val F1 for every slice.
ensemble::PredictionMatrix accumulate_scores(const ScoreStore& store, Reduction reduction, int k,
                                             const std::vector<std::string>& image_ids);

}  // namespace octbio::cv
