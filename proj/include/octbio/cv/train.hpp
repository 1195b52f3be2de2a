#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "octbio/augment/augment.hpp"
#include "octbio/core/dataset.hpp"
#include "octbio/core/error.hpp"
#include "octbio/core/image.hpp"
#include "octbio/cv/folds.hpp"
#include "octbio/cv/scores.hpp"
#include "octbio/models/model.hpp"

namespace octbio::cv {

using models::BackboneSpec;
using models::Model;

enum class EarlyStop { OFF, ON_VAL_F1 };
std::string to_string(EarlyStop e);
EarlyStop parse_early_stop(const std::string& text);

struct TrainConfig {
  double lr = 3e-5;
  double lr_decay = 0.9;  // exponential schedule, applied after each epoch
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 8;
  int grad_accum_steps = 1;
  int epochs = 2;
  EarlyStop early_stop = EarlyStop::OFF;
  int patience = 5;
  augment::Phase phase = augment::Phase::PHASE1;
  bool augment = true;  // false: training batches use the eval transform
  // Stage constants of the training recipe; phase and target size come from
  // `phase` and the model, and the perspective stage runs only in PHASE2.
  augment::AugmentRecipe recipe = augment::build_recipe(augment::Phase::PHASE2, 64);
  std::uint64_t seed = 0;
  int k = 5;
  FoldGrouping grouping = FoldGrouping::BY_PATIENT;
  double threshold = 0.5;  // for validation F1
  int eval_batch_size = 16;

  // Attention kinds: batch 1, 8 accumulation steps, 2 epochs.
  // CONV_CBAM: batch 128, no accumulation, 35 epochs with early stopping.
  static TrainConfig defaults_for(models::BackboneKind kind);

  double lr_at(int epoch) const;
  augment::AugmentRecipe recipe_for(int input_size) const;
  int effective_batch() const { return batch_size * grad_accum_steps; }
  void validate() const;
};

// Decoupled weight decay Adam, matching torch.optim.AdamW.
class AdamW {
 public:
  AdamW(models::ParameterSet& params, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);
  void step(double lr);
  std::int64_t steps() const { return t_; }

 private:
  std::vector<tensor::Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double wd_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
};

// A dataset with its decoded images.
struct ImageSet {
  Dataset ds;
  std::vector<GrayImage> images;
  static ImageSet load(const Dataset& ds);
};

class TrainingAborted : public Error {
 public:
  TrainingAborted(int fold, int epoch, std::int64_t step, double lr, const std::string& what);
  int fold, epoch;
  std::int64_t step;
  double lr;
};

struct EpochLog {
  int fold = 0;
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // sample-weighted mean over the epoch
  double val_macro_f1 = 0.0;
  std::int64_t optimizer_steps = 0;  // cumulative
};

struct FoldResult {
  int fold = 0;
  ScoreStore fragment;
  std::vector<EpochLog> history;
  int best_epoch = -1;
  double best_val_f1 = 0.0;
  bool stopped_early = false;
  // Weights of the best epoch under early stopping, else of the last epoch.
  std::unique_ptr<Model> model;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  // Runs before each optimizer step, after gradients are accumulated.
  std::function<void(Model&, int fold, int epoch, std::int64_t step)> before_step;
};

// B x 6 probabilities in dataset row order, eval transform, no autograd.
std::vector<ProbRow> predict(const Model& model, const ImageSet& images, const std::vector<std::size_t>& rows,
                             int batch_size = 16, double norm_mean = augment::AugmentRecipe{}.norm_mean,
                             double norm_std = augment::AugmentRecipe{}.norm_std);

// 3 x S x S batch of the given rows (S = recipe.target_size); `train` picks
// the training transform, otherwise resize and normalise only.
tensor::Tensor make_batch(const ImageSet& images, const std::vector<std::size_t>& rows,
                          const augment::AugmentRecipe& recipe, bool train, std::uint64_t run_seed, int epoch);

FoldResult train_fold(const BackboneSpec& spec, int fold, const FoldAssignment& folds, const ImageSet& train,
                      const ImageSet& test, const TrainConfig& cfg, const TrainHooks& hooks = {});

struct CvOptions {
  int jobs = 1;
  std::vector<int> folds;  // empty: all of 0..k-1
  // Called once per finished fold, serialised across jobs.
  std::function<void(const FoldResult&)> on_fold_done;
  TrainHooks hooks;
};

struct CvOutcome {
  FoldAssignment assignment;
  ScoreStore store;                     // merged fragments of the folds that finished
  std::map<int, std::string> failures;  // fold -> diagnostic
  std::map<int, int> best_epoch;
  bool failed() const { return !failures.empty(); }
};

CvOutcome run_cv(const BackboneSpec& spec, const ImageSet& train, const ImageSet& test, const TrainConfig& cfg,
                 const CvOptions& options = {});

}  // namespace octbio::cv
