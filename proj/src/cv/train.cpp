#include "octbio/cv/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "octbio/core/rng.hpp"
#include "octbio/metrics/metrics.hpp"

namespace octbio::cv {

using tensor::Tensor;

std::string to_string(EarlyStop e) { return e == EarlyStop::OFF ? "off" : "on_val_f1"; }

EarlyStop parse_early_stop(const std::string& text) {
  if (text == "off") return EarlyStop::OFF;
  if (text == "on_val_f1") return EarlyStop::ON_VAL_F1;
  throw ContractError("unknown early_stop '" + text + "' (expected off or on_val_f1)");
}

TrainConfig TrainConfig::defaults_for(models::BackboneKind kind) {
  TrainConfig c;
  if (kind == models::BackboneKind::CONV_CBAM) {
    c.batch_size = 128;
    c.grad_accum_steps = 1;
    c.epochs = 35;
    c.early_stop = EarlyStop::ON_VAL_F1;
  } else {
    c.batch_size = 1;
    c.grad_accum_steps = 8;
    c.epochs = 2;
    c.early_stop = EarlyStop::OFF;
  }
  return c;
}

double TrainConfig::lr_at(int epoch) const { return lr * std::pow(lr_decay, epoch); }

augment::AugmentRecipe TrainConfig::recipe_for(int input_size) const {
  augment::AugmentRecipe r = recipe;
  r.phase = phase;
  r.target_size = input_size;
  if (phase == augment::Phase::PHASE1) {
    r.perspective.reset();
  } else if (!r.perspective) {
    r.perspective = augment::PerspectiveSpec{};
  }
  r.validate();
  return r;
}

void TrainConfig::validate() const {
  std::vector<std::string> bad;
  if (!(lr > 0.0) || !std::isfinite(lr)) bad.push_back("lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) bad.push_back("lr_decay must be in (0, 1]");
  if (!(weight_decay >= 0.0)) bad.push_back("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad.push_back("betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) bad.push_back("adam_eps must be positive");
  if (batch_size < 1) bad.push_back("batch_size must be at least 1");
  if (grad_accum_steps < 1) bad.push_back("grad_accum_steps must be at least 1");
  if (epochs < 1) bad.push_back("epochs must be at least 1");
  if (patience < 1) bad.push_back("patience must be at least 1");
  if (k < 2) bad.push_back("k must be at least 2");
  if (!(threshold > 0.0 && threshold < 1.0)) bad.push_back("threshold must be in (0, 1)");
  if (eval_batch_size < 1) bad.push_back("eval_batch_size must be at least 1");
  try {
    (void)recipe_for(64);
  } catch (const ContractError& e) {
    bad.push_back(std::string("augment recipe: ") + e.what());
  }
  if (!bad.empty()) throw ValidationError("invalid training config", bad);
}

AdamW::AdamW(models::ParameterSet& params, double weight_decay, double beta1, double beta2, double eps)
    : wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
  for (const auto& [name, t] : params.items()) {
    params_.push_back(t);
    m_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto p = params_[i].mutable_values();
    const auto g = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] *= 1.0 - lr * wd_;
      m[j] = b1_ * m[j] + (1.0 - b1_) * g[j];
      v[j] = b2_ * v[j] + (1.0 - b2_) * g[j] * g[j];
      const double denom = std::sqrt(v[j] / c2) + eps_;
      p[j] -= lr * (m[j] / c1) / denom;
    }
  }
}

ImageSet ImageSet::load(const Dataset& ds) { return ImageSet{ds, load_images(ds)}; }

namespace {

std::string abort_message(int fold, int epoch, std::int64_t step, double lr, const std::string& what) {
  std::ostringstream os;
  os << what << " (fold " << fold << ", epoch " << epoch << ", step " << step << ", lr " << lr << ")";
  return os.str();
}

}  // namespace

TrainingAborted::TrainingAborted(int fold_, int epoch_, std::int64_t step_, double lr_, const std::string& what)
    : Error(abort_message(fold_, epoch_, step_, lr_, what)), fold(fold_), epoch(epoch_), step(step_), lr(lr_) {}

Tensor make_batch(const ImageSet& images, const std::vector<std::size_t>& rows, const augment::AugmentRecipe& recipe,
                  bool train, std::uint64_t run_seed, int epoch) {
  const int size = recipe.target_size;
  const auto n = static_cast<std::int64_t>(rows.size());
  const std::size_t per = 3 * static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
  std::vector<double> data(static_cast<std::size_t>(n) * per);
  // Samples are independent: each is keyed by its own SampleSeed.
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n; ++b) {
    const std::size_t row = rows[static_cast<std::size_t>(b)];
    const auto& image = images.images[row];
    augment::Planar t;
    if (train) {
      t = augment::apply_train(recipe, image,
                               augment::SampleSeed{run_seed, epoch, images.ds.records()[row].image_id})
              .tensor;
    } else {
      t = augment::apply_eval(size, image, recipe.norm_mean, recipe.norm_std);
    }
    std::copy(t.data.begin(), t.data.end(), data.begin() + static_cast<std::ptrdiff_t>(b * static_cast<std::int64_t>(per)));
  }
  return Tensor::from({n, 3, size, size}, std::move(data));
}

std::vector<ProbRow> predict(const Model& model, const ImageSet& images, const std::vector<std::size_t>& rows,
                             int batch_size, double norm_mean, double norm_std) {
  std::vector<ProbRow> out;
  out.reserve(rows.size());
  const int size = model.spec().input_size;
  for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(rows.size(), start + static_cast<std::size_t>(batch_size));
    const std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                         rows.begin() + static_cast<std::ptrdiff_t>(end));
    augment::AugmentRecipe eval;
    eval.target_size = size;
    eval.norm_mean = norm_mean;
    eval.norm_std = norm_std;
    const auto result = models::forward(model, make_batch(images, chunk, eval, false, 0, 0));
    for (std::int64_t b = 0; b < result.batch; ++b) {
      ProbRow row{};
      for (int j = 0; j < models::kBiomarkerOutputs; ++j) row[static_cast<std::size_t>(j)] = result.probability(b, j);
      out.push_back(row);
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

void check_training_rows(const BackboneSpec& spec, const Dataset& ds, const std::vector<std::size_t>& rows) {
  std::vector<std::string> unknown, no_clinical;
  for (std::size_t r : rows) {
    const auto& rec = ds.records()[r];
    if (std::any_of(rec.labels.begin(), rec.labels.end(), [](std::int8_t v) { return v != 0 && v != 1; })) {
      unknown.push_back(rec.image_id);
    }
    if (spec.n_outputs > models::kBiomarkerOutputs && !rec.clinical) no_clinical.push_back(rec.image_id);
  }
  auto join = [](const std::vector<std::string>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size() && i < 10; ++i) s += (i ? ", " : "") + ids[i];
    if (ids.size() > 10) s += ", ... (" + std::to_string(ids.size()) + " total)";
    return s;
  };
  if (!unknown.empty()) throw ContractError("UNKNOWN labels in training split: " + join(unknown));
  if (!no_clinical.empty()) {
    throw ContractError("model has " + std::to_string(spec.n_outputs) +
                        " outputs but these images have no clinical values: " + join(no_clinical));
  }
}

double validation_f1(const Model& model, const ImageSet& train, const std::vector<std::size_t>& rows,
                     const TrainConfig& cfg) {
  const auto probs = predict(model, train, rows, cfg.eval_batch_size, cfg.recipe.norm_mean, cfg.recipe.norm_std);
  metrics::BitMatrix decisions, truth;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    metrics::BitRow d{}, t{};
    const auto& labels = train.ds.records()[rows[i]].labels;
    for (std::size_t j = 0; j < 6; ++j) {
      d[j] = probs[i][j] >= cfg.threshold ? 1 : 0;
      t[j] = labels[j];
    }
    decisions.push_back(d);
    truth.push_back(t);
  }
  return metrics::macro_f1(metrics::per_biomarker_f1(decisions, truth, metrics::ZeroDivisionPolicy::ZERO));
}

}  // namespace

FoldResult train_fold(const BackboneSpec& spec, int fold, const FoldAssignment& folds, const ImageSet& train,
                      const ImageSet& test, const TrainConfig& cfg, const TrainHooks& hooks) {
  spec.validate();
  cfg.validate();
  if (fold < 0 || fold >= folds.k) {
    throw ContractError("fold " + std::to_string(fold) + " out of range for k=" + std::to_string(folds.k));
  }
  if (train.images.size() != train.ds.size() || test.images.size() != test.ds.size()) {
    throw ContractError("image set does not match its dataset");
  }
  const auto train_rows = folds.training_rows(train.ds, fold);
  const auto val_rows = folds.validation_rows(train.ds, fold);
  if (train_rows.empty() || val_rows.empty()) {
    throw ContractError("fold " + std::to_string(fold) + " has an empty training or validation split");
  }
  check_training_rows(spec, train.ds, train_rows);
  check_training_rows(spec, train.ds, val_rows);

  FoldResult result;
  result.fold = fold;
  result.model = models::build_model(spec, derive_seed(cfg.seed, "init", {static_cast<std::uint64_t>(fold)}));
  Model& model = *result.model;
  AdamW opt(model.parameters(), cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.adam_eps);

  const auto recipe = cfg.recipe_for(spec.input_size);
  const std::uint64_t augment_seed = derive_seed(cfg.seed, "augment", {static_cast<std::uint64_t>(fold)});
  const auto test_rows = all_rows(test.ds);
  const bool with_clinical = spec.n_outputs > models::kBiomarkerOutputs;

  std::vector<std::vector<double>> best_params;
  int since_improvement = 0;
  double best_for_patience = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::vector<std::size_t> order = train_rows;
    Rng rng(derive_seed(cfg.seed, "order", {static_cast<std::uint64_t>(fold), static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.randint(0, static_cast<std::int64_t>(i)))]);
    }

    model.set_training(true);
    model.parameters().zero_grad();
    const std::size_t micro = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t group = micro * static_cast<std::size_t>(cfg.grad_accum_steps);
    double loss_sum = 0.0;
    for (std::size_t g0 = 0; g0 < order.size(); g0 += group) {
      const std::size_t g1 = std::min(order.size(), g0 + group);
      const double group_n = static_cast<double>(g1 - g0);
      for (std::size_t b0 = g0; b0 < g1; b0 += micro) {
        const std::size_t b1 = std::min(g1, b0 + micro);
        const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                            order.begin() + static_cast<std::ptrdiff_t>(b1));
        std::vector<double> labels, clinical;
        for (std::size_t r : rows) {
          const auto& rec = train.ds.records()[r];
          for (auto v : rec.labels) labels.push_back(v);
          if (with_clinical) clinical.insert(clinical.end(), rec.clinical->begin(), rec.clinical->end());
        }
        const Tensor x =
            make_batch(train, rows, recipe, cfg.augment, augment_seed, epoch);
        const Tensor loss = models::multilabel_loss(model.logits(x), labels, clinical);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw TrainingAborted(fold, epoch, opt.steps(), lr, "non-finite training loss " + std::to_string(value));
        }
        const double n = static_cast<double>(rows.size());
        loss_sum += value * n;
        // Each micro-batch loss is a mean; weight by its share of the group.
        tensor::scale(loss, n / group_n).backward();
      }
      if (hooks.before_step) hooks.before_step(model, fold, epoch, opt.steps());
      opt.step(lr);
      model.parameters().zero_grad();
    }
    model.set_training(false);

    for (const auto& [name, p] : model.parameters().items()) {
      for (double v : p.values()) {
        if (!std::isfinite(v)) {
          throw TrainingAborted(fold, epoch, opt.steps(), lr, "non-finite weight in " + name);
        }
      }
    }

    EpochLog log;
    log.fold = fold;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = loss_sum / static_cast<double>(order.size());
    log.val_macro_f1 = validation_f1(model, train, val_rows, cfg);
    log.optimizer_steps = opt.steps();
    result.fragment.set_val_f1(fold, epoch, log.val_macro_f1);
    const auto test_probs =
        predict(model, test, test_rows, cfg.eval_batch_size, cfg.recipe.norm_mean, cfg.recipe.norm_std);
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      result.fragment.add(fold, epoch, test.ds.records()[test_rows[i]].image_id, test_probs[i]);
    }
    result.history.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);

    // Best checkpoint: ties go to the later epoch. Patience counts epochs
    // without strict improvement.
    if (log.val_macro_f1 >= result.best_val_f1 || result.best_epoch < 0) {
      result.best_val_f1 = log.val_macro_f1;
      result.best_epoch = epoch;
      if (cfg.early_stop == EarlyStop::ON_VAL_F1) best_params = model.parameters().snapshot();
    }
    if (log.val_macro_f1 > best_for_patience) {
      best_for_patience = log.val_macro_f1;
      since_improvement = 0;
    } else if (++since_improvement >= cfg.patience && cfg.early_stop == EarlyStop::ON_VAL_F1) {
      result.stopped_early = epoch + 1 < cfg.epochs;
      break;
    }
  }
  if (cfg.early_stop == EarlyStop::ON_VAL_F1 && !best_params.empty()) model.parameters().restore(best_params);
  return result;
}

CvOutcome run_cv(const BackboneSpec& spec, const ImageSet& train, const ImageSet& test, const TrainConfig& cfg,
                 const CvOptions& options) {
  cfg.validate();
  CvOutcome outcome;
  outcome.assignment = make_folds(train.ds, cfg.k, cfg.grouping, cfg.seed);
  std::vector<int> todo = options.folds;
  if (todo.empty()) {
    for (int f = 0; f < cfg.k; ++f) todo.push_back(f);
  }
  for (int f : todo) {
    if (f < 0 || f >= cfg.k) throw ContractError("fold " + std::to_string(f) + " out of range for k=" + std::to_string(cfg.k));
  }

  std::vector<ScoreStore> fragments(todo.size());
  std::vector<int> best(todo.size(), -1);
  std::vector<std::string> errors(todo.size());
  std::vector<char> ok(todo.size(), 0);
  std::mutex done_mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      try {
        FoldResult r = train_fold(spec, todo[i], outcome.assignment, train, test, cfg, options.hooks);
        fragments[i] = r.fragment;
        best[i] = r.best_epoch;
        ok[i] = 1;
        if (options.on_fold_done) {
          std::lock_guard<std::mutex> lock(done_mutex);
          options.on_fold_done(r);
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int jobs = std::clamp(options.jobs, 1, static_cast<int>(todo.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  // Merge in fold order so the result does not depend on scheduling.
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (ok[i]) {
      outcome.store.merge(fragments[i]);
      outcome.best_epoch[todo[i]] = best[i];
    } else {
      outcome.failures[todo[i]] = errors[i];
    }
  }
  return outcome;
}

}  // namespace octbio::cv
