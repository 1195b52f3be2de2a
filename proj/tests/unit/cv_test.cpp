#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "octbio/core/error.hpp"
#include "octbio/core/fixture.hpp"
#include "octbio/core/rng.hpp"
#include "octbio/cv/folds.hpp"
#include "octbio/cv/scores.hpp"
#include "octbio/cv/train.hpp"
#include "octbio/metrics/metrics.hpp"
#include "temp_dir.hpp"

using namespace octbio;
using namespace octbio::cv;
using octbio::testing::TempDir;

namespace {

Dataset synthetic(int patients, int per_patient) {
  std::vector<ImageRecord> records;
  for (int p = 0; p < patients; ++p) {
    for (int i = 0; i < per_patient; ++i) {
      ImageRecord r;
      r.patient_id = "p" + std::to_string(p);
      r.image_id = r.patient_id + "_" + std::to_string(i);
      r.image_path = r.image_id + ".png";
      r.labels.assign(6, 0);
      records.push_back(r);
    }
  }
  return Dataset(std::move(records), SplitTag::TRAIN);
}

struct Fixtures {
  TempDir dir{"cv"};
  ImageSet train, test;
  Fixtures(int patients, int per_patient, int size, int test_patients = 2) {
    FixtureConfig tc;
    tc.n_patients = patients;
    tc.images_per_patient = per_patient;
    tc.image_size = size;
    tc.id_prefix = "tr";
    train = ImageSet::load(generate_fixture(tc, dir / "train"));
    FixtureConfig ec = tc;
    ec.n_patients = test_patients;
    ec.seed = 99;
    ec.id_prefix = "te";
    ec.split = SplitTag::TEST_PHASE1;
    test = ImageSet::load(generate_fixture(ec, dir / "test"));
  }
};

models::BackboneSpec tiny(models::BackboneKind kind, int size = 32) {
  models::BackboneSpec s;
  s.kind = kind;
  s.input_size = size;
  s.width = 8;
  s.depth = 1;
  s.heads = 2;
  s.patch = 8;
  s.window = 2;
  return s;
}

TrainConfig quick(int epochs = 1) {
  TrainConfig c;
  c.lr = 1e-3;
  c.batch_size = 4;
  c.grad_accum_steps = 1;
  c.epochs = epochs;
  c.seed = 11;
  return c;
}

double max_rel_diff(const models::ParameterSet& a, const models::ParameterSet& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.items().size(); ++i) {
    const auto x = a.items()[i].second.values(), y = b.items()[i].second.values();
    for (std::size_t j = 0; j < x.size(); ++j) {
      worst = std::max(worst, std::abs(x[j] - y[j]) / std::max({std::abs(x[j]), std::abs(y[j]), 1e-8}));
    }
  }
  return worst;
}

}  // namespace

TEST(Folds, TenPatientsGiveTwoPerFold) {
  const auto ds = synthetic(10, 3);
  const auto fa = make_folds(ds, 5, FoldGrouping::BY_PATIENT, 42);
  for (int f = 0; f < 5; ++f) {
    std::set<std::string> patients;
    for (auto r : fa.validation_rows(ds, f)) patients.insert(ds.records()[r].patient_id);
    EXPECT_EQ(patients.size(), 2u) << "fold " << f;
  }
}

TEST(Folds, PartitionBalanceAndGrouping) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int patients = static_cast<int>(rng.randint(5, 20));
    const auto ds = synthetic(patients, static_cast<int>(rng.randint(1, 6)));
    for (auto grouping : {FoldGrouping::BY_PATIENT, FoldGrouping::BY_IMAGE}) {
      const auto fa = make_folds(ds, 5, grouping, rng.next_u64());
      std::vector<int> seen(ds.size(), 0);
      std::vector<std::size_t> groups_per_fold;
      for (int f = 0; f < 5; ++f) {
        std::set<std::string> groups;
        for (auto r : fa.validation_rows(ds, f)) {
          ++seen[r];
          groups.insert(grouping == FoldGrouping::BY_PATIENT ? ds.records()[r].patient_id : ds.records()[r].image_id);
        }
        groups_per_fold.push_back(groups.size());
        EXPECT_EQ(fa.training_rows(ds, f).size() + fa.validation_rows(ds, f).size(), ds.size());
      }
      for (int s : seen) EXPECT_EQ(s, 1);
      const auto [lo, hi] = std::minmax_element(groups_per_fold.begin(), groups_per_fold.end());
      EXPECT_LE(*hi - *lo, 1u);
      if (grouping == FoldGrouping::BY_PATIENT) {
        std::map<std::string, int> fold_of_patient;
        for (const auto& r : ds.records()) {
          auto [it, fresh] = fold_of_patient.emplace(r.patient_id, fa.fold_of(r.image_id));
          if (!fresh) {
            EXPECT_EQ(it->second, fa.fold_of(r.image_id));
          }
        }
      }
    }
  }
}

TEST(Folds, DeterministicAndGuarded) {
  const auto ds = synthetic(7, 2);
  EXPECT_EQ(make_folds(ds, 5, FoldGrouping::BY_PATIENT, 3), make_folds(ds, 5, FoldGrouping::BY_PATIENT, 3));
  EXPECT_NE(make_folds(ds, 5, FoldGrouping::BY_PATIENT, 3).assignments,
            make_folds(ds, 5, FoldGrouping::BY_PATIENT, 4).assignments);
  EXPECT_THROW(make_folds(synthetic(4, 3), 5, FoldGrouping::BY_PATIENT, 0), ContractError);
  EXPECT_NO_THROW(make_folds(synthetic(4, 3), 5, FoldGrouping::BY_IMAGE, 0));
}

TEST(TrainConfig, ScheduleAndDefaults) {
  TrainConfig c;
  double expected = 3e-5;
  for (int e = 0; e < 40; ++e) {
    EXPECT_NEAR(c.lr_at(e), expected, 1e-12);
    expected *= 0.9;
  }
  const auto attn = TrainConfig::defaults_for(models::BackboneKind::LOCAL_ATTN);
  EXPECT_EQ(attn.batch_size, 1);
  EXPECT_EQ(attn.grad_accum_steps, 8);
  EXPECT_EQ(attn.epochs, 2);
  const auto conv = TrainConfig::defaults_for(models::BackboneKind::CONV_CBAM);
  EXPECT_EQ(conv.grad_accum_steps, 1);
  EXPECT_EQ(conv.epochs, 35);
  EXPECT_EQ(conv.early_stop, EarlyStop::ON_VAL_F1);
  EXPECT_EQ(conv.patience, 5);
  TrainConfig bad;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(AdamW, MatchesHandComputedSteps) {
  models::ParameterSet ps;
  auto w = ps.add("w", tensor::Tensor::from({2}, {1.0, -2.0}, true));
  AdamW opt(ps, 0.01);
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> p{1.0, -2.0}, m(2, 0.0), v(2, 0.0);
  const double grads[3][2] = {{0.5, -0.25}, {0.1, 0.3}, {-0.2, 0.0}};
  for (int t = 1; t <= 3; ++t) {
    w.mutable_grad()[0] = grads[t - 1][0];
    w.mutable_grad()[1] = grads[t - 1][1];
    opt.step(lr);
    for (int j = 0; j < 2; ++j) {
      const double g = grads[t - 1][j];
      p[j] -= lr * 0.01 * p[j];
      m[j] = b1 * m[j] + (1 - b1) * g;
      v[j] = b2 * v[j] + (1 - b2) * g * g;
      const double mh = m[j] / (1 - std::pow(b1, t)), vh = v[j] / (1 - std::pow(b2, t));
      p[j] -= lr * mh / (std::sqrt(vh) + eps);
      EXPECT_NEAR(w.values()[j], p[j], 1e-15);
    }
    ps.zero_grad();
  }
  EXPECT_EQ(opt.steps(), 3);
}

TEST(ScoreStore, CsvRoundTripAndFormat) {
  TempDir dir;
  ScoreStore s;
  s.add(0, 0, "a", {0.1234567, 0.0, 1.0, 0.5, 0.25, 0.999999});
  s.add(1, 2, "b", {0.3, 0.3, 0.3, 0.3, 0.3, 0.3});
  s.set_val_f1(0, 0, 0.7123456789);
  s.set_val_f1(1, 2, 1.0 / 3.0);
  s.write_csv(dir / "scores.csv", dir / "val.csv");
  const auto text = octbio::testing::read_file(dir / "scores.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "fold,epoch,image_id,IRHRF,PAVF,FAVF,IRF,DRT_DME,VD");
  EXPECT_NE(text.find("0,0,a,0.123457,0.000000,1.000000,0.500000,0.250000,0.999999"), std::string::npos);
  EXPECT_EQ(octbio::testing::read_file(dir / "val.csv").substr(0, 23), "fold,epoch,val_macro_f1");
  EXPECT_EQ(ScoreStore::read_csv(dir / "scores.csv", dir / "val.csv"), s);
  EXPECT_THROW(s.add(0, 0, "c", {1.5, 0, 0, 0, 0, 0}), ContractError);
  std::ofstream(dir / "bad.csv") << "fold,epoch,image_id,IRHRF,PAVF,FAVF,IRF,DRT_DME,VD\n0,x,a,1,1,1,1,1,1\n";
  EXPECT_THROW(ScoreStore::read_csv(dir / "bad.csv", dir / "val.csv"), ParseError);
}

TEST(ScoreStore, MergeIsUnionAndRejectsConflicts) {
  ScoreStore a, b;
  a.add(0, 0, "x", {0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  b.add(1, 0, "x", {0.2, 0.2, 0.2, 0.2, 0.2, 0.2});
  ScoreStore merged = a;
  merged.merge(b);
  EXPECT_EQ(merged.entries().size(), 2u);
  EXPECT_EQ(merged.fold_fragment(0), a);
  EXPECT_EQ(merged.fold_fragment(1), b);
  merged.merge(a);
  EXPECT_EQ(merged.entries().size(), 2u);
  ScoreStore clash;
  clash.add(0, 0, "x", {0.9, 0.1, 0.1, 0.1, 0.1, 0.1});
  EXPECT_THROW(merged.merge(clash), ContractError);
}

TEST(Accumulate, MeanIdempotenceAndBounds) {
  ScoreStore s;
  s.add(0, 0, "x", {0.4, 0.4, 0.4, 0.4, 0.4, 0.4});
  s.add(1, 0, "x", {0.6, 0.6, 0.6, 0.6, 0.6, 0.6});
  EXPECT_DOUBLE_EQ(accumulate_scores(s, Reduction::MEAN_ALL, 2, {"x"}).probabilities[0][0], 0.5);

  Rng rng(3);
  ScoreStore same, mixed;
  ProbRow fixed{};
  for (auto& v : fixed) v = rng.uniform();
  for (int f = 0; f < 3; ++f) {
    for (int e = 0; e < 4; ++e) {
      same.add(f, e, "x", fixed);
      ProbRow r{};
      for (auto& v : r) v = rng.uniform();
      mixed.add(f, e, "x", r);
    }
  }
  const auto idem = accumulate_scores(same, Reduction::MEAN_ALL, 3, {"x"});
  EXPECT_EQ(idem.probabilities[0], same.entries().begin()->second);
  const auto mean = accumulate_scores(mixed, Reduction::MEAN_ALL, 3, {"x"});
  for (std::size_t j = 0; j < 6; ++j) {
    double lo = 1, hi = 0;
    for (const auto& [key, row] : mixed.entries()) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    EXPECT_GE(mean.probabilities[0][j], lo);
    EXPECT_LE(mean.probabilities[0][j], hi);
  }
}

TEST(Accumulate, BestEpochFollowsArgmaxWithLateTies) {
  ScoreStore s;
  Rng rng(9);
  for (int f = 0; f < 3; ++f) {
    for (int e = 0; e < 4; ++e) {
      s.set_val_f1(f, e, 0.1 * e + 0.01 * f);  // strictly increasing
      for (const char* id : {"x", "y"}) {
        ProbRow r{};
        for (auto& v : r) v = rng.uniform();
        s.add(f, e, id, r);
      }
    }
  }
  const auto best = accumulate_scores(s, Reduction::MEAN_BEST_EPOCH, 3, {"x", "y"});
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string id = i == 0 ? "x" : "y";
    for (std::size_t j = 0; j < 6; ++j) {
      double sum = 0;
      for (int f = 0; f < 3; ++f) sum += s.entries().at({f, 3, id})[j];
      EXPECT_NEAR(best.probabilities[i][j], sum / 3, 1e-15);
    }
  }
  s.set_val_f1(0, 1, 0.5);
  s.set_val_f1(0, 2, 0.5);
  s.set_val_f1(0, 3, 0.2);
  EXPECT_EQ(best_epochs(s).at(0), 2);
}

TEST(Accumulate, IncompleteStoreListsMissingSlices) {
  ScoreStore s;
  s.add(0, 0, "x", {0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  s.add(1, 0, "y", {0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  try {
    accumulate_scores(s, Reduction::MEAN_ALL, 3, {"x", "y"});
    FAIL() << "expected a contract error";
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("fold 0 epoch 0: no score for y"), std::string::npos) << msg;
    EXPECT_NE(msg.find("fold 1 epoch 0: no score for x"), std::string::npos) << msg;
    EXPECT_NE(msg.find("fold 2: no epochs"), std::string::npos) << msg;
  }
  EXPECT_THROW(accumulate_scores(s, Reduction::MEAN_BEST_EPOCH, 2, {"x"}), ContractError);
}

TEST(TrainFold, GradientAccumulationMatchesLargeBatch) {
  Fixtures fx(10, 1, 64);  // BY_IMAGE, k=5: 8 training images per fold
  auto cfg = quick(1);
  cfg.grouping = FoldGrouping::BY_IMAGE;
  const auto folds = make_folds(fx.train.ds, 5, FoldGrouping::BY_IMAGE, cfg.seed);
  // Adam's first step is nearly scale-free, so compare the gradients too.
  auto capture = [](std::vector<double>& out) {
    TrainHooks h;
    h.before_step = [&out](models::Model& m, int, int, std::int64_t) {
      for (const auto& [name, t] : m.parameters().items()) {
        const auto g = t.grad();
        out.insert(out.end(), g.begin(), g.end());
      }
    };
    return h;
  };
  std::vector<double> g_big, g_acc;
  cfg.batch_size = 8;
  const auto big =
      train_fold(tiny(models::BackboneKind::GLOBAL_ATTN), 0, folds, fx.train, fx.test, cfg, capture(g_big));
  cfg.batch_size = 1;
  cfg.grad_accum_steps = 8;
  const auto acc =
      train_fold(tiny(models::BackboneKind::GLOBAL_ATTN), 0, folds, fx.train, fx.test, cfg, capture(g_acc));
  EXPECT_EQ(big.history[0].optimizer_steps, 1);
  EXPECT_EQ(acc.history[0].optimizer_steps, 1);
  ASSERT_EQ(g_big.size(), g_acc.size());
  double scale = 0.0, worst = 0.0;
  for (double g : g_big) scale = std::max(scale, std::abs(g));
  for (std::size_t i = 0; i < g_big.size(); ++i) worst = std::max(worst, std::abs(g_big[i] - g_acc[i]));
  EXPECT_GT(scale, 0.0);
  EXPECT_LE(worst / scale, 1e-10);
  EXPECT_LE(max_rel_diff(big.model->parameters(), acc.model->parameters()), 1e-5);
}

TEST(TrainFold, RemainderFlushesAtEpochEnd) {
  Fixtures fx(10, 1, 64);
  auto cfg = quick(2);
  cfg.grouping = FoldGrouping::BY_IMAGE;
  cfg.batch_size = 3;
  cfg.grad_accum_steps = 2;  // groups of 6 over 8 samples: 6 + 2
  const auto folds = make_folds(fx.train.ds, 5, FoldGrouping::BY_IMAGE, cfg.seed);
  const auto r = train_fold(tiny(models::BackboneKind::CONV_CBAM), 0, folds, fx.train, fx.test, cfg);
  EXPECT_EQ(r.history[0].optimizer_steps, 2);
  EXPECT_EQ(r.history[1].optimizer_steps, 4);
}

TEST(TrainFold, TwoEpochsFillTheFragment) {
  Fixtures fx(5, 2, 64);
  const auto folds = make_folds(fx.train.ds, 5, FoldGrouping::BY_PATIENT, 11);
  const auto r = train_fold(tiny(models::BackboneKind::LOCAL_ATTN), 3, folds, fx.train, fx.test, quick(2));
  EXPECT_EQ(r.fragment.entries().size(), 2 * fx.test.ds.size());
  EXPECT_EQ(r.fragment.val_f1().size(), 2u);
  EXPECT_EQ(r.fragment.slices(), (std::set<std::pair<int, int>>{{3, 0}, {3, 1}}));
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_DOUBLE_EQ(r.history[1].lr, 1e-3 * 0.9);
}

TEST(TrainFold, IdenticalSeedsGiveIdenticalTrajectories) {
  Fixtures fx(5, 2, 64);
  const auto folds = make_folds(fx.train.ds, 5, FoldGrouping::BY_PATIENT, 11);
  const auto a = train_fold(tiny(models::BackboneKind::GLOBAL_ATTN), 1, folds, fx.train, fx.test, quick(3));
  const auto b = train_fold(tiny(models::BackboneKind::GLOBAL_ATTN), 1, folds, fx.train, fx.test, quick(3));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_NEAR(a.history[e].val_macro_f1, b.history[e].val_macro_f1, 1e-6);
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
  }
  EXPECT_EQ(a.fragment, b.fragment);
}

TEST(TrainFold, EarlyStopKeepsLatestBestAfterPatience) {
  Fixtures fx(5, 2, 64);
  auto cfg = quick(10);
  cfg.lr = 1e-14;  // weights barely move: val F1 is flat
  cfg.early_stop = EarlyStop::ON_VAL_F1;
  cfg.patience = 2;
  const auto folds = make_folds(fx.train.ds, 5, FoldGrouping::BY_PATIENT, 11);
  const auto r = train_fold(tiny(models::BackboneKind::CONV_CBAM), 0, folds, fx.train, fx.test, cfg);
  ASSERT_EQ(r.history.size(), 3u);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.best_epoch, 2);
}

TEST(TrainFold, RejectsUnknownLabelsAndMissingClinical) {
  Fixtures fx(5, 2, 64);
  const auto folds = make_folds(fx.train.ds, 5, FoldGrouping::BY_PATIENT, 11);
  auto records = fx.train.ds.records();
  records[0].labels[2] = kUnknownLabel;
  const ImageSet unknown{Dataset(records, SplitTag::TRAIN, fx.train.ds.root()), fx.train.images};
  try {
    train_fold(tiny(models::BackboneKind::CONV_CBAM), folds.fold_of(records[0].image_id) == 0 ? 1 : 0, folds,
               unknown, fx.test, quick());
    FAIL() << "expected a contract error";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find(records[0].image_id), std::string::npos);
  }
  records = fx.train.ds.records();
  for (auto& r : records) r.clinical.reset();
  const ImageSet no_clinical{Dataset(records, SplitTag::TRAIN, fx.train.ds.root()), fx.train.images};
  auto spec = tiny(models::BackboneKind::CONV_CBAM);
  spec.n_outputs = 8;
  EXPECT_THROW(train_fold(spec, 0, folds, no_clinical, fx.test, quick()), ContractError);
  EXPECT_NO_THROW(train_fold(spec, 0, folds, fx.train, fx.test, quick()));
}

TEST(TrainFold, NonFiniteLossAbortsWithDiagnostic) {
  Fixtures fx(5, 2, 64);
  const auto folds = make_folds(fx.train.ds, 5, FoldGrouping::BY_PATIENT, 11);
  TrainHooks hooks;
  hooks.before_step = [](models::Model& m, int, int, std::int64_t step) {
    if (step == 1) {
      auto w = m.parameters().items().back().second;
      w.mutable_values()[0] = std::nan("");
    }
  };
  try {
    train_fold(tiny(models::BackboneKind::CONV_CBAM), 0, folds, fx.train, fx.test, quick(2), hooks);
    FAIL() << "expected training to abort";
  } catch (const TrainingAborted& e) {
    EXPECT_EQ(e.step, 2);
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("lr"), std::string::npos);
  }
}

TEST(RunCv, MergesFoldsResumesAndIsOrderIndependent) {
  Fixtures fx(5, 2, 64);
  const auto spec = tiny(models::BackboneKind::GLOBAL_ATTN);
  auto cfg = quick(2);
  const auto all = run_cv(spec, fx.train, fx.test, cfg);
  ASSERT_FALSE(all.failed());
  EXPECT_EQ(all.store.slices().size(), 10u);

  ScoreStore union_of_fragments;
  for (int f = 0; f < 5; ++f) {
    union_of_fragments.merge(train_fold(spec, f, all.assignment, fx.train, fx.test, cfg).fragment);
  }
  EXPECT_EQ(union_of_fragments, all.store);

  CvOptions only_two;
  only_two.folds = {2};
  ScoreStore resumed;
  for (int f : {0, 1, 3, 4}) resumed.merge(all.store.fold_fragment(f));
  resumed.merge(run_cv(spec, fx.train, fx.test, cfg, only_two).store);
  EXPECT_EQ(resumed, all.store);

  CvOptions parallel;
  parallel.jobs = 2;
  parallel.folds = {4, 3, 2, 1, 0};
  EXPECT_EQ(run_cv(spec, fx.train, fx.test, cfg, parallel).store, all.store);
}

TEST(RunCv, FailedFoldIsReportedAndOthersKept) {
  Fixtures fx(5, 2, 64);
  CvOptions opt;
  std::set<int> finished;
  opt.on_fold_done = [&](const FoldResult& r) { finished.insert(r.fold); };
  opt.hooks.before_step = [](models::Model& m, int fold, int, std::int64_t) {
    if (fold == 2) {
      auto w = m.parameters().items().front().second;
      w.mutable_values()[0] = std::nan("");
    }
  };
  const auto out = run_cv(tiny(models::BackboneKind::CONV_CBAM), fx.train, fx.test, quick(1), opt);
  EXPECT_TRUE(out.failed());
  ASSERT_EQ(out.failures.count(2), 1u);
  EXPECT_NE(out.failures.at(2).find("non-finite"), std::string::npos) << out.failures.at(2);
  EXPECT_EQ(finished, (std::set<int>{0, 1, 3, 4}));
  EXPECT_EQ(out.store.folds(), (std::set<int>{0, 1, 3, 4}));
}

TEST(Learnability, ConvCbamFitsTheFixture) {
  Fixtures fx(12, 8, 64);
  models::BackboneSpec spec;
  spec.kind = models::BackboneKind::CONV_CBAM;
  auto cfg = quick(30);
  cfg.lr = 2e-3;
  cfg.lr_decay = 0.95;
  cfg.batch_size = 8;
  cfg.augment = false;
  const auto folds = make_folds(fx.train.ds, 5, FoldGrouping::BY_PATIENT, cfg.seed);
  const auto r = train_fold(spec, 0, folds, fx.train, fx.test, cfg);
  const auto rows = folds.training_rows(fx.train.ds, 0);
  const auto probs = predict(*r.model, fx.train, rows);
  metrics::BitMatrix d, t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    metrics::BitRow dr{}, tr{};
    for (std::size_t j = 0; j < 6; ++j) {
      dr[j] = probs[i][j] >= 0.5;
      tr[j] = fx.train.ds.records()[rows[i]].labels[j];
    }
    d.push_back(dr);
    t.push_back(tr);
  }
  EXPECT_GE(metrics::macro_f1(metrics::per_biomarker_f1(d, t)), 0.9);
}
