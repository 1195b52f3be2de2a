#include "octbio/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include "octbio/cli/run_dir.hpp"
#include "octbio/core/digest.hpp"
#include "octbio/core/rng.hpp"
#include "octbio/models/checkpoint.hpp"

namespace octbio::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::ostream& out_of(const CommandOptions& o) { return o.out ? *o.out : std::cout; }
std::ostream& err_of(const CommandOptions& o) { return o.err ? *o.err : std::cerr; }

SplitTag test_split(const RunConfig& config) {
  return config.train.phase == augment::Phase::PHASE2 ? SplitTag::TEST_PHASE2 : SplitTag::TEST_PHASE1;
}

std::string join(const std::vector<std::string>& items, const std::string& sep = ", ") {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? sep : "") + items[i];
  return s;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Maps library exceptions onto exit codes.
template <class F>
int guarded(const CommandOptions& options, const char* command, F&& body) {
  std::ostream& err = err_of(options);
  try {
    return body();
  } catch (const RunDirError& e) {
    err << command << ": " << e.what() << '\n';
    return kExitRunDir;
  } catch (const IoError& e) {
    err << command << ": I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << command << ": I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    err << command << ": " << e.what() << '\n';
    return kExitInvalidData;
  } catch (const ValidationError& e) {
    err << command << ": " << e.what() << '\n';
    return kExitInvalidData;
  } catch (const ContractError& e) {
    err << command << ": " << e.what() << '\n';
    return kExitUsage;
  }
}

ojson dataset_summary(const Dataset& ds) {
  ojson positives = ojson::object();
  for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
    int n = 0;
    for (const auto& r : ds.records()) n += r.labels[j] == 1;
    positives[std::string(kBiomarkers[j].code)] = n;
  }
  return {{"split", std::string(to_string(ds.split()))},
          {"images", ds.size()},
          {"patients", ds.patients().size()},
          {"positives", positives}};
}

std::string describe(const std::string& name, const ojson& summary, const std::string& digest) {
  std::ostringstream s;
  s << name << ": " << summary["images"].get<std::size_t>() << " images, " << summary["patients"].get<std::size_t>()
    << " patients, positives";
  for (const auto& [code, n] : summary["positives"].items()) s << ' ' << code << '=' << n.get<int>();
  s << "\n  manifest sha256 " << digest;
  return s.str();
}

// Loads and re-validates a manifest written by cmd_fixtures.
Dataset checked_manifest(const fs::path& path, SplitTag split) {
  Dataset ds = load_manifest(path, {split});
  if (auto v = validate_dataset(ds); !v.empty()) throw ValidationError("invalid dataset " + path.string(), v);
  return ds;
}

}  // namespace

int cmd_fixtures(const RunConfig& config, const CommandOptions& options) {
  return guarded(options, "fixtures", [&] {
    RunDirectory run(config.output_dir, config, options.force, out_of(options));
    const fs::path train_manifest = run / "train/manifest.jsonl";
    const fs::path test_manifest = run / "test/manifest.jsonl";
    const SplitTag split = test_split(config);

    if (run.has_complete_marker() && run.meta_matches(train_manifest) && run.meta_matches(test_manifest)) {
      checked_manifest(train_manifest, SplitTag::TRAIN);
      checked_manifest(test_manifest, split);
      run.log("fixtures: " + run.path().string() + " is complete; nothing to do");
      return int{kExitOk};
    }
    run.clear_complete_marker();

    FixtureConfig train_cfg = config.fixture;
    FixtureConfig test_cfg = config.fixture;
    test_cfg.n_patients = config.fixture_test_patients;
    test_cfg.seed = derive_seed(config.seed, "fixture-test");
    test_cfg.split = split;
    test_cfg.id_prefix = "te";
    train_cfg.validate();
    test_cfg.validate();

    ojson summary = ojson::object();
    for (const auto& [name, cfg, manifest] :
         {std::tuple{std::string("train"), train_cfg, train_manifest}, std::tuple{std::string("test"), test_cfg, test_manifest}}) {
      generate_fixture(cfg, run / name);
      const Dataset ds = checked_manifest(manifest, cfg.split);
      const std::string digest = sha256_file(manifest);
      ojson s = dataset_summary(ds);
      run.write_meta(manifest, {{"manifest_digest", digest}, {"fixture_seed", cfg.seed}, {"summary", s}});
      run.log(describe(name, s, digest));
      summary[name] = {{"manifest_digest", digest}, {"summary", s}};
    }
    run.mark_complete(summary);
    return int{kExitOk};
  });
}

namespace {

fs::path fold_dir(const RunDirectory& run, int fold) { return run / ("folds/fold_" + std::to_string(fold)); }

// A fold is reusable once fold.json (written last) and its fragment carry this
// run's digest.
bool fold_complete(const RunDirectory& run, int fold) {
  const fs::path dir = fold_dir(run, fold);
  return run.meta_matches(dir / "fold.json") && run.meta_matches(dir / "scores.csv") &&
         run.meta_matches(dir / "val_f1.csv");
}

void persist_fold(const RunDirectory& run, const cv::FoldResult& r, bool best_weights) {
  const fs::path dir = fold_dir(run, r.fold);
  fs::create_directories(dir);
  r.fragment.write_csv(dir / "scores.csv", dir / "val_f1.csv");
  run.write_meta(dir / "scores.csv", {{"fold", r.fold}});
  run.write_meta(dir / "val_f1.csv", {{"fold", r.fold}});

  std::ostringstream h;
  h << "fold,epoch,lr,train_loss,val_macro_f1,optimizer_steps\n";
  for (const auto& e : r.history) {
    h << e.fold << ',' << e.epoch << ',' << fmt("%.17g", e.lr) << ',' << fmt("%.17g", e.train_loss) << ','
      << fmt("%.17g", e.val_macro_f1) << ',' << e.optimizer_steps << '\n';
  }
  write_text(dir / "history.csv", h.str());
  run.write_meta(dir / "history.csv", {{"fold", r.fold}});

  models::save_checkpoint(*r.model, dir / "checkpoint.json");
  run.write_meta(dir / "checkpoint.json",
                 {{"fold", r.fold},
                  {"checkpoint_digest", models::checkpoint_digest(*r.model)},
                  {"weights_from_epoch", best_weights || r.history.empty() ? r.best_epoch : r.history.back().epoch}});

  write_json(dir / "fold.json", {{"fold", r.fold},
                                 {"epochs_run", r.history.size()},
                                 {"best_epoch", r.best_epoch},
                                 {"best_val_f1", r.best_val_f1},
                                 {"stopped_early", r.stopped_early}});
  run.write_meta(dir / "fold.json", {{"fold", r.fold}});
}

ojson assignment_json(const cv::FoldAssignment& a) {
  ojson groups = ojson::object();
  for (const auto& [id, f] : a.assignments) groups[id] = f;
  return {{"k", a.k}, {"grouping", cv::to_string(a.grouping)}, {"seed", a.seed}, {"assignments", groups}};
}

// The decisions file shares the predictions meta; give it its own sidecar too.
void write_predictions(const RunDirectory& run, const ensemble::PredictionMatrix& pm, const fs::path& path,
                       const ojson& extra) {
  ensemble::write_predictions(pm, path, run.meta_fields(extra));
  if (pm.decisions) run.write_meta(ensemble::decisions_path(path), {{"predictions", path.filename().string()}});
}

fs::path predictions_file(const RunDirectory& run, cv::Reduction r) {
  return run / ("predictions." + cv::to_string(r) + ".csv");
}

}  // namespace

int cmd_cv(const RunConfig& config, const CommandOptions& options) {
  return guarded(options, "cv", [&]() -> int {
    if (config.train_manifest.empty() || config.test_manifest.empty()) {
      throw ContractError("dataset.train_manifest and dataset.test_manifest are required");
    }
    const Dataset train_ds = load_manifest(config.train_manifest, {SplitTag::TRAIN});
    const Dataset test_ds = load_manifest(config.test_manifest, {test_split(config), config.test_unlabeled});
    config.model.validate();
    config.train.validate();

    RunDirectory run(config.output_dir, config, options.force, out_of(options));
    const std::string train_digest = sha256_file(config.train_manifest);
    const std::string test_digest = sha256_file(config.test_manifest);
    const int k = config.train.k;
    const std::vector<cv::Reduction> reductions{cv::Reduction::MEAN_ALL, cv::Reduction::MEAN_BEST_EPOCH};

    std::vector<fs::path> declared{run / "folds.json", run / "scores.csv", run / "val_f1.csv", run / "predictions.csv"};
    for (auto r : reductions) declared.push_back(predictions_file(run, r));
    for (int f = 0; f < k; ++f) declared.push_back(fold_dir(run, f) / "fold.json");
    const bool outputs_present =
        std::all_of(declared.begin(), declared.end(), [&](const fs::path& p) { return run.meta_matches(p); });
    if (run.has_complete_marker() && outputs_present) {
      for (const auto& p : declared) {
        if (p.extension() == ".csv" && p.filename().string().starts_with("predictions")) ensemble::read_predictions(p);
      }
      run.log("cv: " + run.path().string() + " is complete; nothing to do");
      return kExitOk;
    }
    run.clear_complete_marker();

    const cv::FoldAssignment assignment = cv::make_folds(train_ds, k, config.train.grouping, config.train.seed);
    write_json(run / "folds.json", assignment_json(assignment));
    run.write_meta(run / "folds.json", {{"train_manifest_digest", train_digest}});

    cv::ScoreStore merged;
    std::vector<int> todo;
    for (int f = 0; f < k; ++f) {
      const fs::path dir = fold_dir(run, f);
      if (fold_complete(run, f)) {
        cv::ScoreStore fragment = cv::ScoreStore::read_csv(dir / "scores.csv", dir / "val_f1.csv");
        if (fragment.folds() != std::set<int>{f}) {
          throw ValidationError("fold fragment " + dir.string() + " holds other folds", {});
        }
        merged.merge(fragment);
        run.log("fold " + std::to_string(f) + ": reusing " + dir.string());
      } else {
        fs::remove_all(dir);
        todo.push_back(f);
      }
    }

    if (!todo.empty()) {
      const cv::ImageSet train = cv::ImageSet::load(train_ds);
      const cv::ImageSet test = cv::ImageSet::load(test_ds);
      cv::CvOptions cv_options;
      cv_options.jobs = config.jobs;
      cv_options.folds = todo;
      cv_options.hooks.on_epoch = [&](const cv::EpochLog& e) {
        run.log("fold " + std::to_string(e.fold) + " epoch " + std::to_string(e.epoch) + ": lr " + fmt("%.3g", e.lr) +
                " loss " + fmt("%.4f", e.train_loss) + " val_f1 " + fmt("%.4f", e.val_macro_f1));
      };
      cv_options.on_fold_done = [&](const cv::FoldResult& r) {
        persist_fold(run, r, config.train.early_stop == cv::EarlyStop::ON_VAL_F1);
        run.log("fold " + std::to_string(r.fold) + ": trained, best epoch " + std::to_string(r.best_epoch) +
                " (val_f1 " + fmt("%.4f", r.best_val_f1) + ")");
      };
      for (int f : todo) run.log("fold " + std::to_string(f) + ": training");
      const cv::CvOutcome outcome = cv::run_cv(config.model, train, test, config.train, cv_options);
      merged.merge(outcome.store);

      if (outcome.failed()) {
        merged.write_csv(run / "scores.partial.csv", run / "val_f1.partial.csv");
        run.write_meta(run / "scores.partial.csv", {{"partial", true}});
        run.write_meta(run / "val_f1.partial.csv", {{"partial", true}});
        std::vector<std::string> ids;
        std::ostream& err = err_of(options);
        for (const auto& [f, why] : outcome.failures) {
          ids.push_back(std::to_string(f));
          err << "cv: fold " << f << " failed: " << why << '\n';
        }
        err << "cv: failed folds: " << join(ids) << "; partial scores in " << (run / "scores.partial.csv").string()
            << '\n';
        return kExitTrainingFailed;
      }
    }

    merged.write_csv(run / "scores.csv", run / "val_f1.csv");
    run.write_meta(run / "scores.csv", {{"slices", merged.slices().size()}});
    run.write_meta(run / "val_f1.csv", {{"slices", merged.slices().size()}});

    std::vector<std::string> ids;
    for (const auto& r : test_ds.records()) ids.push_back(r.image_id);
    const ojson extra = {{"test_manifest_digest", test_digest},
                         {"train_manifest_digest", train_digest},
                         {"model_kind", models::to_string(config.model.kind)}};
    for (auto r : reductions) {
      const auto pm = ensemble::binarize(cv::accumulate_scores(merged, r, k, ids), config.threshold);
      ojson e = extra;
      e["reduction"] = cv::to_string(r);
      write_predictions(run, pm, predictions_file(run, r), e);
      if (r == config.reduction) write_predictions(run, pm, run / "predictions.csv", e);
    }

    // Re-read everything that was declared.
    if (cv::ScoreStore::read_csv(run / "scores.csv", run / "val_f1.csv") != merged) {
      throw ValidationError("merged score store does not round-trip", {});
    }
    for (auto r : reductions) ensemble::read_predictions(predictions_file(run, r));
    ensemble::read_predictions(run / "predictions.csv");
    if (merged.folds().size() != static_cast<std::size_t>(k)) {
      throw ValidationError("merged store covers " + std::to_string(merged.folds().size()) + " of " +
                                std::to_string(k) + " folds",
                            {});
    }

    std::vector<std::string> best;
    for (const auto& [f, e] : cv::best_epochs(merged)) best.push_back(std::to_string(f) + ":" + std::to_string(e));
    run.mark_complete({{"slices", merged.slices().size()}, {"test_manifest_digest", test_digest}});
    run.log("cv: " + std::to_string(merged.slices().size()) + " slices over " + std::to_string(k) +
            " folds; best epochs " + join(best) + "; predictions (" + cv::to_string(config.reduction) + ") in " +
            (run / "predictions.csv").string());
    return kExitOk;
  });
}

int cmd_ensemble(const RunConfig& config, const fs::path& run_a, const fs::path& run_b,
                 const CommandOptions& options) {
  return guarded(options, "ensemble", [&]() -> int {
    const fs::path pa = run_a / "predictions.csv";
    const fs::path pb = run_b / "predictions.csv";
    const std::string da = read_json(ensemble::meta_path(pa)).value("test_manifest_digest", "");
    const std::string db = read_json(ensemble::meta_path(pb)).value("test_manifest_digest", "");
    if (da.empty() || db.empty() || da != db) {
      err_of(options) << "ensemble: the runs were scored on different test manifests\n"
                      << "  " << run_a.string() << ": " << (da.empty() ? "<none>" : da) << '\n'
                      << "  " << run_b.string() << ": " << (db.empty() ? "<none>" : db) << '\n';
      return kExitDigestMismatch;
    }

    RunDirectory run(config.output_dir, config, options.force, out_of(options));
    const fs::path output = run / "predictions.csv";
    if (run.has_complete_marker() && run.meta_matches(output)) {
      ensemble::read_predictions(output);
      run.log("ensemble: " + run.path().string() + " is complete; nothing to do");
      return kExitOk;
    }
    run.clear_complete_marker();

    const auto a = ensemble::read_predictions(pa);
    const auto b = ensemble::read_predictions(pb);
    ojson extra = {{"test_manifest_digest", da},
                   {"run_a", run_a.string()},
                   {"run_b", run_b.string()},
                   {"scheme", ensemble::to_string(config.scheme)}};
    ensemble::PredictionMatrix combined;
    if (config.scheme == ensemble::Scheme::AVERAGE) {
      combined = ensemble::average_ensemble(a, b, config.weight_a);
      extra["weight_a"] = config.weight_a;
    } else {
      const auto table = ensemble::RoutingTable::defaults().with_overrides(config.routing);
      combined = ensemble::route_ensemble(a, b, table);
      extra["routing"] = table.describe();
    }
    combined = ensemble::binarize(combined, config.threshold);
    write_predictions(run, combined, output, extra);
    ensemble::read_predictions(output);
    run.mark_complete({{"test_manifest_digest", da}});
    run.log("ensemble: " + combined.source + " over " + std::to_string(combined.size()) + " images in " +
            output.string());
    return kExitOk;
  });
}

namespace {

std::string render_report(const metrics::MetricsReport& report, const std::string& name,
                          const std::vector<metrics::Outlier>& outliers, double outlier_threshold) {
  std::ostringstream s;
  s << metrics::render_table({{name, report.per_biomarker_f1}});
  s << "Micro F1: " << metrics::format_score(report.micro_f1) << '\n';
  s << "Patient-wise F1: " << metrics::format_score(report.patient_wise_f1) << '\n';
  s << "Outliers (patient-wise F1 < " << metrics::format_score(outlier_threshold) << "):";
  if (outliers.empty()) s << " none";
  s << '\n';
  for (const auto& o : outliers) {
    s << "  " << metrics::PatientKey{o.patient_id, o.week}.label() << ' ' << metrics::format_score(o.f1) << '\n';
  }
  return s.str();
}

ojson outliers_json(const std::vector<metrics::Outlier>& outliers) {
  ojson a = ojson::array();
  for (const auto& o : outliers) {
    a.push_back({{"patient_id", o.patient_id}, {"week", o.week ? ojson(*o.week) : ojson(nullptr)}, {"f1", o.f1}});
  }
  return a;
}

}  // namespace

int cmd_evaluate(const RunConfig& config, const fs::path& predictions, const fs::path& truth_manifest,
                 const CommandOptions& options) {
  return guarded(options, "evaluate", [&]() -> int {
    const auto pm = ensemble::read_predictions(predictions);
    const Dataset truth = load_manifest(truth_manifest, {test_split(config), false, false});

    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < truth.size(); ++i) row_of[truth.records()[i].image_id] = i;
    std::vector<std::string> unknown;
    std::set<std::string> predicted;
    for (const auto& id : pm.image_ids) {
      if (!row_of.count(id)) unknown.push_back(id);
      predicted.insert(id);
    }
    if (!unknown.empty()) {
      err_of(options) << "evaluate: " << unknown.size() << " image ids in " << predictions.string()
                      << " are not in " << truth_manifest.string() << ": " << join(unknown) << '\n';
      return kExitUnknownIds;
    }
    std::vector<std::string> missing;
    for (const auto& r : truth.records()) {
      if (!predicted.count(r.image_id)) missing.push_back(r.image_id);
    }
    if (!missing.empty()) {
      throw ValidationError("no prediction for " + std::to_string(missing.size()) + " truth images", missing);
    }

    RunDirectory run(config.output_dir, config, options.force, out_of(options));
    const fs::path json_path = run / "metrics.json";
    const fs::path text_path = run / "metrics.txt";
    const std::string name = predictions.parent_path().filename().string().empty()
                                 ? std::string("predictions")
                                 : predictions.parent_path().filename().string();
    if (run.has_complete_marker() && run.meta_matches(json_path) && run.meta_matches(text_path)) {
      metrics::MetricsReport::from_json(read_json(json_path));
      run.log("evaluate: " + run.path().string() + " is complete; nothing to do");
      return kExitOk;
    }
    run.clear_complete_marker();

    const metrics::BitMatrix truth_rows = metrics::truth_matrix(truth);
    metrics::BitMatrix truth_ordered;
    for (const auto& id : pm.image_ids) truth_ordered.push_back(truth_rows[row_of.at(id)]);
    const metrics::BitMatrix decisions =
        pm.decisions ? *pm.decisions : *ensemble::binarize(pm, config.threshold).decisions;

    const auto report = metrics::evaluate(decisions, truth_ordered, pm.image_ids,
                                          metrics::patient_index(truth, config.metrics.patient_by_week), config.metrics);
    const auto outliers = metrics::outlier_report(report.per_patient, config.outlier_threshold);

    ojson j = report.to_json();
    j["outlier_threshold"] = config.outlier_threshold;
    j["outliers"] = outliers_json(outliers);
    const ojson extra = {{"predictions", predictions.string()},
                         {"predictions_digest", sha256_file(predictions)},
                         {"truth_manifest_digest", sha256_file(truth_manifest)}};
    write_json(json_path, j);
    run.write_meta(json_path, extra);
    const std::string text = render_report(report, name, outliers, config.outlier_threshold);
    write_text(text_path, text);
    run.write_meta(text_path, extra);

    // The JSON must parse back into a valid report and render to the same table.
    const auto reread = metrics::MetricsReport::from_json(read_json(json_path));
    if (render_report(reread, name, outliers, config.outlier_threshold) != text) {
      throw ValidationError("metrics.json and metrics.txt disagree", {});
    }
    run.mark_complete({{"macro_f1", report.macro_f1}});
    out_of(options) << text;
    return kExitOk;
  });
}

int cmd_ablate_cbam(const RunConfig& config, const CommandOptions& options) {
  return guarded(options, "ablate-cbam", [&]() -> int {
    RunDirectory run(config.output_dir, config, options.force, out_of(options));
    const fs::path report_txt = run / "report.txt";
    const fs::path report_json = run / "report.json";
    if (run.has_complete_marker() && run.meta_matches(report_txt) && run.meta_matches(report_json)) {
      run.log("ablate-cbam: " + run.path().string() + " is complete; nothing to do");
      return kExitOk;
    }
    run.clear_complete_marker();

    struct Arm {
      std::string name;
      bool use_cbam;
      metrics::MetricsReport report;
      std::int64_t parameters = 0;
    };
    std::vector<Arm> arms{{"CONV", false, {}, 0}, {"CONV_CBAM", true, {}, 0}};
    CommandOptions inner = options;
    inner.force = false;
    for (auto& arm : arms) {
      RunConfig sub = config;
      sub.model.kind = models::BackboneKind::CONV_CBAM;
      sub.model.use_cbam = arm.use_cbam;
      sub.output_dir = run / (arm.use_cbam ? "cbam_on" : "cbam_off");
      if (int rc = cmd_cv(sub, inner); rc != kExitOk) return rc;
      RunConfig eval = sub;
      eval.output_dir = sub.output_dir / "eval";
      if (int rc = cmd_evaluate(eval, sub.output_dir / "predictions.csv", config.test_manifest, inner); rc != kExitOk) {
        return rc;
      }
      arm.report = metrics::MetricsReport::from_json(read_json(eval.output_dir / "metrics.json"));
      arm.parameters = models::build_model(sub.model, 0)->parameters().scalar_count();
    }

    std::ostringstream s;
    s << metrics::render_table({{arms[0].name, arms[0].report.per_biomarker_f1},
                                {arms[1].name, arms[1].report.per_biomarker_f1}},
                               true);
    s << "Micro F1: " << metrics::format_score(arms[0].report.micro_f1) << " | "
      << metrics::format_score(arms[1].report.micro_f1) << '\n';
    s << "Patient-wise F1: " << metrics::format_score(arms[0].report.patient_wise_f1) << " | "
      << metrics::format_score(arms[1].report.patient_wise_f1) << '\n';
    s << "Parameters: " << arms[0].parameters << " | " << arms[1].parameters << '\n';
    ojson j = ojson::object();
    for (const auto& arm : arms) {
      j[arm.name] = {{"use_cbam", arm.use_cbam}, {"parameters", arm.parameters}, {"metrics", arm.report.to_json()}};
    }
    write_text(report_txt, s.str());
    run.write_meta(report_txt);
    write_json(report_json, j);
    run.write_meta(report_json);
    run.mark_complete();
    out_of(options) << s.str();
    return kExitOk;
  });
}

}  // namespace octbio::cli
