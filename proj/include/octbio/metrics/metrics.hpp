#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "octbio/core/biomarker.hpp"
#include "octbio/core/dataset.hpp"

namespace octbio::metrics {

// Value returned when tp = fp = fn = 0.
enum class ZeroDivisionPolicy { ONE, ZERO };
std::string to_string(ZeroDivisionPolicy p);
ZeroDivisionPolicy parse_zero_division(const std::string& text);

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::int64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

double f1_from_counts(const ConfusionCounts& c, ZeroDivisionPolicy policy = ZeroDivisionPolicy::ONE);

// N x 6 matrices of 0/1 entries (truth may not contain UNKNOWN).
using BitRow = std::array<std::int8_t, kNumBiomarkers>;
using BitMatrix = std::vector<BitRow>;

BitMatrix truth_matrix(const Dataset& ds);

std::array<ConfusionCounts, kNumBiomarkers> confusion_per_biomarker(const BitMatrix& decisions,
                                                                    const BitMatrix& truth);
std::array<double, kNumBiomarkers> per_biomarker_f1(const BitMatrix& decisions, const BitMatrix& truth,
                                                    ZeroDivisionPolicy policy = ZeroDivisionPolicy::ZERO);
double macro_f1(const std::array<double, kNumBiomarkers>& per_biomarker);
double micro_f1(const BitMatrix& decisions, const BitMatrix& truth,
                ZeroDivisionPolicy policy = ZeroDivisionPolicy::ZERO);

// Grouping key for patient-wise scoring; week is set when scoring per visit.
struct PatientKey {
  std::string patient_id;
  std::optional<int> week;
  std::string label() const;  // "01-002" or "01-002@w40"
  auto operator<=>(const PatientKey&) const = default;
};

struct PatientScore {
  double f1 = 0.0;
  std::int64_t n_images = 0;
  bool operator==(const PatientScore&) const = default;
};

struct PatientWise {
  std::map<PatientKey, PatientScore> per_patient;
  double mean_f1 = 0.0;
};

// image_id -> patient key, optionally split by visit week.
std::map<std::string, PatientKey> patient_index(const Dataset& ds, bool by_week = false);

// Per patient, F1 pooled over that patient's (image, biomarker) pairs;
// then the unweighted mean over patients.
PatientWise patient_wise_f1(const BitMatrix& decisions, const BitMatrix& truth,
                            const std::vector<std::string>& image_ids,
                            const std::map<std::string, PatientKey>& patient_of,
                            ZeroDivisionPolicy policy = ZeroDivisionPolicy::ONE);

struct Outlier {
  std::string patient_id;
  std::optional<int> week;
  double f1 = 0.0;
};

// Patients below threshold, ascending by F1 (ties by key).
std::vector<Outlier> outlier_report(const std::map<PatientKey, PatientScore>& per_patient, double threshold);

struct MetricsReport {
  std::array<double, kNumBiomarkers> per_biomarker_f1{};
  std::array<ConfusionCounts, kNumBiomarkers> confusion{};
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::map<PatientKey, PatientScore> per_patient;
  double patient_wise_f1 = 0.0;
  ZeroDivisionPolicy image_policy = ZeroDivisionPolicy::ZERO;
  ZeroDivisionPolicy patient_policy = ZeroDivisionPolicy::ONE;
  std::int64_t n_images = 0;

  // Empty iff macro = mean(per-biomarker), patient-wise = mean(per-patient)
  // and all scores lie in [0, 1].
  std::vector<std::string> check_invariants() const;

  nlohmann::ordered_json to_json() const;
  // Throws ValidationError if the document violates the invariants.
  static MetricsReport from_json(const nlohmann::ordered_json& j);
};

struct EvaluateOptions {
  ZeroDivisionPolicy image_policy = ZeroDivisionPolicy::ZERO;
  ZeroDivisionPolicy patient_policy = ZeroDivisionPolicy::ONE;
  bool patient_by_week = false;
};

MetricsReport evaluate(const BitMatrix& decisions, const BitMatrix& truth, const std::vector<std::string>& image_ids,
                       const std::map<std::string, PatientKey>& patient_of, const EvaluateOptions& options = {});

// Biomarker | Type | one column per model, six rows in registry order and an
// Overall (macro) row, scores at 4 decimals. With mark_gains, cells that beat
// the first column get a "(+)" suffix.
struct TableColumn {
  std::string name;
  std::array<double, kNumBiomarkers> per_biomarker{};
};
std::string render_table(const std::vector<TableColumn>& columns, bool mark_gains = false);

std::string format_score(double v);  // 4 decimals

}  // namespace octbio::metrics
