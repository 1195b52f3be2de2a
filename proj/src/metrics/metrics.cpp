#include "octbio/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "octbio/core/error.hpp"

namespace octbio::metrics {

using ojson = nlohmann::ordered_json;

std::string to_string(ZeroDivisionPolicy p) { return p == ZeroDivisionPolicy::ONE ? "ONE" : "ZERO"; }

ZeroDivisionPolicy parse_zero_division(const std::string& text) {
  if (text == "ONE") return ZeroDivisionPolicy::ONE;
  if (text == "ZERO") return ZeroDivisionPolicy::ZERO;
  throw ContractError("unknown zero-division policy '" + text + "' (expected ONE or ZERO)");
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

double f1_from_counts(const ConfusionCounts& c, ZeroDivisionPolicy policy) {
  const auto denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return policy == ZeroDivisionPolicy::ONE ? 1.0 : 0.0;
  return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

BitMatrix truth_matrix(const Dataset& ds) {
  BitMatrix out;
  out.reserve(ds.size());
  for (const auto& r : ds.records()) {
    if (r.labels.size() != kNumBiomarkers) throw ContractError("record " + r.image_id + " has a bad label vector");
    BitRow row{};
    std::copy(r.labels.begin(), r.labels.end(), row.begin());
    out.push_back(row);
  }
  return out;
}

namespace {

void check_bits(const BitMatrix& m, const char* what) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
      if (m[i][j] != 0 && m[i][j] != 1) {
        throw ContractError(std::string(what) + " row " + std::to_string(i) + " column " +
                            std::string(kBiomarkers[j].code) + " is not 0/1 (UNKNOWN truth cannot be scored)");
      }
    }
  }
}

void check_pair(const BitMatrix& d, const BitMatrix& t) {
  if (d.size() != t.size()) {
    throw ContractError("decisions have " + std::to_string(d.size()) + " rows, truth has " +
                        std::to_string(t.size()));
  }
  check_bits(d, "decisions");
  check_bits(t, "truth");
}

void tally(ConfusionCounts& c, int d, int t) {
  if (d && t) ++c.tp;
  else if (d) ++c.fp;
  else if (t) ++c.fn;
  else ++c.tn;
}

}  // namespace

std::array<ConfusionCounts, kNumBiomarkers> confusion_per_biomarker(const BitMatrix& decisions,
                                                                    const BitMatrix& truth) {
  check_pair(decisions, truth);
  std::array<ConfusionCounts, kNumBiomarkers> out{};
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    for (std::size_t j = 0; j < kNumBiomarkers; ++j) tally(out[j], decisions[i][j], truth[i][j]);
  }
  return out;
}

std::array<double, kNumBiomarkers> per_biomarker_f1(const BitMatrix& decisions, const BitMatrix& truth,
                                                    ZeroDivisionPolicy policy) {
  const auto counts = confusion_per_biomarker(decisions, truth);
  std::array<double, kNumBiomarkers> out{};
  for (std::size_t j = 0; j < kNumBiomarkers; ++j) out[j] = f1_from_counts(counts[j], policy);
  return out;
}

double macro_f1(const std::array<double, kNumBiomarkers>& per_biomarker) {
  return std::accumulate(per_biomarker.begin(), per_biomarker.end(), 0.0) / static_cast<double>(kNumBiomarkers);
}

double micro_f1(const BitMatrix& decisions, const BitMatrix& truth, ZeroDivisionPolicy policy) {
  ConfusionCounts pooled;
  for (const auto& c : confusion_per_biomarker(decisions, truth)) pooled += c;
  return f1_from_counts(pooled, policy);
}

std::string PatientKey::label() const {
  return week ? patient_id + "@w" + std::to_string(*week) : patient_id;
}

std::map<std::string, PatientKey> patient_index(const Dataset& ds, bool by_week) {
  std::map<std::string, PatientKey> out;
  for (const auto& r : ds.records()) {
    out[r.image_id] = PatientKey{r.patient_id, by_week ? std::optional<int>(r.week) : std::nullopt};
  }
  return out;
}

PatientWise patient_wise_f1(const BitMatrix& decisions, const BitMatrix& truth,
                            const std::vector<std::string>& image_ids,
                            const std::map<std::string, PatientKey>& patient_of, ZeroDivisionPolicy policy) {
  check_pair(decisions, truth);
  if (image_ids.size() != decisions.size()) throw ContractError("image_ids and decisions differ in length");
  std::vector<std::string> unmapped;
  std::map<PatientKey, std::pair<ConfusionCounts, std::int64_t>> pooled;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    const auto it = patient_of.find(image_ids[i]);
    if (it == patient_of.end()) {
      unmapped.push_back(image_ids[i]);
      continue;
    }
    auto& [counts, n] = pooled[it->second];
    for (std::size_t j = 0; j < kNumBiomarkers; ++j) tally(counts, decisions[i][j], truth[i][j]);
    ++n;
  }
  if (!unmapped.empty()) {
    std::string msg = "images without a patient:";
    for (const auto& id : unmapped) msg += " " + id;
    throw ContractError(msg);
  }
  PatientWise out;
  double sum = 0.0;
  for (const auto& [key, cn] : pooled) {
    const double f1 = f1_from_counts(cn.first, policy);
    out.per_patient[key] = {f1, cn.second};
    sum += f1;
  }
  out.mean_f1 = pooled.empty() ? 0.0 : sum / static_cast<double>(pooled.size());
  return out;
}

std::vector<Outlier> outlier_report(const std::map<PatientKey, PatientScore>& per_patient, double threshold) {
  std::vector<std::pair<PatientKey, double>> low;
  for (const auto& [key, score] : per_patient) {
    if (score.f1 < threshold) low.emplace_back(key, score.f1);
  }
  std::stable_sort(low.begin(), low.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  std::vector<Outlier> out;
  for (const auto& [key, f1] : low) out.push_back({key.patient_id, key.week, f1});
  return out;
}

std::vector<std::string> MetricsReport::check_invariants() const {
  std::vector<std::string> v;
  auto in_unit = [&](double x, const std::string& what) {
    if (!(x >= 0.0 && x <= 1.0)) v.push_back(what + " = " + std::to_string(x) + " is outside [0, 1]");
  };
  for (std::size_t j = 0; j < kNumBiomarkers; ++j) in_unit(per_biomarker_f1[j], std::string(kBiomarkers[j].code));
  in_unit(macro_f1, "macro_f1");
  in_unit(micro_f1, "micro_f1");
  in_unit(patient_wise_f1, "patient_wise_f1");
  if (std::abs(macro_f1 - metrics::macro_f1(per_biomarker_f1)) > 1e-9) {
    v.push_back("macro_f1 differs from the mean of per-biomarker F1");
  }
  double sum = 0.0;
  for (const auto& [key, s] : per_patient) {
    in_unit(s.f1, "patient " + key.label());
    sum += s.f1;
  }
  const double mean = per_patient.empty() ? 0.0 : sum / static_cast<double>(per_patient.size());
  if (std::abs(patient_wise_f1 - mean) > 1e-9) v.push_back("patient_wise_f1 differs from the mean of per-patient F1");
  return v;
}

ojson MetricsReport::to_json() const {
  ojson per = ojson::object();
  ojson counts = ojson::object();
  for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
    const auto code = std::string(kBiomarkers[j].code);
    per[code] = per_biomarker_f1[j];
    counts[code] = {{"tp", confusion[j].tp}, {"fp", confusion[j].fp}, {"fn", confusion[j].fn}, {"tn", confusion[j].tn}};
  }
  ojson patients = ojson::array();
  for (const auto& [key, s] : per_patient) {
    ojson p = {{"patient_id", key.patient_id}};
    p["week"] = key.week ? ojson(*key.week) : ojson(nullptr);
    p["f1"] = s.f1;
    p["n_images"] = s.n_images;
    patients.push_back(std::move(p));
  }
  return {{"n_images", n_images},
          {"image_zero_division", to_string(image_policy)},
          {"patient_zero_division", to_string(patient_policy)},
          {"per_biomarker_f1", per},
          {"confusion", counts},
          {"macro_f1", macro_f1},
          {"micro_f1", micro_f1},
          {"patient_wise_f1", patient_wise_f1},
          {"per_patient", patients}};
}

MetricsReport MetricsReport::from_json(const ojson& j) {
  MetricsReport r;
  try {
    r.n_images = j.at("n_images").get<std::int64_t>();
    r.image_policy = parse_zero_division(j.at("image_zero_division").get<std::string>());
    r.patient_policy = parse_zero_division(j.at("patient_zero_division").get<std::string>());
    for (std::size_t k = 0; k < kNumBiomarkers; ++k) {
      const auto code = std::string(kBiomarkers[k].code);
      r.per_biomarker_f1[k] = j.at("per_biomarker_f1").at(code).get<double>();
      const auto& c = j.at("confusion").at(code);
      r.confusion[k] = {c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(),
                        c.at("fn").get<std::int64_t>(), c.at("tn").get<std::int64_t>()};
    }
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.micro_f1 = j.at("micro_f1").get<double>();
    r.patient_wise_f1 = j.at("patient_wise_f1").get<double>();
    for (const auto& p : j.at("per_patient")) {
      PatientKey key{p.at("patient_id").get<std::string>(), std::nullopt};
      if (!p.at("week").is_null()) key.week = p.at("week").get<int>();
      r.per_patient[key] = {p.at("f1").get<double>(), p.at("n_images").get<std::int64_t>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed metrics report", {e.what()});
  }
  if (auto v = r.check_invariants(); !v.empty()) throw ValidationError("metrics report violates its invariants", v);
  return r;
}

MetricsReport evaluate(const BitMatrix& decisions, const BitMatrix& truth, const std::vector<std::string>& image_ids,
                       const std::map<std::string, PatientKey>& patient_of, const EvaluateOptions& options) {
  MetricsReport r;
  r.image_policy = options.image_policy;
  r.patient_policy = options.patient_policy;
  r.n_images = static_cast<std::int64_t>(decisions.size());
  r.confusion = confusion_per_biomarker(decisions, truth);
  for (std::size_t j = 0; j < kNumBiomarkers; ++j) r.per_biomarker_f1[j] = f1_from_counts(r.confusion[j], r.image_policy);
  r.macro_f1 = macro_f1(r.per_biomarker_f1);
  r.micro_f1 = micro_f1(decisions, truth, r.image_policy);
  auto pw = patient_wise_f1(decisions, truth, image_ids, patient_of, r.patient_policy);
  r.per_patient = std::move(pw.per_patient);
  r.patient_wise_f1 = pw.mean_f1;
  return r;
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string render_table(const std::vector<TableColumn>& columns, bool mark_gains) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"Biomarker", "Type"};
  for (const auto& c : columns) header.push_back(c.name);
  rows.push_back(header);
  auto cell = [&](std::size_t col, double v, double base) {
    auto s = format_score(v);
    if (mark_gains && col > 0 && std::round(v * 1e4) > std::round(base * 1e4)) s += " (+)";
    return s;
  };
  for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
    std::vector<std::string> row = {std::string(kBiomarkers[j].display_name),
                                    std::string(type_tag(kBiomarkers[j].locality))};
    for (std::size_t c = 0; c < columns.size(); ++c) {
      row.push_back(cell(c, columns[c].per_biomarker[j], columns[0].per_biomarker[j]));
    }
    rows.push_back(row);
  }
  std::vector<std::string> overall = {"Overall", ""};
  for (std::size_t c = 0; c < columns.size(); ++c) {
    overall.push_back(cell(c, macro_f1(columns[c].per_biomarker), macro_f1(columns[0].per_biomarker)));
  }
  rows.push_back(overall);

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      out << (c ? " | " : "") << r[c] << std::string(width[c] - r[c].size(), ' ');
    }
    out << '\n';
  };
  emit(rows[0]);
  for (std::size_t c = 0; c < width.size(); ++c) out << (c ? "-|-" : "") << std::string(width[c], '-');
  out << '\n';
  for (std::size_t i = 1; i < rows.size(); ++i) emit(rows[i]);
  return out.str();
}

}  // namespace octbio::metrics
