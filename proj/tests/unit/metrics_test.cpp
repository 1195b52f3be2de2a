#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "octbio/core/error.hpp"
#include "octbio/core/rng.hpp"
#include "octbio/metrics/metrics.hpp"
#include "oracles.hpp"

using namespace octbio;
using namespace octbio::metrics;

namespace {

struct Instance {
  BitMatrix decisions, truth;
  std::vector<std::string> ids;
  std::map<std::string, PatientKey> patient_of;
  std::vector<std::vector<int>> d_int, t_int;
  std::map<std::string, std::vector<std::size_t>> rows_of;
};

Instance random_instance(std::uint64_t seed, int max_images = 50, int max_patients = 8) {
  Rng rng(seed);
  Instance in;
  const auto n = rng.randint(1, max_images + 1);
  const auto p = rng.randint(1, max_patients + 1);
  const double density = rng.uniform(0.0, 0.6);
  for (std::int64_t i = 0; i < n; ++i) {
    BitRow d{}, t{};
    std::vector<int> di(6), ti(6);
    for (int j = 0; j < 6; ++j) {
      t[j] = static_cast<std::int8_t>(rng.bernoulli(density));
      d[j] = static_cast<std::int8_t>(rng.bernoulli(0.7) ? t[j] : rng.bernoulli(density));
      di[j] = d[j];
      ti[j] = t[j];
    }
    in.decisions.push_back(d);
    in.truth.push_back(t);
    in.d_int.push_back(di);
    in.t_int.push_back(ti);
    const auto id = "img" + std::to_string(i);
    const auto patient = "P" + std::to_string(rng.randint(0, p));
    in.ids.push_back(id);
    in.patient_of[id] = {patient, std::nullopt};
    in.rows_of[patient].push_back(static_cast<std::size_t>(i));
  }
  return in;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

}  // namespace

TEST(F1FromCounts, HandEnumeratedValues) {
  EXPECT_NEAR(f1_from_counts({1, 1, 0, 0}), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(f1_from_counts({5, 0, 0, 0}), 1.0);
  EXPECT_EQ(f1_from_counts({0, 0, 0, 10}, ZeroDivisionPolicy::ONE), 1.0);
  EXPECT_EQ(f1_from_counts({0, 0, 0, 10}, ZeroDivisionPolicy::ZERO), 0.0);
  EXPECT_EQ(f1_from_counts({0, 3, 2, 1}), 0.0);
}

TEST(F1FromCounts, RangeAndPerfectionRule) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const ConfusionCounts c{rng.randint(0, 4), rng.randint(0, 4), rng.randint(0, 4), rng.randint(0, 4)};
    for (auto policy : {ZeroDivisionPolicy::ONE, ZeroDivisionPolicy::ZERO}) {
      const double f = f1_from_counts(c, policy);
      ASSERT_GE(f, 0.0);
      ASSERT_LE(f, 1.0);
      if (c.tp > 0 || policy == ZeroDivisionPolicy::ONE) {
        ASSERT_EQ(f == 1.0, c.fp == 0 && c.fn == 0);
      }
    }
  }
}

TEST(PerBiomarker, SingleColumnAndIdentity) {
  BitMatrix truth = {{1, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}};
  BitMatrix dec = {{1, 0, 0, 0, 0, 0}, {1, 0, 0, 0, 0, 0}};
  const auto f = per_biomarker_f1(dec, truth);
  EXPECT_NEAR(f[0], 0.6667, 1e-4);
  const auto same = per_biomarker_f1(truth, truth, ZeroDivisionPolicy::ONE);
  for (double v : same) EXPECT_EQ(v, 1.0);
  EXPECT_THROW(per_biomarker_f1(dec, {truth[0]}), ContractError);
  truth[1][2] = kUnknownLabel;
  EXPECT_THROW(per_biomarker_f1(dec, truth), ContractError);
}

TEST(PerBiomarker, RowPermutationInvariant) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto in = random_instance(s);
    const auto before = per_biomarker_f1(in.decisions, in.truth);
    const auto micro = micro_f1(in.decisions, in.truth);
    std::vector<std::size_t> order = all_rows(in.decisions.size());
    std::reverse(order.begin(), order.end());
    BitMatrix d, t;
    for (auto i : order) {
      d.push_back(in.decisions[i]);
      t.push_back(in.truth[i]);
    }
    ASSERT_EQ(per_biomarker_f1(d, t), before);
    ASSERT_EQ(micro_f1(d, t), micro);
  }
}

TEST(MacroMicro, ComparisonTableColumns) {
  EXPECT_NEAR(macro_f1({0.774, 0.677, 0.868, 0.611, 0.615, 0.764}), 0.7182, 1e-4);
  EXPECT_NEAR(macro_f1({0.779, 0.688, 0.879, 0.600, 0.618, 0.782}), 0.7243, 1e-4);
  BitMatrix truth = {{1, 1, 0, 0, 1, 0}, {0, 1, 1, 1, 0, 1}};
  EXPECT_EQ(micro_f1(truth, truth), 1.0);
  EXPECT_EQ(macro_f1(per_biomarker_f1(truth, truth, ZeroDivisionPolicy::ONE)), 1.0);
}

TEST(MacroMicro, AgreeForProportionalProfiles) {
  // Every column has the same confusion profile, so pooled and averaged F1 coincide.
  BitMatrix d, t;
  const int pattern[][2] = {{1, 1}, {1, 1}, {1, 0}, {0, 1}, {0, 0}};
  for (const auto& p : pattern) {
    BitRow dr, tr;
    dr.fill(static_cast<std::int8_t>(p[0]));
    tr.fill(static_cast<std::int8_t>(p[1]));
    d.push_back(dr);
    t.push_back(tr);
  }
  EXPECT_NEAR(micro_f1(d, t), macro_f1(per_biomarker_f1(d, t)), 1e-12);
}

TEST(PatientWise, SimpleCases) {
  // Patient A perfect, patient B at 0.6 (tp 3, fp 2, fn 2).
  BitMatrix truth = {{1, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 0}};
  BitMatrix dec = {{1, 0, 0, 0, 0, 0}, {1, 1, 1, 0, 0, 1}};
  truth.push_back({0, 0, 0, 0, 0, 1});
  dec.push_back({0, 0, 0, 0, 0, 1});
  const std::vector<std::string> ids = {"a1", "b1", "b2"};
  std::map<std::string, PatientKey> of = {{"a1", {"A", {}}}, {"b1", {"B", {}}}, {"b2", {"B", {}}}};
  dec[2][0] = 1;  // one more fp for B
  const auto pw = patient_wise_f1(dec, truth, ids, of);
  EXPECT_EQ(pw.per_patient.at({"A", {}}).f1, 1.0);
  EXPECT_NEAR(pw.per_patient.at({"B", {}}).f1, 2.0 * 4 / (2.0 * 4 + 2 + 2), 1e-12);
  EXPECT_EQ(pw.per_patient.at({"B", {}}).n_images, 2);

  const BitMatrix zeros = {{0, 0, 0, 0, 0, 0}};
  const auto one = patient_wise_f1(zeros, zeros, {"x"}, {{"x", {"P", {}}}}, ZeroDivisionPolicy::ONE);
  EXPECT_EQ(one.mean_f1, 1.0);
  EXPECT_THROW(patient_wise_f1(zeros, zeros, {"y"}, {{"x", {"P", {}}}}), ContractError);
}

TEST(PatientWise, MeanOfTwoPatients) {
  std::map<PatientKey, PatientScore> per = {{{"A", {}}, {1.0, 1}}, {{"B", {}}, {0.6, 2}}};
  MetricsReport r;
  r.per_patient = per;
  r.patient_wise_f1 = 0.8;
  r.per_biomarker_f1.fill(0.5);
  r.macro_f1 = 0.5;
  EXPECT_TRUE(r.check_invariants().empty());
}

TEST(Oracle, RandomInstancesMatchBruteForce) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto in = random_instance(1000 + s);
    const auto rows = all_rows(in.decisions.size());
    const auto per = per_biomarker_f1(in.decisions, in.truth, ZeroDivisionPolicy::ZERO);
    for (int j = 0; j < 6; ++j) {
      ASSERT_NEAR(per[static_cast<std::size_t>(j)], octbio::testing::brute_f1(in.d_int, in.t_int, rows, {j}, 0.0),
                  1e-12);
    }
    ASSERT_NEAR(micro_f1(in.decisions, in.truth),
                octbio::testing::brute_f1(in.d_int, in.t_int, rows, {0, 1, 2, 3, 4, 5}, 0.0), 1e-12);
    const auto pw = patient_wise_f1(in.decisions, in.truth, in.ids, in.patient_of, ZeroDivisionPolicy::ONE);
    double sum = 0;
    for (const auto& [patient, prow] : in.rows_of) {
      const double f = octbio::testing::brute_f1(in.d_int, in.t_int, prow, {0, 1, 2, 3, 4, 5}, 1.0);
      ASSERT_NEAR(pw.per_patient.at({patient, {}}).f1, f, 1e-12);
      sum += f;
    }
    ASSERT_NEAR(pw.mean_f1, sum / static_cast<double>(in.rows_of.size()), 1e-12);
  }
}

TEST(Outliers, FilterAndSort) {
  std::map<PatientKey, PatientScore> all_good = {{{"A", {}}, {1.0, 1}}, {{"B", {}}, {1.0, 1}}};
  EXPECT_TRUE(outlier_report(all_good, 0.65).empty());
  std::map<PatientKey, PatientScore> m = {{{"C", {}}, {0.9, 1}}, {{"B", {}}, {0.64, 1}}, {{"A", {}}, {0.37, 1}}};
  const auto out = outlier_report(m, 0.65);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].patient_id, "A");
  EXPECT_EQ(out[0].f1, 0.37);
  EXPECT_EQ(out[1].patient_id, "B");

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    std::map<PatientKey, PatientScore> r;
    for (int k = 0; k < 20; ++k) r[{"P" + std::to_string(k), static_cast<int>(rng.randint(0, 3)) * 40}] = {rng.uniform(), 1};
    const auto o = outlier_report(r, 0.5);
    ASSERT_TRUE(std::is_sorted(o.begin(), o.end(), [](const auto& a, const auto& b) { return a.f1 < b.f1; }));
    for (const auto& e : o) ASSERT_LT(e.f1, 0.5);
  }
}

TEST(Report, JsonRoundTripReassertsInvariants) {
  const auto in = random_instance(77);
  const auto report = evaluate(in.decisions, in.truth, in.ids, in.patient_of);
  EXPECT_TRUE(report.check_invariants().empty());
  const auto back = MetricsReport::from_json(report.to_json());
  EXPECT_EQ(back.per_biomarker_f1, report.per_biomarker_f1);
  EXPECT_EQ(back.per_patient, report.per_patient);
  EXPECT_EQ(back.macro_f1, report.macro_f1);

  auto j = report.to_json();
  j["macro_f1"] = report.macro_f1 + 0.01;
  EXPECT_THROW(MetricsReport::from_json(j), ValidationError);
}

TEST(Report, PerfectDecisionsScoreOne) {
  auto in = random_instance(5);
  const auto r = evaluate(in.truth, in.truth, in.ids, in.patient_of,
                          {ZeroDivisionPolicy::ONE, ZeroDivisionPolicy::ONE, false});
  EXPECT_EQ(r.macro_f1, 1.0);
  EXPECT_EQ(r.micro_f1, 1.0);
  EXPECT_EQ(r.patient_wise_f1, 1.0);
}

TEST(Table, LayoutMatchesComparisonTables) {
  const auto table = render_table({{"MaxViT", {0.774, 0.677, 0.868, 0.611, 0.615, 0.764}},
                                   {"EVA-02", {0.731, 0.701, 0.874, 0.575, 0.593, 0.779}}},
                                  true);
  std::vector<std::string> lines;
  std::string line;
  std::istringstream ss(table);
  while (std::getline(ss, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 9u);
  const char* order[] = {"IRHRF", "PAVF", "FAVF", "IRF", "DRT/DME", "VD", "Overall"};
  for (int i = 0; i < 7; ++i) EXPECT_EQ(lines[static_cast<std::size_t>(i + 2)].rfind(order[i], 0), 0u) << lines[i + 2];
  EXPECT_NE(lines[0].find("Type"), std::string::npos);
  EXPECT_NE(lines[2].find(" L "), std::string::npos);
  EXPECT_NE(lines[6].find("L/G"), std::string::npos);
  EXPECT_NE(lines[8].find("0.7182"), std::string::npos);
  EXPECT_NE(lines[3].find("0.7010 (+)"), std::string::npos);
  EXPECT_EQ(lines[2].find("(+)"), std::string::npos);
}
