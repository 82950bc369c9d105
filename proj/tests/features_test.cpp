#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "readmit/errors.hpp"
#include "readmit/features.hpp"

using namespace readmit;
using fixtures::admission;
using fixtures::patient;

namespace {

const CharlsonWeightTable& table() {
  static CharlsonWeightTable t = CharlsonWeightTable::classic();
  return t;
}

std::vector<PatientHistory> small_cohort() {
  std::vector<PatientHistory> cohort;
  cohort.push_back(patient(
      "P1", 72, Sex::female,
      {admission("P1-A1", "P1", "2010-01-05", "2010-01-09", true, true, false,
                 {"dementia"}),
       admission("P1-A2", "P1", "2010-02-10", "2010-02-12", false, false, true,
                 {"dementia", "renal_disease"}),
       admission("P1-A3", "P1", "2010-03-01", "2010-03-06", true, true, false,
                 {"dementia", "renal_disease"})}));
  cohort.push_back(patient(
      "P2", 88, Sex::male,
      {admission("P2-A1", "P2", "2010-06-15", "2010-06-20", true, false, false,
                 {})}));
  return cohort;
}

}  // namespace

TEST_CASE("canonical registry layout") {
  auto reg = FeatureRegistry::create();
  const std::vector<std::string> expected = {
      "los_days",      "acute_admission", "cci_score",
      "ed_visits_6mo", "admissions_6mo",  "surgery",
      "num_medications", "num_consultations",
      "season_winter", "season_spring",   "season_summer", "season_fall",
      "sex",           "age"};
  CHECK(reg.names() == expected);
  CHECK(reg.descriptors().back().kind == FeatureKind::static_demographic);

  auto bucketed = FeatureRegistry::create({.bucket_age = true, .exclude = {}});
  CHECK(bucketed.names().back() == "age_85_plus");
  CHECK(bucketed.size() == expected.size() + 2);
  CHECK(bucketed.schema_hash() != reg.schema_hash());

  auto ablated = FeatureRegistry::create({.bucket_age = false,
                                          .exclude = {"age", "surgery"}});
  CHECK(ablated.index_of("age") == -1);
  CHECK(ablated.index_of("surgery") == -1);
  CHECK(ablated.size() == expected.size() - 2);

  CHECK_THROWS_WITH_AS(
      FeatureRegistry::create({.bucket_age = false, .exclude = {"bogus"}}),
      doctest::Contains("bogus"), ConfigError);
}

TEST_CASE("raw feature extraction") {
  auto cohort = small_cohort();
  auto reg = FeatureRegistry::create();
  Eigen::VectorXd row = reg.raw_features(cohort[0], 2, table());
  CHECK(row[reg.index_of("los_days")] == 5.0);
  CHECK(row[reg.index_of("acute_admission")] == 1.0);
  CHECK(row[reg.index_of("cci_score")] == 3.0);  // dementia 1 + renal 2
  CHECK(row[reg.index_of("ed_visits_6mo")] == 1.0);
  CHECK(row[reg.index_of("admissions_6mo")] == 2.0);
  CHECK(row[reg.index_of("surgery")] == 0.0);
  CHECK(row[reg.index_of("season_winter")] == 0.0);
  CHECK(row[reg.index_of("season_spring")] == 1.0);
  CHECK(row[reg.index_of("sex")] == 0.0);
  CHECK(row[reg.index_of("age")] == 72.0);
}

TEST_CASE("age buckets") {
  auto reg = FeatureRegistry::create({.bucket_age = true, .exclude = {}});
  auto cohort = small_cohort();
  Eigen::VectorXd r1 = reg.raw_features(cohort[0], 0, table());  // age 72
  CHECK(r1[reg.index_of("age_65_74")] == 1.0);
  CHECK(r1[reg.index_of("age_75_84")] == 0.0);
  CHECK(r1[reg.index_of("age_85_plus")] == 0.0);
  Eigen::VectorXd r2 = reg.raw_features(cohort[1], 0, table());  // age 88
  CHECK(r2[reg.index_of("age_85_plus")] == 1.0);
}

TEST_CASE("normalization: z-score identity and constants") {
  auto cohort = small_cohort();
  auto reg = FeatureRegistry::create();
  auto report = reg.fit(cohort, table());
  CHECK(report.n_rows == 4);

  // a raw value equal to the training mean normalizes to exactly 0
  const int j = reg.index_of("los_days");
  Eigen::VectorXd raw = reg.raw_features(cohort[0], 0, table());
  raw[j] = reg.descriptors()[std::size_t(j)].mean;
  CHECK(reg.normalize(raw)[j] == 0.0);

  // no admission falls in autumn, so season_fall is constant
  bool fall_warning = false;
  for (const auto& w : report.warnings) {
    if (w.find("season_fall") != std::string::npos) fall_warning = true;
  }
  CHECK(fall_warning);
  CHECK(reg.descriptors()[std::size_t(reg.index_of("season_fall"))].constant);
  CHECK(reg.normalize(raw)[reg.index_of("season_fall")] == 0.0);
}

TEST_CASE("normalized training features have mean 0 and stddev 1") {
  auto cohort = small_cohort();
  auto reg = FeatureRegistry::create();
  reg.fit(cohort, table());
  AdmissionTable tab = extract_admission_table(cohort, reg, table());
  Eigen::MatrixXd Z(tab.rows.rows(), tab.rows.cols());
  for (Eigen::Index i = 0; i < tab.rows.rows(); ++i) {
    Z.row(i) = reg.normalize(tab.rows.row(i).transpose()).transpose();
  }
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    if (reg.descriptors()[std::size_t(j)].constant) continue;
    const double mean = Z.col(j).mean();
    const double var = (Z.col(j).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
  }
}

TEST_CASE("missing counters are imputed with the training median") {
  auto cohort = small_cohort();
  cohort[0].admissions[0].num_medications = 3;
  cohort[0].admissions[2].num_medications = 9;
  cohort[1].admissions[0].num_medications = 6;
  cohort[0].admissions[1].num_medications.reset();
  auto reg = FeatureRegistry::create();
  reg.fit(cohort, table());
  const int j = reg.index_of("num_medications");
  Eigen::VectorXd raw = reg.raw_features(cohort[0], 1, table());
  CHECK(std::isnan(raw[j]));
  const auto& d = reg.descriptors()[std::size_t(j)];
  CHECK(reg.normalize(raw)[j] ==
        doctest::Approx((d.median - d.mean) / d.stddev));
}

TEST_CASE("build_sequences pads and masks") {
  auto cohort = small_cohort();
  auto reg = FeatureRegistry::create();
  reg.fit(cohort, table());

  auto seqs = build_sequences(cohort, reg, table(), {.max_seq_len = 4});
  REQUIRE(seqs.size() == 4);

  // P2 has exactly one admission; left padding covers the first 3 rows
  const auto& seq = seqs.back();
  CHECK(seq.patient_id == "P2");
  CHECK(seq.mask.sum() == 1.0);
  CHECK(seq.mask[3] == 1.0);
  CHECK(seq.x.row(0).isZero());
  CHECK(seq.label == false);

  // static features replicate across real timesteps
  const auto& p1_third = seqs[2];
  CHECK(p1_third.mask.sum() == 3.0);
  const int age_col = reg.index_of("age");
  CHECK(p1_third.x(1, age_col) == p1_third.x(2, age_col));
  CHECK(p1_third.x(2, age_col) == p1_third.x(3, age_col));
}

TEST_CASE("truncation keeps the admissions with the latest admit dates") {
  // los_days is made unique per admission so the retained rows can be
  // decoded back through the normalization stats and compared to the oracle
  // (sort dates descending, keep 10).
  std::vector<AdmissionRecord> recs;
  Date admit = Date::parse("2008-01-01");
  for (int i = 0; i < 12; ++i) {
    recs.push_back(admission("A" + std::to_string(i), "P3", admit.to_string(),
                             (admit + i).to_string()));  // los = i
    admit = admit + 50;
  }
  std::vector<PatientHistory> one{patient("P3", 70, Sex::male, recs)};
  auto reg = FeatureRegistry::create();
  reg.fit(one, table());
  auto seqs = build_sequences(one, reg, table(), {.max_seq_len = 10});
  CHECK(seqs.size() == 12);
  const auto& last = seqs.back();
  CHECK(last.index_admission_id == "A11");
  CHECK(last.mask.sum() == 10.0);
  const auto& d = reg.descriptors()[std::size_t(reg.index_of("los_days"))];
  std::vector<int> decoded;
  for (int t = 0; t < 10; ++t) {
    decoded.push_back(int(std::lround(
        last.x(t, reg.index_of("los_days")) * d.stddev + d.mean)));
  }
  CHECK(decoded == std::vector<int>{2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
}

TEST_CASE("sequences only contain admissions up to the index") {
  auto cohort = small_cohort();
  auto reg = FeatureRegistry::create();
  reg.fit(cohort, table());
  auto seqs = build_sequences(cohort, reg, table(), {.max_seq_len = 4});
  // P1's first admission: only one real timestep even though later ones exist
  CHECK(seqs[0].index_admission_id == "P1-A1");
  CHECK(seqs[0].mask.sum() == 1.0);
}
