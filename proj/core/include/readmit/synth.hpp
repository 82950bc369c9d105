#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "readmit/records.hpp"

namespace readmit {

// Sampling knobs for the synthetic generator. Documented defaults; all
// overridable through the spec file.
struct SamplingParams {
  double los_lognorm_mu = 1.2;
  double los_lognorm_sigma = 0.7;
  int los_max_days = 60;
  double p_acute = 0.6;
  double p_ed = 0.5;
  double p_surgery = 0.3;
  double mean_medications = 8.0;
  double mean_consultations = 2.0;
  double mean_initial_comorbidities = 1.2;
  double p_new_comorbidity = 0.35;
  int max_admissions = 40;
  int age_min = 65;
  int age_max = 94;
  std::string first_admit_from = "2008-01-01";
  std::string first_admit_to = "2011-12-31";
};

// Parameters of the planted readmission-generating process. The planted
// logit is
//   base_rate + sum_f coef_f * raw_feature_f + temporal_gain * T + noise
// where T = 1 when admissions_6mo strictly increased over the patient's last
// two admissions. Coefficients apply to raw (unnormalized) feature values.
struct CohortSpec {
  int n_patients = 1000;
  std::uint64_t seed = 0;
  double mean_admissions = 3.0;  // approximate; derived stop probability
  double base_rate = -1.3862943611198906;  // logit(0.2)
  std::map<std::string, double> coefficients;
  double temporal_gain = 0.0;
  double noise_scale = 0.0;
  SamplingParams sampling;

  static CohortSpec load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;
  std::string to_json_string() const;
  static CohortSpec from_json_string(const std::string& text);
};

// Feature names a coefficient map may reference.
const std::vector<std::string>& planted_coefficient_names();

void validate_spec(const CohortSpec& spec);

// Noise-free planted logit / probability for the given index admission.
// This is the Bayes-optimal score of the generative process when
// noise_scale is 0.
double planted_logit(const CohortSpec& spec, const PatientHistory& history,
                     std::size_t index_admission);
double planted_probability(const CohortSpec& spec,
                           const PatientHistory& history,
                           std::size_t index_admission);

// Generates one patient; patient_index keys an independent RNG stream, so
// generating a patient alone equals generating it inside the full cohort.
PatientHistory generate_patient(const CohortSpec& spec, int patient_index);

// Deterministic in (spec, seed): same inputs, bit-identical cohort.
std::vector<PatientHistory> generate_cohort(const CohortSpec& spec);

}  // namespace readmit
