#include "readmit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"
#include "readmit/mathutil.hpp"
#include "readmit/rng.hpp"

namespace readmit {

namespace {

using nlohmann::json;

double raw_feature_value(const std::string& name,
                         const PatientHistory& history, std::size_t idx,
                         const CharlsonWeightTable& table) {
  const AdmissionRecord& rec = history.admissions[idx];
  if (name == "los_days") return compute_los(rec);
  if (name == "acute_admission") return rec.acute_admission ? 1.0 : 0.0;
  if (name == "cci_score") return compute_cci(rec.comorbidity_categories, table);
  if (name == "ed_visits_6mo") {
    return count_window_events(
        history, rec.admit_date, kLookbackWindowDays,
        [](const AdmissionRecord& r) { return r.via_emergency_dept; });
  }
  if (name == "admissions_6mo") {
    return count_window_events(history, rec.admit_date, kLookbackWindowDays,
                               [](const AdmissionRecord&) { return true; });
  }
  if (name == "surgery") return rec.surgery ? 1.0 : 0.0;
  if (name == "num_medications")
    return rec.num_medications ? double(*rec.num_medications) : 0.0;
  if (name == "num_consultations")
    return rec.num_consultations ? double(*rec.num_consultations) : 0.0;
  if (name == "sex") return history.sex == Sex::male ? 1.0 : 0.0;
  if (name == "age") return history.age_at_index;
  if (name == "season_winter") return rec.season() == Season::winter ? 1.0 : 0.0;
  if (name == "season_spring") return rec.season() == Season::spring ? 1.0 : 0.0;
  if (name == "season_summer") return rec.season() == Season::summer ? 1.0 : 0.0;
  if (name == "season_fall") return rec.season() == Season::fall ? 1.0 : 0.0;
  throw ConfigError("unknown planted coefficient feature: " + name);
}

int admissions_6mo_at(const PatientHistory& history, std::size_t idx) {
  return count_window_events(history, history.admissions[idx].admit_date,
                             kLookbackWindowDays,
                             [](const AdmissionRecord&) { return true; });
}

// Stop probability on the no-readmission branch such that chain length has
// roughly the requested mean when every admission readmits with the base
// probability.
double derived_stop_probability(const CohortSpec& spec) {
  const double p0 = sigmoid(spec.base_rate);
  return 1.0 / (spec.mean_admissions * (1.0 - p0));
}

}  // namespace

const std::vector<std::string>& planted_coefficient_names() {
  static const std::vector<std::string> names = {
      "los_days",        "acute_admission",  "cci_score",
      "ed_visits_6mo",   "admissions_6mo",   "surgery",
      "num_medications", "num_consultations", "sex",
      "age",             "season_winter",    "season_spring",
      "season_summer",   "season_fall",
  };
  return names;
}

void validate_spec(const CohortSpec& spec) {
  if (spec.n_patients < 1) {
    throw ValidationError("cohort spec: n_patients must be >= 1, got " +
                          std::to_string(spec.n_patients));
  }
  if (spec.mean_admissions < 1.0) {
    throw ValidationError("cohort spec: mean_admissions must be >= 1");
  }
  const double s = derived_stop_probability(spec);
  if (!(s > 0.0) || s > 1.0) {
    throw ValidationError(
        "cohort spec: mean_admissions is infeasible for the base rate "
        "(derived stop probability " + std::to_string(s) + " not in (0,1])");
  }
  const auto& allowed = planted_coefficient_names();
  for (const auto& [name, value] : spec.coefficients) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      throw ValidationError("cohort spec: unknown coefficient feature '" +
                            name + "'");
    }
    if (!std::isfinite(value)) {
      throw ValidationError("cohort spec: coefficient for '" + name +
                            "' is not finite");
    }
  }
  if (spec.noise_scale < 0.0) {
    throw ValidationError("cohort spec: noise_scale must be >= 0");
  }
  if (spec.sampling.max_admissions < 1 ||
      spec.sampling.age_min < 65 ||
      spec.sampling.age_max < spec.sampling.age_min ||
      spec.sampling.los_max_days < 0) {
    throw ValidationError("cohort spec: invalid sampling parameters");
  }
  Date from = Date::parse(spec.sampling.first_admit_from);
  Date to = Date::parse(spec.sampling.first_admit_to);
  if (to < from) {
    throw ValidationError("cohort spec: first_admit_to precedes first_admit_from");
  }
}

double planted_logit(const CohortSpec& spec, const PatientHistory& history,
                     std::size_t index_admission) {
  static const CharlsonWeightTable table = CharlsonWeightTable::classic();
  double z = spec.base_rate;
  for (const auto& [name, coef] : spec.coefficients) {
    if (coef == 0.0) continue;
    z += coef * raw_feature_value(name, history, index_admission, table);
  }
  if (spec.temporal_gain != 0.0 && index_admission > 0) {
    const int now = admissions_6mo_at(history, index_admission);
    const int before = admissions_6mo_at(history, index_admission - 1);
    if (now > before) z += spec.temporal_gain;
  }
  return z;
}

double planted_probability(const CohortSpec& spec,
                           const PatientHistory& history,
                           std::size_t index_admission) {
  return sigmoid(planted_logit(spec, history, index_admission));
}

PatientHistory generate_patient(const CohortSpec& spec, int patient_index) {
  static const CharlsonWeightTable table = CharlsonWeightTable::classic();
  const auto& categories = [&] {
    std::vector<std::string> cats;
    for (const auto& [cat, w] : table.weights()) cats.push_back(cat);
    return cats;
  }();

  std::mt19937_64 rng = make_engine(spec.seed, std::uint64_t(patient_index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  char pid[16];
  std::snprintf(pid, sizeof(pid), "P%06d", patient_index + 1);

  PatientHistory h;
  h.patient_id = pid;
  h.age_at_index = std::uniform_int_distribution<int>(
      spec.sampling.age_min, spec.sampling.age_max)(rng);
  h.sex = unit(rng) < 0.5 ? Sex::female : Sex::male;

  std::vector<std::string> active_categories;
  {
    int n0 = std::min<int>(
        4, std::poisson_distribution<int>(
               spec.sampling.mean_initial_comorbidities)(rng));
    for (int k = 0; k < n0; ++k) {
      const auto& cat = categories[std::uniform_int_distribution<std::size_t>(
          0, categories.size() - 1)(rng)];
      if (std::find(active_categories.begin(), active_categories.end(), cat) ==
          active_categories.end()) {
        active_categories.push_back(cat);
      }
    }
  }

  const Date from = Date::parse(spec.sampling.first_admit_from);
  const Date to = Date::parse(spec.sampling.first_admit_to);
  Date admit = from + std::uniform_int_distribution<std::int32_t>(
                          0, to - from)(rng);

  const double stop_prob = derived_stop_probability(spec);
  std::lognormal_distribution<double> los_dist(spec.sampling.los_lognorm_mu,
                                               spec.sampling.los_lognorm_sigma);
  std::poisson_distribution<int> meds_dist(spec.sampling.mean_medications);
  std::poisson_distribution<int> consults_dist(
      spec.sampling.mean_consultations);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (int i = 0; i < spec.sampling.max_admissions; ++i) {
    if (i > 0 && unit(rng) < spec.sampling.p_new_comorbidity) {
      const auto& cat = categories[std::uniform_int_distribution<std::size_t>(
          0, categories.size() - 1)(rng)];
      if (std::find(active_categories.begin(), active_categories.end(), cat) ==
          active_categories.end()) {
        active_categories.push_back(cat);
      }
    }

    AdmissionRecord rec;
    char aid[24];
    std::snprintf(aid, sizeof(aid), "%s-A%02d", pid, i + 1);
    rec.admission_id = aid;
    rec.patient_id = h.patient_id;
    rec.admit_date = admit;
    int los = std::min<int>(spec.sampling.los_max_days,
                            int(std::floor(los_dist(rng))));
    rec.discharge_date = admit + std::max(0, los);
    rec.acute_admission = unit(rng) < spec.sampling.p_acute;
    rec.via_emergency_dept = unit(rng) < spec.sampling.p_ed;
    rec.surgery = unit(rng) < spec.sampling.p_surgery;
    rec.num_medications = meds_dist(rng);
    rec.num_consultations = consults_dist(rng);
    rec.comorbidity_categories = active_categories;
    std::sort(rec.comorbidity_categories.begin(),
              rec.comorbidity_categories.end());
    h.admissions.push_back(std::move(rec));

    // Realize the planted readmission event: with probability p the next
    // admission lands inside the 30-day window, otherwise the chain either
    // stops or continues after the window. The label of every admission is
    // therefore Bernoulli(p) given its features.
    double z = planted_logit(spec, h, h.admissions.size() - 1);
    if (spec.noise_scale > 0.0) z += spec.noise_scale * noise(rng);
    const double p = sigmoid(z);

    int gap;
    if (unit(rng) < p) {
      gap = std::uniform_int_distribution<int>(1, kReadmitWindowDays)(rng);
    } else {
      if (unit(rng) < stop_prob) break;
      gap = std::uniform_int_distribution<int>(kReadmitWindowDays + 1, 365)(rng);
    }
    admit = h.admissions.back().discharge_date + gap;
  }
  return h;
}

std::vector<PatientHistory> generate_cohort(const CohortSpec& spec) {
  validate_spec(spec);
  std::vector<PatientHistory> cohort;
  cohort.reserve(std::size_t(spec.n_patients));
  for (int i = 0; i < spec.n_patients; ++i) {
    cohort.push_back(generate_patient(spec, i));
  }
  return cohort;
}

namespace {

json sampling_to_json(const SamplingParams& s) {
  return {
      {"los_lognorm_mu", s.los_lognorm_mu},
      {"los_lognorm_sigma", s.los_lognorm_sigma},
      {"los_max_days", s.los_max_days},
      {"p_acute", s.p_acute},
      {"p_ed", s.p_ed},
      {"p_surgery", s.p_surgery},
      {"mean_medications", s.mean_medications},
      {"mean_consultations", s.mean_consultations},
      {"mean_initial_comorbidities", s.mean_initial_comorbidities},
      {"p_new_comorbidity", s.p_new_comorbidity},
      {"max_admissions", s.max_admissions},
      {"age_min", s.age_min},
      {"age_max", s.age_max},
      {"first_admit_from", s.first_admit_from},
      {"first_admit_to", s.first_admit_to},
  };
}

SamplingParams sampling_from_json(const json& doc) {
  SamplingParams s;
  s.los_lognorm_mu = doc.value("los_lognorm_mu", s.los_lognorm_mu);
  s.los_lognorm_sigma = doc.value("los_lognorm_sigma", s.los_lognorm_sigma);
  s.los_max_days = doc.value("los_max_days", s.los_max_days);
  s.p_acute = doc.value("p_acute", s.p_acute);
  s.p_ed = doc.value("p_ed", s.p_ed);
  s.p_surgery = doc.value("p_surgery", s.p_surgery);
  s.mean_medications = doc.value("mean_medications", s.mean_medications);
  s.mean_consultations = doc.value("mean_consultations", s.mean_consultations);
  s.mean_initial_comorbidities =
      doc.value("mean_initial_comorbidities", s.mean_initial_comorbidities);
  s.p_new_comorbidity = doc.value("p_new_comorbidity", s.p_new_comorbidity);
  s.max_admissions = doc.value("max_admissions", s.max_admissions);
  s.age_min = doc.value("age_min", s.age_min);
  s.age_max = doc.value("age_max", s.age_max);
  s.first_admit_from = doc.value("first_admit_from", s.first_admit_from);
  s.first_admit_to = doc.value("first_admit_to", s.first_admit_to);
  return s;
}

}  // namespace

std::string CohortSpec::to_json_string() const {
  json coef = json::object();
  for (const auto& [name, value] : coefficients) coef[name] = value;
  json doc = {
      {"schema_version", 1},
      {"n_patients", n_patients},
      {"seed", seed},
      {"mean_admissions", mean_admissions},
      {"base_rate", base_rate},
      {"coefficients", std::move(coef)},
      {"temporal_gain", temporal_gain},
      {"noise_scale", noise_scale},
      {"sampling", sampling_to_json(sampling)},
  };
  return doc.dump(2);
}

CohortSpec CohortSpec::from_json_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed cohort spec: ") + e.what());
  }
  if (doc.value("schema_version", 1) != 1) {
    throw ConfigError("unsupported cohort spec schema_version");
  }
  CohortSpec spec;
  spec.n_patients = doc.value("n_patients", spec.n_patients);
  spec.seed = doc.value("seed", spec.seed);
  spec.mean_admissions = doc.value("mean_admissions", spec.mean_admissions);
  spec.base_rate = doc.value("base_rate", spec.base_rate);
  if (doc.contains("coefficients")) {
    for (auto it = doc["coefficients"].begin(); it != doc["coefficients"].end();
         ++it) {
      spec.coefficients[it.key()] = it.value().get<double>();
    }
  }
  spec.temporal_gain = doc.value("temporal_gain", spec.temporal_gain);
  spec.noise_scale = doc.value("noise_scale", spec.noise_scale);
  if (doc.contains("sampling")) {
    spec.sampling = sampling_from_json(doc["sampling"]);
  }
  validate_spec(spec);
  return spec;
}

CohortSpec CohortSpec::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw ConfigError("cannot open cohort spec: " + file.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_string(text);
}

void CohortSpec::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write cohort spec: " + file.string());
  }
  out << to_json_string() << '\n';
}

}  // namespace readmit
