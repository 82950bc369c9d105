#include "readmit/records.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"

namespace readmit {

std::string to_string(Sex s) {
  return s == Sex::female ? "female" : "male";
}

Sex sex_from_string(std::string_view s) {
  if (s == "female") return Sex::female;
  if (s == "male") return Sex::male;
  throw ValidationError("unknown sex: " + std::string(s));
}

CharlsonWeightTable::CharlsonWeightTable(std::map<std::string, int> weights)
    : weights_(std::move(weights)) {
  if (weights_.empty()) {
    throw ValidationError("Charlson weight table is empty");
  }
  for (const auto& [cat, w] : weights_) {
    if (w != 1 && w != 2 && w != 3 && w != 6) {
      throw ValidationError("Charlson weight for '" + cat +
                            "' must be one of {1,2,3,6}, got " +
                            std::to_string(w));
    }
  }
}

CharlsonWeightTable CharlsonWeightTable::classic() {
  return CharlsonWeightTable({
      {"myocardial_infarction", 1},
      {"congestive_heart_failure", 1},
      {"peripheral_vascular_disease", 1},
      {"cerebrovascular_disease", 1},
      {"dementia", 1},
      {"chronic_pulmonary_disease", 1},
      {"rheumatic_disease", 1},
      {"peptic_ulcer_disease", 1},
      {"mild_liver_disease", 1},
      {"diabetes_uncomplicated", 1},
      {"diabetes_with_complications", 2},
      {"hemiplegia_paraplegia", 2},
      {"renal_disease", 2},
      {"malignancy", 2},
      {"moderate_severe_liver_disease", 3},
      {"metastatic_solid_tumor", 6},
      {"aids_hiv", 6},
  });
}

CharlsonWeightTable CharlsonWeightTable::load(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw ConfigError("cannot open Charlson weight table: " + file.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed Charlson weight table " + file.string() +
                      ": " + e.what());
  }
  if (doc.contains("schema_version") && doc["schema_version"] != 1) {
    throw ConfigError("unsupported Charlson table schema_version in " +
                      file.string());
  }
  const nlohmann::json& weights =
      doc.contains("weights") ? doc["weights"] : doc;
  std::map<std::string, int> table;
  for (auto it = weights.begin(); it != weights.end(); ++it) {
    if (it.key() == "schema_version") continue;
    if (!it.value().is_number_integer()) {
      throw ConfigError("Charlson weight for '" + it.key() +
                        "' is not an integer");
    }
    table[it.key()] = it.value().get<int>();
  }
  return CharlsonWeightTable(std::move(table));
}

int CharlsonWeightTable::weight(const std::string& category) const {
  auto it = weights_.find(category);
  if (it == weights_.end()) {
    throw ValidationError("unknown Charlson category: " + category);
  }
  return it->second;
}

bool CharlsonWeightTable::contains(const std::string& category) const {
  return weights_.count(category) > 0;
}

int compute_los(Date admit, Date discharge) {
  if (discharge < admit) {
    throw ValidationError("discharge date precedes admit date");
  }
  return discharge - admit;
}

int compute_los(const AdmissionRecord& rec) {
  if (rec.discharge_date < rec.admit_date) {
    throw ValidationError("admission " + rec.admission_id +
                          ": discharge date " + rec.discharge_date.to_string() +
                          " precedes admit date " +
                          rec.admit_date.to_string());
  }
  return rec.discharge_date - rec.admit_date;
}

int compute_cci(std::span<const std::string> categories,
                const CharlsonWeightTable& table) {
  std::set<std::string> distinct(categories.begin(), categories.end());
  int total = 0;
  for (const auto& cat : distinct) total += table.weight(cat);
  return total;
}

void validate_history(const PatientHistory& history,
                      const CharlsonWeightTable& table) {
  if (history.age_at_index < 65) {
    throw ValidationError("patient " + history.patient_id +
                          ": age_at_index must be >= 65, got " +
                          std::to_string(history.age_at_index));
  }
  const AdmissionRecord* prev = nullptr;
  for (const auto& rec : history.admissions) {
    if (rec.patient_id != history.patient_id) {
      throw ValidationError("admission " + rec.admission_id +
                            " carries patient_id '" + rec.patient_id +
                            "' inside history of '" + history.patient_id + "'");
    }
    compute_los(rec);  // discharge >= admit, names the admission
    if (rec.num_medications && *rec.num_medications < 0) {
      throw ValidationError("admission " + rec.admission_id +
                            ": num_medications < 0");
    }
    if (rec.num_consultations && *rec.num_consultations < 0) {
      throw ValidationError("admission " + rec.admission_id +
                            ": num_consultations < 0");
    }
    for (const auto& cat : rec.comorbidity_categories) {
      if (!table.contains(cat)) {
        throw ValidationError("admission " + rec.admission_id +
                              ": unknown Charlson category: " + cat);
      }
    }
    if (prev) {
      if (!(prev->admit_date < rec.admit_date)) {
        throw ValidationError("patient " + history.patient_id +
                              ": admissions not strictly ordered by admit "
                              "date at " + rec.admission_id);
      }
      if (rec.admit_date < prev->discharge_date) {
        throw ValidationError("patient " + history.patient_id +
                              ": admissions " + prev->admission_id + " and " +
                              rec.admission_id + " overlap in time");
      }
    }
    prev = &rec;
  }
}

int count_window_events(
    const PatientHistory& history, Date index_date, int window_days,
    const std::function<bool(const AdmissionRecord&)>& pred) {
  bool found = false;
  for (const auto& rec : history.admissions) {
    if (rec.admit_date == index_date) found = true;
  }
  if (!found) {
    throw ValidationError("patient " + history.patient_id +
                          ": no admission admits on index date " +
                          index_date.to_string());
  }
  const Date window_start = index_date + (-window_days);
  int count = 0;
  for (const auto& rec : history.admissions) {
    if (rec.admit_date >= window_start && rec.admit_date < index_date &&
        pred(rec)) {
      ++count;
    }
  }
  return count;
}

std::vector<std::pair<std::string, bool>> label_readmissions(
    const PatientHistory& history) {
  std::vector<std::pair<std::string, bool>> labels;
  labels.reserve(history.admissions.size());
  for (std::size_t i = 0; i < history.admissions.size(); ++i) {
    bool readmitted = false;
    if (i + 1 < history.admissions.size()) {
      int gap = history.admissions[i + 1].admit_date -
                history.admissions[i].discharge_date;
      readmitted = gap > 0 && gap <= kReadmitWindowDays;
    }
    labels.emplace_back(history.admissions[i].admission_id, readmitted);
  }
  return labels;
}

}  // namespace readmit
