#include "readmit/cohort_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"

namespace readmit {

namespace {
using nlohmann::json;
}

std::string patient_to_json_line(const PatientHistory& history) {
  json admissions = json::array();
  for (const auto& rec : history.admissions) {
    json cats = json::array();
    for (const auto& c : rec.comorbidity_categories) cats.push_back(c);
    json adm = {
        {"admission_id", rec.admission_id},
        {"admit_date", rec.admit_date.to_string()},
        {"discharge_date", rec.discharge_date.to_string()},
        {"acute_admission", rec.acute_admission},
        {"via_emergency_dept", rec.via_emergency_dept},
        {"surgery", rec.surgery},
        {"comorbidity_categories", std::move(cats)},
    };
    if (rec.num_medications) adm["num_medications"] = *rec.num_medications;
    if (rec.num_consultations)
      adm["num_consultations"] = *rec.num_consultations;
    admissions.push_back(std::move(adm));
  }
  json doc = {
      {"schema_version", 1},
      {"patient_id", history.patient_id},
      {"age_at_index", history.age_at_index},
      {"sex", to_string(history.sex)},
      {"admissions", std::move(admissions)},
  };
  return doc.dump();
}

PatientHistory patient_from_json_line(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed cohort line: ") + e.what());
  }
  if (doc.value("schema_version", 1) != 1) {
    throw ValidationError("unsupported cohort schema_version");
  }
  PatientHistory h;
  try {
    h.patient_id = doc.at("patient_id").get<std::string>();
    h.age_at_index = doc.at("age_at_index").get<int>();
    h.sex = sex_from_string(doc.at("sex").get<std::string>());
    for (const auto& adm : doc.at("admissions")) {
      AdmissionRecord rec;
      rec.admission_id = adm.at("admission_id").get<std::string>();
      rec.patient_id = h.patient_id;
      rec.admit_date = Date::parse(adm.at("admit_date").get<std::string>());
      rec.discharge_date =
          Date::parse(adm.at("discharge_date").get<std::string>());
      rec.acute_admission = adm.at("acute_admission").get<bool>();
      rec.via_emergency_dept = adm.at("via_emergency_dept").get<bool>();
      rec.surgery = adm.at("surgery").get<bool>();
      if (adm.contains("num_medications") && !adm["num_medications"].is_null())
        rec.num_medications = adm["num_medications"].get<int>();
      if (adm.contains("num_consultations") &&
          !adm["num_consultations"].is_null())
        rec.num_consultations = adm["num_consultations"].get<int>();
      for (const auto& c : adm.at("comorbidity_categories")) {
        rec.comorbidity_categories.push_back(c.get<std::string>());
      }
      std::sort(rec.comorbidity_categories.begin(),
                rec.comorbidity_categories.end());
      rec.comorbidity_categories.erase(
          std::unique(rec.comorbidity_categories.begin(),
                      rec.comorbidity_categories.end()),
          rec.comorbidity_categories.end());
      h.admissions.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ValidationError("cohort line for patient '" +
                          doc.value("patient_id", std::string("?")) +
                          "' is missing fields: " + e.what());
  }
  return h;
}

std::vector<PatientHistory> read_cohort_jsonl(std::istream& in,
                                              const std::string& source_name) {
  std::vector<PatientHistory> cohort;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      cohort.push_back(patient_from_json_line(line));
    } catch (const ValidationError& e) {
      throw ValidationError(source_name + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
  return cohort;
}

std::vector<PatientHistory> load_cohort_jsonl(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw ConfigError("cannot open cohort file: " + file.string());
  }
  return read_cohort_jsonl(in, file.string());
}

void write_cohort_jsonl(std::span<const PatientHistory> cohort,
                        std::ostream& out) {
  for (const auto& h : cohort) {
    out << patient_to_json_line(h) << '\n';
  }
}

void save_cohort_jsonl(std::span<const PatientHistory> cohort,
                       const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write cohort file: " + file.string());
  }
  write_cohort_jsonl(cohort, out);
}

}  // namespace readmit
