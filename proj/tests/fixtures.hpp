#pragma once

#include <string>
#include <vector>

#include "readmit/records.hpp"

namespace fixtures {

using readmit::AdmissionRecord;
using readmit::Date;
using readmit::PatientHistory;

inline AdmissionRecord admission(const std::string& id,
                                 const std::string& patient,
                                 const std::string& admit,
                                 const std::string& discharge,
                                 bool acute = false, bool via_ed = false,
                                 bool surgery = false,
                                 std::vector<std::string> categories = {}) {
  AdmissionRecord rec;
  rec.admission_id = id;
  rec.patient_id = patient;
  rec.admit_date = Date::parse(admit);
  rec.discharge_date = Date::parse(discharge);
  rec.acute_admission = acute;
  rec.via_emergency_dept = via_ed;
  rec.surgery = surgery;
  rec.num_medications = 5;
  rec.num_consultations = 1;
  rec.comorbidity_categories = std::move(categories);
  return rec;
}

inline PatientHistory patient(const std::string& id, int age, readmit::Sex sex,
                              std::vector<AdmissionRecord> admissions) {
  PatientHistory h;
  h.patient_id = id;
  h.age_at_index = age;
  h.sex = sex;
  h.admissions = std::move(admissions);
  return h;
}

}  // namespace fixtures
