#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "readmit/records.hpp"

namespace readmit {

// Cohorts travel as JSON Lines: one PatientHistory object per line, dates
// ISO-8601, schema_version 1 on every line. See README for the field list.

std::vector<PatientHistory> load_cohort_jsonl(const std::filesystem::path& file);
std::vector<PatientHistory> read_cohort_jsonl(std::istream& in,
                                              const std::string& source_name);

void save_cohort_jsonl(std::span<const PatientHistory> cohort,
                       const std::filesystem::path& file);
void write_cohort_jsonl(std::span<const PatientHistory> cohort,
                        std::ostream& out);

std::string patient_to_json_line(const PatientHistory& history);
PatientHistory patient_from_json_line(const std::string& line);

}  // namespace readmit
