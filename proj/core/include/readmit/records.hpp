#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "readmit/dates.hpp"

namespace readmit {

enum class Sex { female, male };

std::string to_string(Sex s);
Sex sex_from_string(std::string_view s);

// One hospital admission. Counters we could not observe are left empty and
// imputed later from training-split medians.
struct AdmissionRecord {
  std::string admission_id;
  std::string patient_id;
  Date admit_date;
  Date discharge_date;
  bool acute_admission = false;   // emergent (true) vs elective (false)
  bool via_emergency_dept = false;
  bool surgery = false;
  std::optional<int> num_medications;    // at discharge
  std::optional<int> num_consultations;
  std::vector<std::string> comorbidity_categories;  // set semantics, sorted

  Season season() const { return admit_date.season(); }
};

// A patient's full admission timeline plus static demographics.
struct PatientHistory {
  std::string patient_id;
  int age_at_index = 0;  // years; Medicare senior cohort, >= 65
  Sex sex = Sex::female;
  std::vector<AdmissionRecord> admissions;  // ascending by admit_date
};

// Weighted Charlson categories. Every weight must be one of {1, 2, 3, 6}.
// The table always comes from explicit configuration (a file or the named
// classic() factory); nothing in the pipeline supplies one implicitly.
class CharlsonWeightTable {
 public:
  explicit CharlsonWeightTable(std::map<std::string, int> weights);

  // The 17-category 1987 weighting (weights 1/2/3/6). Identical to the table
  // shipped in data/charlson_weights.json.
  static CharlsonWeightTable classic();
  static CharlsonWeightTable load(const std::filesystem::path& file);

  int weight(const std::string& category) const;  // throws on unknown
  bool contains(const std::string& category) const;
  const std::map<std::string, int>& weights() const { return weights_; }

 private:
  std::map<std::string, int> weights_;
};

// Whole-day interval discharge - admit; same-day discharge is 0.
int compute_los(Date admit, Date discharge);
// Same, but errors name the offending admission.
int compute_los(const AdmissionRecord& rec);

// Sum of Charlson weights over the distinct categories.
int compute_cci(std::span<const std::string> categories,
                const CharlsonWeightTable& table);

// Checks all structural invariants (dates ordered, no overlap, counts >= 0,
// age >= 65, categories known) and throws ValidationError naming the
// offending admission/patient.
void validate_history(const PatientHistory& history,
                      const CharlsonWeightTable& table);

// Counts prior admissions with admit_date in [index_date - window_days,
// index_date) matching `pred`. index_date must belong to an admission of the
// history; the index admission itself is never counted.
int count_window_events(const PatientHistory& history, Date index_date,
                        int window_days,
                        const std::function<bool(const AdmissionRecord&)>& pred);

// 30-day readmission labels, one per admission in order: true iff the next
// admission of the same patient admits within (0, 30] days of this
// discharge. The final admission is always false.
std::vector<std::pair<std::string, bool>> label_readmissions(
    const PatientHistory& history);

inline constexpr int kReadmitWindowDays = 30;
inline constexpr int kLookbackWindowDays = 180;

}  // namespace readmit
