#pragma once

#include <Eigen/Core>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "readmit/records.hpp"

namespace readmit {

enum class FeatureKind { temporal, static_demographic };

struct FeatureDescriptor {
  std::string name;
  FeatureKind kind = FeatureKind::temporal;
  double mean = 0.0;
  double stddev = 1.0;
  double median = 0.0;   // imputation value for missing raw entries
  bool constant = false; // stddev was 0 on the training split
};

struct FeatureRegistryOptions {
  bool bucket_age = false;            // replace raw age with 65-74/75-84/85+
  std::set<std::string> exclude;      // base names, e.g. {"age", "surgery"}
};

// Base feature names accepted in exclude lists and coefficient maps.
const std::vector<std::string>& feature_base_names();

struct RegistryFitReport {
  std::size_t n_rows = 0;
  std::vector<std::string> warnings;
};

// Fixed, versioned ordering of the numeric encoding of one admission in
// temporal context. Normalization statistics come from a training split via
// fit(); until then the registry is usable only for raw extraction.
class FeatureRegistry {
 public:
  static FeatureRegistry create(const FeatureRegistryOptions& options = {});

  std::size_t size() const { return descriptors_.size(); }
  const std::vector<FeatureDescriptor>& descriptors() const {
    return descriptors_;
  }
  std::vector<std::string> names() const;
  int index_of(const std::string& name) const;  // -1 when absent
  const FeatureRegistryOptions& options() const { return options_; }
  bool fitted() const { return fitted_; }

  // Raw (unnormalized) features of admissions[admission_idx] within its
  // history. Missing counters come back as NaN.
  Eigen::VectorXd raw_features(const PatientHistory& history,
                               std::size_t admission_idx,
                               const CharlsonWeightTable& table) const;

  // Fits medians (imputation) and mean/stddev over every admission of the
  // given histories. Population stddev (divide by N).
  RegistryFitReport fit(std::span<const PatientHistory> train,
                        const CharlsonWeightTable& table);

  // Imputes missing entries with the median, then z-scores. Constant
  // features are emitted as 0.
  Eigen::VectorXd normalize(const Eigen::VectorXd& raw) const;

  // Identifies the feature schema (names, kinds, encoding version); stats do
  // not participate.
  std::uint64_t schema_hash() const;

  // Used by (de)serialization; descriptors must match a create() layout.
  void set_descriptors(std::vector<FeatureDescriptor> descriptors,
                       FeatureRegistryOptions options, bool fitted);

 private:
  std::vector<FeatureDescriptor> descriptors_;
  FeatureRegistryOptions options_;
  bool fitted_ = false;
};

// One model input: the padded feature matrix of the admissions up to and
// including the index admission, plus the 30-day readmission label.
struct LabeledSequence {
  std::string patient_id;
  std::string index_admission_id;
  Eigen::MatrixXd x;     // max_seq_len rows (time-ascending, left-padded) x n_features
  Eigen::VectorXd mask;  // max_seq_len; 1 = real timestep, 0 = padding
  bool label = false;
};

struct SequenceConfig {
  int max_seq_len = 10;
};

// One LabeledSequence per admission acting as index admission. Features are
// normalized with the registry's training statistics; sequences keep the
// most recent max_seq_len admissions.
std::vector<LabeledSequence> build_sequences(
    std::span<const PatientHistory> histories, const FeatureRegistry& registry,
    const CharlsonWeightTable& table, const SequenceConfig& config = {});

// Flat per-admission view used by tabular models and registry fitting.
struct AdmissionTable {
  Eigen::MatrixXd rows;  // n x d raw features (NaN = missing)
  std::vector<int> labels;
  std::vector<std::string> admission_ids;
  std::vector<std::string> patient_ids;
};

AdmissionTable extract_admission_table(std::span<const PatientHistory> histories,
                                       const FeatureRegistry& registry,
                                       const CharlsonWeightTable& table);

}  // namespace readmit
