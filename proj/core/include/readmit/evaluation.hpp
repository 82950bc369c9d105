#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "readmit/features.hpp"
#include "readmit/lace.hpp"
#include "readmit/lstm.hpp"
#include "readmit/records.hpp"
#include "readmit/synth.hpp"

namespace readmit {

struct SplitPlan {
  std::uint64_t seed = 0;
  int n_repeats = 20;
  double train_fraction = 0.70;
};

struct RepeatMetrics {
  int repeat = 0;
  std::uint64_t split_seed = 0;
  double auc = 0.0;
  double precision_top_decile = 0.0;
  double recall_top_decile = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  bool has_ci = false;  // false when n_repeats == 1
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct EvaluationReport {
  std::string model_id;
  SplitPlan plan;
  std::vector<RepeatMetrics> repeats;
  MetricSummary auc;
  MetricSummary precision_top_decile;
  MetricSummary recall_top_decile;

  std::string to_json_string() const;
  std::string to_csv_string() const;  // one row per repeat
};

// Normal-approximation 95% interval over the repeat values; no CI for a
// single repeat.
MetricSummary summarize_metric(std::span<const double> values);

// Trains on the train-side histories and returns one score per test-side
// instance, in canonical order: test histories in the given order, each
// history's admissions in order (the order test_instance_labels uses).
using ModelTrainer = std::function<std::vector<double>(
    std::span<const PatientHistory> train, std::span<const PatientHistory> test,
    std::uint64_t seed)>;

struct InstanceLabels {
  std::vector<int> labels;
  std::vector<std::string> ids;  // admission ids, the decile tie-break order
};
InstanceLabels test_instance_labels(std::span<const PatientHistory> test);

struct PatientSplit {
  std::vector<PatientHistory> train;
  std::vector<PatientHistory> test;
};

// Patient-level split: no patient contributes admissions to both sides.
PatientSplit split_by_patient(std::span<const PatientHistory> cohort,
                              double train_fraction, std::uint64_t seed);

// Repeated patient-level 70-30 evaluation. Repeats derive independent seeds
// and may execute on a small worker pool; results are merged in repeat
// order, so output does not depend on scheduling.
EvaluationReport run_repeated_evaluation(std::span<const PatientHistory> cohort,
                                         const ModelTrainer& trainer,
                                         const SplitPlan& plan,
                                         const std::string& model_id);

// LACE-component logistic regression for each split. With `extended`, the
// model instead uses the full normalized feature registry row of the index
// admission.
ModelTrainer make_lace_trainer(CharlsonWeightTable table,
                               LogisticFitConfig fit_config = {},
                               bool extended = false,
                               FeatureRegistryOptions registry_options = {});

// Sequence-model trainer: refits the registry on the train side, builds
// padded sequences, trains the network, scores the test side.
ModelTrainer make_lstm_trainer(CharlsonWeightTable table, TrainConfig config,
                               FeatureRegistryOptions registry_options = {},
                               SequenceConfig seq_config = {});

// Scores test instances with the generative process's own probabilities;
// the Bayes bound for models trained on the same cohort.
ModelTrainer make_oracle_trainer(CohortSpec spec);

}  // namespace readmit
