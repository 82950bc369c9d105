#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "readmit/features.hpp"

namespace readmit {

// Model surfaces the explainers work against. Tabular models score a matrix
// of instance rows; sequence models score LabeledSequence batches.
using TabularPredictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;
using SequencePredictor =
    std::function<Eigen::VectorXd(const std::vector<LabeledSequence>&)>;

struct PermutationRow {
  std::string feature;
  double baseline_auc = 0.0;
  double mean_permuted_auc = 0.0;
  double importance = 0.0;  // baseline - mean permuted; may be negative
  double stddev = 0.0;      // over shuffles
  int n_repeats = 0;
  bool constant = false;    // constant feature: importance forced to 0
};

// AUC drop when one feature's values are shuffled across instances.
PermutationRow permutation_importance(const TabularPredictor& model,
                                      const Eigen::MatrixXd& X,
                                      std::span<const int> labels,
                                      const std::string& feature_name,
                                      int feature_index, int n_repeats,
                                      std::uint64_t seed);

// Sequence variant: one shared shuffle of sequence indices per repeat moves
// the whole per-admission feature column between sequences at aligned
// (padded) positions, leaving every other feature in place. Donor padding
// rows contribute the padding value (the normalized mean).
PermutationRow permutation_importance(const SequencePredictor& model,
                                      const std::vector<LabeledSequence>& test,
                                      const std::string& feature_name,
                                      int feature_index, int n_repeats,
                                      std::uint64_t seed);

// All features at once; the baseline AUC is computed once and shared.
std::vector<PermutationRow> permutation_report(
    const TabularPredictor& model, const Eigen::MatrixXd& X,
    std::span<const int> labels, const std::vector<std::string>& feature_names,
    int n_repeats, std::uint64_t seed);
std::vector<PermutationRow> permutation_report(
    const SequencePredictor& model, const std::vector<LabeledSequence>& test,
    const std::vector<std::string>& feature_names, int n_repeats,
    std::uint64_t seed);

std::string permutation_rows_to_csv(std::span<const PermutationRow> rows);
std::string permutation_rows_to_json(std::span<const PermutationRow> rows);

struct ShapConfig {
  int n_samples = 200;   // sampled feature orderings (Monte-Carlo mode)
  std::uint64_t seed = 0;
  bool exact = false;    // enumerate all coalitions; needs <= 12 features
};

struct ShapExplanation {
  std::string instance_id;
  std::vector<std::string> feature_names;
  double base_value = 0.0;          // mean model output over the background
  Eigen::VectorXd attributions;     // phi per feature
  Eigen::VectorXd feature_values;   // display values of the instance
  double model_output = 0.0;
  bool exact = false;
  int n_samples = 0;
  std::uint64_t seed = 0;
  double efficiency_residual = 0.0;  // |base + sum(phi) - f(x)|
  double efficiency_tolerance = 0.0; // bound the residual is checked against
};

// Shapley attributions against a background set. Exact mode enumerates all
// 2^d coalitions; Monte-Carlo mode averages marginal contributions over
// sampled feature orderings, each scored against the full background, so the
// attributions telescope to f(x) - base_value.
ShapExplanation shap_values(const TabularPredictor& model,
                            const Eigen::VectorXd& instance,
                            const Eigen::MatrixXd& background,
                            const std::vector<std::string>& feature_names,
                            const ShapConfig& config,
                            const std::string& instance_id = "");

// Sequence variant: a coalition takes a feature's whole per-timestep column
// from the instance or from the background sequence, all timesteps at once.
// Display values come from the instance's final (index) timestep.
ShapExplanation shap_values(const SequencePredictor& model,
                            const LabeledSequence& instance,
                            const std::vector<LabeledSequence>& background,
                            const std::vector<std::string>& feature_names,
                            const ShapConfig& config);

// JSON document with per-feature (name, value, attribution) sorted by
// |attribution| descending; ready for any force-plot frontend.
std::string export_force_plot_data(std::span<const ShapExplanation> explanations);

}  // namespace readmit
