#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "readmit/features.hpp"
#include "readmit/records.hpp"

namespace readmit {

struct LaceComponents {
  int los_days = 0;
  bool acute = false;
  int cci = 0;
  int ed_visits = 0;
};

struct LaceSubscores {
  int l = 0, a = 0, c = 0, e = 0;
  int total = 0;
};

// Exact lookup of the published scoring table. Note: the 7-13 day LOS row
// scores 6 here, not the 5 used by much of the LACE literature; see README.
LaceSubscores lace_subscores(const LaceComponents& components);

// LACE components of one index admission within its history.
LaceComponents lace_components(const PatientHistory& history,
                               std::size_t admission_idx,
                               const CharlsonWeightTable& table);

// The four raw LACE component values as a model input row
// [los_days, acute, cci, ed_visits].
const std::vector<std::string>& lace_feature_names();
Eigen::VectorXd lace_feature_row(const LaceComponents& components);

struct LogisticFitConfig {
  double ridge = 1e-6;        // penalty on non-intercept coefficients
  int max_iterations = 100;
  double tolerance = 1e-8;    // convergence on max |delta beta|
};

struct LogisticModel {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  std::vector<std::string> feature_names;
  // training metadata
  int iterations = 0;
  double final_deviance = 0.0;
  double ridge = 0.0;
  double score_max_norm = 0.0;  // max-norm of the penalized score at the optimum

  double predict_logit(const Eigen::VectorXd& x) const;
  double predict_proba(const Eigen::VectorXd& x) const;

  std::string to_json_string() const;
  static LogisticModel from_json_string(const std::string& text);
  void save(const std::filesystem::path& file) const;
  static LogisticModel load(const std::filesystem::path& file);
};

// Ridge-penalized logistic regression by iteratively reweighted least
// squares. Throws on degenerate labels, constant columns, perfect
// separation, or non-convergence.
LogisticModel fit_logistic(const Eigen::MatrixXd& X,
                           std::span<const int> y,
                           const std::vector<std::string>& feature_names,
                           const LogisticFitConfig& config = {});

struct PointScoreTable {
  std::vector<std::string> feature_names;
  std::vector<long long> points;
  double reference_abs_coef = 0.0;  // smallest nonzero |beta|

  // Patient risk score: sum of points weighted by the feature values
  // (for 0/1 features this is the sum of points over active features).
  double score(const Eigen::VectorXd& x) const;
};

// Sullivan-style conversion: each coefficient divided by the smallest
// nonzero |coefficient|, rounded half away from zero.
PointScoreTable to_point_score(const LogisticModel& model);

}  // namespace readmit
