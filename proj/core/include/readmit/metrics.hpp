#pragma once

#include <span>
#include <string>
#include <vector>

namespace readmit {

// Mann-Whitney AUC: probability a random positive outscores a random
// negative, ties counted one half. Computed from an integer win count via
// rank sweep, so the result is identical to brute-force pair counting.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

struct TopDecileMetrics {
  double precision = 0.0;
  double recall = 0.0;
  int flagged = 0;        // k = ceil(n/10)
  int true_positives = 0;
};

// Flags the k = ceil(n/10) highest-scored instances. Ties at the cut are
// broken by ascending instance id (or original index when ids are absent):
// the documented stable order.
TopDecileMetrics top_decile_metrics(std::span<const double> scores,
                                    std::span<const int> labels);
TopDecileMetrics top_decile_metrics(std::span<const double> scores,
                                    std::span<const int> labels,
                                    std::span<const std::string> ids);

}  // namespace readmit
