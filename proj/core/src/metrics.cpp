#include "readmit/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "readmit/errors.hpp"

namespace readmit {

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("auc_roc: scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::int64_t n_pos = 0;
  for (int label : labels) n_pos += label ? 1 : 0;
  const std::int64_t n_neg = std::int64_t(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw ValidationError(
        "auc_roc: both classes must be present (got " +
        std::to_string(n_pos) + " positives of " + std::to_string(n) + ")");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Sweep ascending; 2*wins accumulates 2 per (pos > neg) pair and 1 per tie
  // so everything stays integral.
  std::int64_t wins2 = 0;
  std::int64_t neg_below = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::int64_t tie_pos = 0, tie_neg = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]]) ++tie_pos; else ++tie_neg;
      ++j;
    }
    wins2 += 2 * tie_pos * neg_below + tie_pos * tie_neg;
    neg_below += tie_neg;
    i = j;
  }
  return double(wins2) / double(2 * n_pos * n_neg);
}

namespace {

TopDecileMetrics top_decile_impl(std::span<const double> scores,
                                 std::span<const int> labels,
                                 std::span<const std::string> ids) {
  if (scores.size() != labels.size()) {
    throw ValidationError("top_decile_metrics: scores/labels length mismatch");
  }
  if (!ids.empty() && ids.size() != scores.size()) {
    throw ValidationError("top_decile_metrics: ids length mismatch");
  }
  const std::size_t n = scores.size();
  if (n < 10) {
    throw ValidationError("top_decile_metrics: need at least 10 instances, got " +
                          std::to_string(n));
  }
  int total_pos = 0;
  for (int label : labels) total_pos += label ? 1 : 0;
  if (total_pos == 0 || total_pos == int(n)) {
    throw ValidationError("top_decile_metrics: both classes must be present");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (!ids.empty()) return ids[a] < ids[b];
    return a < b;
  });

  TopDecileMetrics m;
  m.flagged = int((n + 9) / 10);  // ceil(n/10)
  for (int k = 0; k < m.flagged; ++k) {
    m.true_positives += labels[order[std::size_t(k)]] ? 1 : 0;
  }
  m.precision = double(m.true_positives) / double(m.flagged);
  m.recall = double(m.true_positives) / double(total_pos);
  return m;
}

}  // namespace

TopDecileMetrics top_decile_metrics(std::span<const double> scores,
                                    std::span<const int> labels) {
  return top_decile_impl(scores, labels, {});
}

TopDecileMetrics top_decile_metrics(std::span<const double> scores,
                                    std::span<const int> labels,
                                    std::span<const std::string> ids) {
  return top_decile_impl(scores, labels, ids);
}

}  // namespace readmit
