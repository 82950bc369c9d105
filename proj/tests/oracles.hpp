#pragma once

// Independent reference implementations the tests check the library against.
// These are deliberately written from first principles (tables, pair
// enumeration, scalar equation transcriptions, finite differences) and must
// not call into the code paths they verify.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace oracles {

// ---- calendar ----

inline bool is_leap_year(int y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int days_in_month(int y, int m) {
  static const int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap_year(y)) return 29;
  return lengths[m - 1];
}

// Day count since 1970-01-01 by explicit year/month stepping.
inline long days_since_epoch(int y, int m, int d) {
  long days = 0;
  if (y >= 1970) {
    for (int yy = 1970; yy < y; ++yy) days += is_leap_year(yy) ? 366 : 365;
  } else {
    for (int yy = y; yy < 1970; ++yy) days -= is_leap_year(yy) ? 366 : 365;
  }
  for (int mm = 1; mm < m; ++mm) days += days_in_month(y, mm);
  return days + (d - 1);
}

// ---- AUC by O(n^2) pair counting, integer numerator ----

inline double auc_pair_counting(std::span<const double> scores,
                                std::span<const int> labels) {
  std::int64_t wins2 = 0, n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i]) ++n_pos; else ++n_neg;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) wins2 += 2;
      else if (scores[i] == scores[j]) wins2 += 1;
    }
  }
  return double(wins2) / double(2 * n_pos * n_neg);
}

// ---- top decile by explicit sort-and-count ----

struct DecileOracle {
  double precision, recall;
};

inline DecileOracle top_decile_bruteforce(std::span<const double> scores,
                                          std::span<const int> labels,
                                          std::span<const std::string> ids) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (!ids.empty()) return ids[a] < ids[b];
    return a < b;
  });
  const std::size_t k = (n + 9) / 10;
  int tp = 0, total_pos = 0;
  for (int l : labels) total_pos += l ? 1 : 0;
  for (std::size_t i = 0; i < k; ++i) tp += labels[order[i]] ? 1 : 0;
  return {double(tp) / double(k), double(tp) / double(total_pos)};
}

// ---- LACE scoring table, data-driven transcription ----

inline int lace_total_lookup(int l, int a, int c, int e) {
  struct Row { int lo, hi, score; };
  static const Row los_rows[] = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3},
                                 {4, 6, 4}, {7, 13, 6}, {14, 1 << 20, 7}};
  static const Row cci_rows[] = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3},
                                 {4, 1 << 20, 5}};
  static const Row ed_rows[] = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3},
                                {4, 1 << 20, 4}};
  auto lookup = [](std::span<const Row> rows, int v) {
    for (const Row& r : rows) {
      if (v >= r.lo && v <= r.hi) return r.score;
    }
    return -1;
  };
  return lookup(los_rows, l) + (a ? 3 : 0) + lookup(cci_rows, c) +
         lookup(ed_rows, e);
}

// ---- scalar LSTM cell, transcribed gate by gate ----

struct ScalarCellResult {
  double f, i, g, o, c, h;
};

// One H = D = 1 cell step. Weights are (w on h_prev, w on x) per gate.
inline ScalarCellResult scalar_cell_reference(
    double wf_h, double wf_x, double bf, double wi_h, double wi_x, double bi,
    double wc_h, double wc_x, double bc, double wo_h, double wo_x, double bo,
    double h_prev, double c_prev, double x) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  ScalarCellResult r;
  r.f = sig(wf_h * h_prev + wf_x * x + bf);
  r.i = sig(wi_h * h_prev + wi_x * x + bi);
  r.g = std::tanh(wc_h * h_prev + wc_x * x + bc);
  r.o = sig(wo_h * h_prev + wo_x * x + bo);
  r.c = r.f * c_prev + r.i * r.g;
  r.h = r.o * std::tanh(r.c);
  return r;
}

// ---- independent Adam loop ----

struct AdamReference {
  Eigen::VectorXd m, v, theta;
  long t = 0;
  double lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  explicit AdamReference(const Eigen::VectorXd& theta0)
      : m(Eigen::VectorXd::Zero(theta0.size())),
        v(Eigen::VectorXd::Zero(theta0.size())),
        theta(theta0) {}

  void step(const Eigen::VectorXd& g) {
    ++t;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      m[j] = b1 * m[j] + (1 - b1) * g[j];
      v[j] = b2 * v[j] + (1 - b2) * g[j] * g[j];
      const double mh = m[j] / (1 - std::pow(b1, double(t)));
      const double vh = v[j] / (1 - std::pow(b2, double(t)));
      theta[j] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

// ---- central finite differences over a scalar loss ----

template <typename LossFn>
Eigen::VectorXd finite_difference_gradient(const Eigen::VectorXd& theta,
                                           LossFn&& loss, double step = 1e-5) {
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd work = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    work[j] = theta[j] + step;
    const double up = loss(work);
    work[j] = theta[j] - step;
    const double down = loss(work);
    work[j] = theta[j];
    grad[j] = (up - down) / (2.0 * step);
  }
  return grad;
}

// Relative error with a floor so near-zero gradients are compared
// absolutely at the finite-difference noise scale.
inline double gradient_rel_error(const Eigen::VectorXd& analytic,
                                 const Eigen::VectorXd& numeric) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < analytic.size(); ++j) {
    const double denom =
        std::max({std::abs(analytic[j]), std::abs(numeric[j]), 1e-4});
    worst = std::max(worst, std::abs(analytic[j] - numeric[j]) / denom);
  }
  return worst;
}

}  // namespace oracles
