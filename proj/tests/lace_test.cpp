#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "readmit/errors.hpp"
#include "readmit/lace.hpp"
#include "readmit/mathutil.hpp"

using namespace readmit;

TEST_CASE("lace_subscores worked rows") {
  auto zero = lace_subscores({0, false, 0, 0});
  CHECK(zero.total == 0);

  auto mid = lace_subscores({5, true, 2, 1});
  CHECK(mid.l == 4);
  CHECK(mid.a == 3);
  CHECK(mid.c == 2);
  CHECK(mid.e == 1);
  CHECK(mid.total == 10);

  auto high = lace_subscores({13, true, 9, 7});
  CHECK(high.l == 6);
  CHECK(high.a == 3);
  CHECK(high.c == 5);
  CHECK(high.e == 4);
  CHECK(high.total == 18);
}

TEST_CASE("lace_subscores agrees with the table oracle on the full grid") {
  for (int l = 0; l <= 20; ++l) {
    for (int a = 0; a <= 1; ++a) {
      for (int c = 0; c <= 10; ++c) {
        for (int e = 0; e <= 10; ++e) {
          const auto s = lace_subscores({l, a == 1, c, e});
          CHECK(s.total == oracles::lace_total_lookup(l, a, c, e));
        }
      }
    }
  }
}

namespace {

// Draws (X, y) from a known logistic law.
void sample_logistic(int n, const Eigen::VectorXd& beta, double intercept,
                     std::uint64_t seed, Eigen::MatrixXd& X,
                     std::vector<int>& y) {
  std::mt19937_64 rng{seed};
  std::normal_distribution<double> feature;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  X.resize(n, beta.size());
  y.clear();
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < beta.size(); ++j) X(i, j) = feature(rng);
    const double p = sigmoid(intercept + X.row(i) * beta);
    y.push_back(unit(rng) < p ? 1 : 0);
  }
}

}  // namespace

TEST_CASE("fit_logistic recovers a planted law within 10%") {
  Eigen::VectorXd beta(2);
  beta << 0.5, -1.0;
  Eigen::MatrixXd X;
  std::vector<int> y;
  sample_logistic(50000, beta, 0.3, 99, X, y);

  auto model = fit_logistic(X, y, {"f0", "f1"});
  CHECK(std::abs(model.coefficients[0] - 0.5) / 0.5 < 0.10);
  CHECK(std::abs(model.coefficients[1] + 1.0) / 1.0 < 0.10);
  CHECK(std::abs(model.intercept - 0.3) / 0.3 < 0.10);
  CHECK(model.score_max_norm < 1e-6);
}

TEST_CASE("fit_logistic rejects degenerate inputs") {
  Eigen::MatrixXd X(4, 1);
  X << 1, 2, 3, 4;
  std::vector<int> all_ones{1, 1, 1, 1};
  CHECK_THROWS_AS(fit_logistic(X, all_ones, {"f0"}), ValidationError);

  Eigen::MatrixXd Xc(4, 1);
  Xc << 2, 2, 2, 2;
  std::vector<int> y{0, 1, 0, 1};
  CHECK_THROWS_WITH_AS(fit_logistic(Xc, y, {"f0"}),
                       doctest::Contains("constant"), ValidationError);
}

TEST_CASE("fit_logistic detects perfect separation") {
  Eigen::MatrixXd X(40, 1);
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    X(i, 0) = i < 20 ? -1.0 - i * 0.1 : 1.0 + i * 0.1;
    y.push_back(i < 20 ? 0 : 1);
  }
  CHECK_THROWS_AS(fit_logistic(X, y, {"f0"}), ComputeError);
}

TEST_CASE("symmetric balanced data yields a zero intercept") {
  // every noisy draw (x, y) is paired with its mirror (-x, 1-y); the
  // penalized likelihood is then symmetric in the intercept's sign
  std::mt19937_64 rng{5};
  std::normal_distribution<double> feature;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd X(400, 1);
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    const double x = feature(rng);
    const int label = unit(rng) < sigmoid(1.5 * x) ? 1 : 0;
    X(2 * i, 0) = x;
    X(2 * i + 1, 0) = -x;
    y.push_back(label);
    y.push_back(1 - label);
  }
  auto model = fit_logistic(X, y, {"f0"});
  CHECK(std::abs(model.intercept) < 1e-6);
}

TEST_CASE("predict_proba closed forms and monotonicity") {
  LogisticModel model;
  model.intercept = 0.0;
  model.coefficients = Eigen::VectorXd::Zero(1);
  model.feature_names = {"f0"};
  Eigen::VectorXd x(1);
  x << 123.0;
  CHECK(model.predict_proba(x) == 0.5);

  model.coefficients[0] = 1.0;
  x[0] = 2.0;
  CHECK(model.predict_proba(x) == doctest::Approx(0.8807970779778823));

  Eigen::VectorXd lo(1), hi(1);
  lo << 1.0; hi << 1.5;
  CHECK(model.predict_proba(hi) > model.predict_proba(lo));

  Eigen::VectorXd wrong(2);
  wrong << 1.0, 2.0;
  CHECK_THROWS_AS(model.predict_proba(wrong), ValidationError);
}

TEST_CASE("predicted logit is affine along a line of inputs") {
  LogisticModel model;
  model.intercept = -0.7;
  model.coefficients = Eigen::VectorXd(3);
  model.coefficients << 0.4, -1.2, 2.0;
  model.feature_names = {"a", "b", "c"};
  Eigen::VectorXd x0(3), dx(3);
  x0 << 1.0, 2.0, -1.0;
  dx << 0.5, 0.25, 1.0;
  const double l0 = model.predict_logit(x0);
  const double l1 = model.predict_logit(x0 + dx);
  const double l2 = model.predict_logit(x0 + 2.0 * dx);
  CHECK(l2 - l1 == doctest::Approx(l1 - l0).epsilon(1e-12));
  for (double p : {model.predict_proba(x0), model.predict_proba(x0 + dx)}) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("point score conversion") {
  LogisticModel model;
  model.feature_names = {"a", "b", "c"};
  model.coefficients = Eigen::VectorXd(3);
  model.coefficients << 0.5, 1.0, 2.0;
  auto t = to_point_score(model);
  CHECK(t.points == std::vector<long long>{1, 2, 4});

  model.feature_names = {"a", "b"};
  model.coefficients = Eigen::VectorXd(2);
  model.coefficients << -0.3, 0.6;
  t = to_point_score(model);
  CHECK(t.points == std::vector<long long>{-1, 2});

  // round-half-away-from-zero on the 0.49 reference
  model.coefficients << 0.49, 1.0;
  t = to_point_score(model);
  CHECK(t.points == std::vector<long long>{1, 2});

  model.coefficients << 0.0, 0.0;
  CHECK_THROWS_AS(to_point_score(model), ValidationError);
}

TEST_CASE("point scores preserve the linear-predictor ranking") {
  std::mt19937_64 rng{17};
  Eigen::VectorXd beta(4);
  beta << 0.21, 0.56, -0.34, 0.92;
  LogisticModel model;
  model.feature_names = {"a", "b", "c", "d"};
  model.coefficients = beta;
  auto table = to_point_score(model);

  const int n = 1000;
  std::vector<double> linear(n), pointscore(n);
  std::normal_distribution<double> feature;
  Eigen::VectorXd x(4);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) x[j] = feature(rng);
    linear[std::size_t(i)] = model.predict_logit(x);
    pointscore[std::size_t(i)] = table.score(x);
  }
  // Spearman rank correlation
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < order.size(); ++k) r[order[k]] = double(k);
    return r;
  };
  auto ra = ranks(linear), rb = ranks(pointscore);
  double ma = 0, mb = 0;
  for (int i = 0; i < n; ++i) { ma += ra[std::size_t(i)]; mb += rb[std::size_t(i)]; }
  ma /= n; mb /= n;
  double num = 0, va = 0, vb = 0;
  for (int i = 0; i < n; ++i) {
    num += (ra[std::size_t(i)] - ma) * (rb[std::size_t(i)] - mb);
    va += (ra[std::size_t(i)] - ma) * (ra[std::size_t(i)] - ma);
    vb += (rb[std::size_t(i)] - mb) * (rb[std::size_t(i)] - mb);
  }
  CHECK(num / std::sqrt(va * vb) >= 0.99);
}

TEST_CASE("logistic model JSON round trip") {
  Eigen::MatrixXd X(60, 2);
  std::vector<int> y;
  std::mt19937_64 rng{3};
  std::normal_distribution<double> feature;
  std::uniform_real_distribution<double> unit(0, 1);
  for (int i = 0; i < 60; ++i) {
    X(i, 0) = feature(rng);
    X(i, 1) = feature(rng);
    y.push_back(unit(rng) < sigmoid(0.8 * X(i, 0)) ? 1 : 0);
  }
  auto model = fit_logistic(X, y, {"a", "b"});
  auto restored = LogisticModel::from_json_string(model.to_json_string());
  CHECK(restored.intercept == model.intercept);
  CHECK(restored.coefficients == model.coefficients);
  CHECK(restored.feature_names == model.feature_names);
  CHECK(restored.to_json_string() == model.to_json_string());
}
