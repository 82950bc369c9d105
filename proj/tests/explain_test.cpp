#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"
#include "readmit/explain.hpp"
#include "readmit/lace.hpp"
#include "readmit/mathutil.hpp"

using namespace readmit;

namespace {

// linear tabular model through a sigmoid
TabularPredictor logistic_predictor(const Eigen::VectorXd& w, double b) {
  return [w, b](const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      out[i] = sigmoid(w.dot(X.row(i).transpose()) + b);
    }
    return out;
  };
}

TabularPredictor linear_predictor(const Eigen::VectorXd& w, double b) {
  return [w, b](const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      out[i] = w.dot(X.row(i).transpose()) + b;
    }
    return out;
  };
}

}  // namespace

TEST_CASE("permutation importance: informative vs null feature") {
  std::mt19937_64 rng{42};
  std::normal_distribution<double> noise;
  const int n = 4000;
  Eigen::MatrixXd X(n, 3);
  std::vector<int> y;
  std::uniform_real_distribution<double> unit(0, 1);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = noise(rng);
    X(i, 1) = noise(rng);
    X(i, 2) = noise(rng);
    y.push_back(unit(rng) < sigmoid(2.0 * X(i, 0) + 0.5 * X(i, 1)) ? 1 : 0);
  }
  Eigen::VectorXd w(3);
  w << 2.0, 0.5, 0.0;  // the model provably ignores feature 2
  auto model = logistic_predictor(w, 0.0);

  auto rows = permutation_report(model, X, y, {"strong", "weak", "null"},
                                 /*n_repeats=*/50, /*seed=*/7);
  CHECK(rows[0].importance > rows[1].importance);
  CHECK(rows[1].importance > 0.01);
  CHECK(std::abs(rows[2].importance) < 0.005);  // null within noise
  CHECK(rows[0].baseline_auc == rows[1].baseline_auc);
  CHECK(rows[1].baseline_auc == rows[2].baseline_auc);
}

TEST_CASE("constant features get importance exactly zero") {
  Eigen::MatrixXd X(100, 2);
  std::vector<int> y;
  std::mt19937_64 rng{3};
  std::normal_distribution<double> noise;
  for (int i = 0; i < 100; ++i) {
    X(i, 0) = noise(rng);
    X(i, 1) = 5.0;  // constant
    y.push_back(i % 2);
  }
  Eigen::VectorXd w(2);
  w << 1.0, 0.3;
  auto row = permutation_importance(logistic_predictor(w, 0.0), X, y,
                                    "const", 1, 10, 11);
  CHECK(row.constant);
  CHECK(row.importance == 0.0);
}

TEST_CASE("sequence permutation moves whole feature columns between sequences") {
  // a "model" that reads feature 0 at the last timestep; shuffling feature 0
  // destroys its AUC, shuffling feature 1 does nothing
  SequencePredictor model = [](const std::vector<LabeledSequence>& seqs) {
    Eigen::VectorXd out(Eigen::Index(seqs.size()));
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      out[Eigen::Index(i)] = seqs[i].x(seqs[i].x.rows() - 1, 0);
    }
    return out;
  };
  std::mt19937_64 rng{17};
  std::normal_distribution<double> noise;
  std::vector<LabeledSequence> test;
  for (int i = 0; i < 400; ++i) {
    LabeledSequence s;
    s.patient_id = "P" + std::to_string(i);
    s.index_admission_id = "A" + std::to_string(i);
    s.x = Eigen::MatrixXd::Zero(4, 2);
    s.mask = Eigen::VectorXd::Ones(4);
    const double signal = noise(rng);
    for (int t = 0; t < 4; ++t) {
      s.x(t, 0) = signal + 0.1 * noise(rng);
      s.x(t, 1) = noise(rng);
    }
    s.label = signal > 0;
    test.push_back(s);
  }
  auto rows = permutation_report(model, test, {"signal", "noise"}, 20, 5);
  CHECK(rows[0].importance > 0.3);
  CHECK(std::abs(rows[1].importance) < 1e-12);  // model never reads it
  CHECK(rows[0].baseline_auc > 0.99);
}

TEST_CASE("exact shap on a linear model is the closed form") {
  Eigen::VectorXd w(4), x(4);
  w << 0.5, -1.0, 2.0, 0.0;
  x << 1.0, 2.0, -0.5, 3.0;
  const double b = 0.7;
  Eigen::MatrixXd background(5, 4);
  std::mt19937_64 rng{23};
  std::normal_distribution<double> noise;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) background(i, j) = noise(rng);

  ShapConfig config;
  config.exact = true;
  auto ex = shap_values(linear_predictor(w, b), x, background,
                        {"a", "b", "c", "d"}, config, "inst");
  Eigen::VectorXd mean = background.colwise().mean().transpose();
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(ex.attributions[j] - w[j] * (x[j] - mean[j])) < 1e-9);
  }
  CHECK(std::abs(ex.base_value - (w.dot(mean) + b)) < 1e-12);
  CHECK(ex.efficiency_residual < 1e-9);
  // null player: the zero-weight feature gets zero attribution
  CHECK(std::abs(ex.attributions[3]) < 1e-9);
}

TEST_CASE("instance equal to the only background row attributes nothing") {
  Eigen::VectorXd w(3), x(3);
  w << 1.0, 2.0, 3.0;
  x << 0.4, -0.2, 1.0;
  Eigen::MatrixXd background = x.transpose();
  ShapConfig config;
  config.exact = true;
  auto ex = shap_values(logistic_predictor(w, 0.1), x, background,
                        {"a", "b", "c"}, config, "self");
  CHECK(ex.attributions.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ex.base_value == ex.model_output);
}

TEST_CASE("symmetric features receive equal attributions in exact mode") {
  // f depends only on x0 + x1; instance and background treat 0 and 1 alike
  TabularPredictor model = [](const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      out[i] = std::tanh(X(i, 0) + X(i, 1)) + 0.2 * X(i, 2);
    }
    return out;
  };
  Eigen::VectorXd x(3);
  x << 0.8, 0.8, -0.3;
  Eigen::MatrixXd background(3, 3);
  background << 0.1, 0.1, 0.5,
               -0.4, -0.4, 0.2,
                0.3, 0.3, -0.7;
  ShapConfig config;
  config.exact = true;
  auto ex = shap_values(model, x, background, {"a", "b", "c"}, config, "sym");
  CHECK(std::abs(ex.attributions[0] - ex.attributions[1]) < 1e-9);
}

TEST_CASE("monte-carlo shap converges to the exact values") {
  // 6-feature nonlinear toy
  TabularPredictor model = [](const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      out[i] = sigmoid(X(i, 0) * X(i, 1) + std::tanh(X(i, 2)) - 0.5 * X(i, 3) +
                       0.25 * X(i, 4) * X(i, 5));
    }
    return out;
  };
  std::mt19937_64 rng{77};
  std::normal_distribution<double> noise;
  Eigen::VectorXd x(6);
  for (int j = 0; j < 6; ++j) x[j] = noise(rng);
  Eigen::MatrixXd background(10, 6);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 6; ++j) background(i, j) = noise(rng);
  const std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};

  ShapConfig exact_config;
  exact_config.exact = true;
  auto exact = shap_values(model, x, background, names, exact_config, "i");

  ShapConfig mc_config;
  mc_config.exact = false;
  mc_config.n_samples = 10000;
  mc_config.seed = 9;
  auto mc = shap_values(model, x, background, names, mc_config, "i");

  CHECK((mc.attributions - exact.attributions).cwiseAbs().maxCoeff() < 0.01);
  CHECK(mc.efficiency_residual <= mc.efficiency_tolerance);
  CHECK(mc.base_value == exact.base_value);
}

TEST_CASE("exact mode is capped at 12 features and validates inputs") {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(13), x = Eigen::VectorXd::Zero(13);
  Eigen::MatrixXd background = Eigen::MatrixXd::Zero(2, 13);
  ShapConfig config;
  config.exact = true;
  std::vector<std::string> names(13, "f");
  CHECK_THROWS_AS(
      shap_values(linear_predictor(w, 0.0), x, background, names, config),
      ValidationError);

  ShapConfig zero_samples;
  zero_samples.n_samples = 0;
  Eigen::VectorXd w3 = Eigen::VectorXd::Ones(3), x3 = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd bg3 = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(shap_values(linear_predictor(w3, 0.0), x3, bg3,
                              {"a", "b", "c"}, zero_samples),
                  ValidationError);

  Eigen::MatrixXd empty_bg(0, 3);
  ShapConfig ok;
  CHECK_THROWS_AS(shap_values(linear_predictor(w3, 0.0), x3, empty_bg,
                              {"a", "b", "c"}, ok),
                  ValidationError);
}

TEST_CASE("sequence shap intervenes on whole feature columns") {
  // model reads mean of feature 0 over real steps; feature 1 is ignored
  SequencePredictor model = [](const std::vector<LabeledSequence>& seqs) {
    Eigen::VectorXd out(Eigen::Index(seqs.size()));
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      const auto& s = seqs[i];
      double sum = 0.0, count = 0.0;
      for (int t = 0; t < s.x.rows(); ++t) {
        if (s.mask[t] == 1.0) {
          sum += s.x(t, 0);
          count += 1.0;
        }
      }
      out[Eigen::Index(i)] = sum / count;
    }
    return out;
  };
  LabeledSequence instance;
  instance.index_admission_id = "IDX";
  instance.x = Eigen::MatrixXd::Zero(3, 2);
  instance.x << 1.0, 9.0, 2.0, 9.0, 3.0, 9.0;
  instance.mask = Eigen::VectorXd::Ones(3);

  LabeledSequence bg = instance;
  bg.x << 0.0, 1.0, 0.0, 1.0, 0.0, 1.0;

  ShapConfig config;
  config.exact = true;
  auto ex = shap_values(model, instance, {bg}, {"signal", "ignored"}, config);
  CHECK(std::abs(ex.attributions[0] - 2.0) < 1e-12);  // mean 2 vs mean 0
  CHECK(std::abs(ex.attributions[1]) < 1e-12);
  CHECK(ex.instance_id == "IDX");
  CHECK(ex.feature_values[0] == 3.0);  // last timestep
}

TEST_CASE("force plot export") {
  SUBCASE("empty input gives a valid empty document") {
    const std::string doc = export_force_plot_data({});
    auto parsed = nlohmann::json::parse(doc);
    CHECK(parsed["schema_version"] == 1);
    CHECK(parsed["explanations"].is_array());
    CHECK(parsed["explanations"].empty());
  }

  SUBCASE("features are sorted by attribution magnitude and round-trip") {
    ShapExplanation ex;
    ex.instance_id = "X1";
    ex.feature_names = {"small", "large", "mid"};
    ex.base_value = 0.4;
    ex.attributions = Eigen::VectorXd(3);
    ex.attributions << 0.01, -0.5, 0.2;
    ex.feature_values = Eigen::VectorXd(3);
    ex.feature_values << 1.0, 2.0, 3.0;
    ex.model_output = 0.11;
    const std::string doc = export_force_plot_data({&ex, 1});
    auto parsed = nlohmann::json::parse(doc);
    const auto& features = parsed["explanations"][0]["features"];
    CHECK(features[0]["name"] == "large");
    CHECK(features[1]["name"] == "mid");
    CHECK(features[2]["name"] == "small");
    // attributions reproduce bit-exactly through the JSON round trip
    CHECK(features[0]["attribution"].get<double>() == -0.5);
    CHECK(features[1]["attribution"].get<double>() == 0.2);
    CHECK(features[2]["attribution"].get<double>() == 0.01);
  }
}
