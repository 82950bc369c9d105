#include "readmit/lace.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"
#include "readmit/mathutil.hpp"
#include "json_util.hpp"

namespace readmit {

LaceSubscores lace_subscores(const LaceComponents& comp) {
  if (comp.los_days < 0 || comp.cci < 0 || comp.ed_visits < 0) {
    throw ValidationError("LACE components must be non-negative");
  }
  LaceSubscores s;

  const int l = comp.los_days;
  if (l < 1) s.l = 0;
  else if (l == 1) s.l = 1;
  else if (l == 2) s.l = 2;
  else if (l == 3) s.l = 3;
  else if (l <= 6) s.l = 4;
  else if (l <= 13) s.l = 6;
  else s.l = 7;

  s.a = comp.acute ? 3 : 0;

  const int c = comp.cci;
  s.c = c >= 4 ? 5 : c;

  const int e = comp.ed_visits;
  s.e = e >= 4 ? 4 : e;

  s.total = s.l + s.a + s.c + s.e;
  return s;
}

LaceComponents lace_components(const PatientHistory& history,
                               std::size_t admission_idx,
                               const CharlsonWeightTable& table) {
  if (admission_idx >= history.admissions.size()) {
    throw ValidationError("admission index out of range for patient " +
                          history.patient_id);
  }
  const AdmissionRecord& rec = history.admissions[admission_idx];
  LaceComponents comp;
  comp.los_days = compute_los(rec);
  comp.acute = rec.acute_admission;
  comp.cci = compute_cci(rec.comorbidity_categories, table);
  comp.ed_visits = count_window_events(
      history, rec.admit_date, kLookbackWindowDays,
      [](const AdmissionRecord& r) { return r.via_emergency_dept; });
  return comp;
}

const std::vector<std::string>& lace_feature_names() {
  static const std::vector<std::string> names = {
      "los_days", "acute_admission", "cci_score", "ed_visits_6mo"};
  return names;
}

Eigen::VectorXd lace_feature_row(const LaceComponents& comp) {
  Eigen::VectorXd x(4);
  x << comp.los_days, comp.acute ? 1.0 : 0.0, comp.cci, comp.ed_visits;
  return x;
}

double LogisticModel::predict_logit(const Eigen::VectorXd& x) const {
  if (x.size() != coefficients.size()) {
    throw ValidationError("feature vector arity mismatch: model expects " +
                          std::to_string(coefficients.size()) + ", got " +
                          std::to_string(x.size()));
  }
  return intercept + coefficients.dot(x);
}

double LogisticModel::predict_proba(const Eigen::VectorXd& x) const {
  return sigmoid(predict_logit(x));
}

LogisticModel fit_logistic(const Eigen::MatrixXd& X, std::span<const int> y,
                           const std::vector<std::string>& feature_names,
                           const LogisticFitConfig& config) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n == 0 || std::size_t(n) != y.size()) {
    throw ValidationError("fit_logistic: label count " +
                          std::to_string(y.size()) +
                          " does not match row count " + std::to_string(n));
  }
  if (feature_names.size() != std::size_t(d)) {
    throw ValidationError("fit_logistic: feature name count mismatch");
  }

  int n_pos = 0;
  for (int label : y) n_pos += label ? 1 : 0;
  if (n_pos == 0 || n_pos == int(n)) {
    throw ValidationError(
        "fit_logistic: labels are degenerate (single class); refusing to fit");
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    if ((X.col(j).array() - X(0, j)).abs().maxCoeff() == 0.0) {
      throw ValidationError("fit_logistic: feature column '" +
                            feature_names[std::size_t(j)] + "' is constant");
    }
  }

  // IRLS on [intercept; beta] with ridge on the non-intercept block.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[std::size_t(i)];

  Eigen::MatrixXd Xa(n, d + 1);
  Xa.col(0).setOnes();
  Xa.rightCols(d) = X;

  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, config.ridge);
  penalty[0] = 0.0;

  std::ostringstream trace;
  int iterations = 0;
  bool converged = false;
  for (; iterations < config.max_iterations; ++iterations) {
    Eigen::VectorXd eta = Xa * beta;
    Eigen::VectorXd p = eta.unaryExpr([](double v) { return sigmoid(v); });
    Eigen::VectorXd w =
        (p.array() * (1.0 - p.array())).max(1e-10).matrix();

    Eigen::MatrixXd hessian =
        Xa.transpose() * w.asDiagonal() * Xa;
    hessian.diagonal() += penalty;
    Eigen::VectorXd score = Xa.transpose() * (yv - p) -
                            penalty.asDiagonal() * beta;

    Eigen::VectorXd delta = hessian.ldlt().solve(score);
    beta += delta;

    const double step = delta.cwiseAbs().maxCoeff();
    trace << "iter " << iterations + 1 << ": max|dbeta|=" << step << "; ";
    if (beta.cwiseAbs().maxCoeff() > 1e3) {
      throw ComputeError(
          "fit_logistic: coefficients diverging (|beta| > 1e3), the data are "
          "likely perfectly separated [" + trace.str() + "]");
    }
    if (step < config.tolerance) {
      converged = true;
      ++iterations;
      break;
    }
  }
  if (!converged) {
    throw ComputeError("fit_logistic: no convergence after " +
                       std::to_string(config.max_iterations) +
                       " iterations [" + trace.str() + "]");
  }

  Eigen::VectorXd eta = Xa * beta;
  Eigen::VectorXd p = eta.unaryExpr([](double v) { return sigmoid(v); });
  {
    // Separation check: with a tiny ridge a separated fit converges to huge
    // coefficients that classify every instance with a vanishing margin.
    double worst_margin = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      worst_margin = std::max(worst_margin, yv[i] > 0.5 ? 1.0 - p[i] : p[i]);
    }
    if (worst_margin < 1e-4) {
      throw ComputeError(
          "fit_logistic: the data are perfectly separated (every instance "
          "fitted with margin < 1e-4, max |beta| = " +
          std::to_string(beta.cwiseAbs().maxCoeff()) + ") [" + trace.str() +
          "]");
    }
  }
  double deviance = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi = std::clamp(p[i], 1e-12, 1.0 - 1e-12);
    deviance += yv[i] * std::log(pi) + (1.0 - yv[i]) * std::log(1.0 - pi);
  }
  deviance *= -2.0;
  Eigen::VectorXd score =
      Xa.transpose() * (yv - p) - penalty.asDiagonal() * beta;

  LogisticModel model;
  model.intercept = beta[0];
  model.coefficients = beta.tail(d);
  model.feature_names = feature_names;
  model.iterations = iterations;
  model.final_deviance = deviance;
  model.ridge = config.ridge;
  model.score_max_norm = score.cwiseAbs().maxCoeff();
  return model;
}

double PointScoreTable::score(const Eigen::VectorXd& x) const {
  if (x.size() != static_cast<Eigen::Index>(points.size())) {
    throw ValidationError("point score arity mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    total += double(points[std::size_t(i)]) * x[i];
  }
  return total;
}

PointScoreTable to_point_score(const LogisticModel& model) {
  double min_abs = 0.0;
  for (Eigen::Index i = 0; i < model.coefficients.size(); ++i) {
    const double a = std::abs(model.coefficients[i]);
    if (a > 0.0 && (min_abs == 0.0 || a < min_abs)) min_abs = a;
  }
  if (min_abs == 0.0) {
    throw ValidationError("to_point_score: all coefficients are zero");
  }
  PointScoreTable table;
  table.feature_names = model.feature_names;
  table.reference_abs_coef = min_abs;
  for (Eigen::Index i = 0; i < model.coefficients.size(); ++i) {
    table.points.push_back(round_half_away(model.coefficients[i] / min_abs));
  }
  return table;
}

std::string LogisticModel::to_json_string() const {
  nlohmann::json names = nlohmann::json::array();
  for (const auto& n : feature_names) names.push_back(n);
  nlohmann::json doc = {
      {"schema_version", 1},
      {"kind", "lace-lr"},
      {"intercept", intercept},
      {"coefficients", detail::vector_to_json(coefficients)},
      {"feature_names", std::move(names)},
      {"training",
       {{"iterations", iterations},
        {"final_deviance", final_deviance},
        {"ridge", ridge},
        {"score_max_norm", score_max_norm}}},
  };
  return doc.dump(2);
}

LogisticModel LogisticModel::from_json_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
  if (doc.value("schema_version", 1) != 1 || doc.value("kind", "") != "lace-lr") {
    throw ValidationError("not a lace-lr model document");
  }
  LogisticModel model;
  model.intercept = doc.at("intercept").get<double>();
  model.coefficients = detail::vector_from_json(doc.at("coefficients"));
  for (const auto& n : doc.at("feature_names")) {
    model.feature_names.push_back(n.get<std::string>());
  }
  if (model.feature_names.size() != std::size_t(model.coefficients.size())) {
    throw ValidationError("model document: name/coefficient arity mismatch");
  }
  const auto& tr = doc.at("training");
  model.iterations = tr.at("iterations").get<int>();
  model.final_deviance = tr.at("final_deviance").get<double>();
  model.ridge = tr.at("ridge").get<double>();
  model.score_max_norm = tr.at("score_max_norm").get<double>();
  return model;
}

void LogisticModel::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file: " + file.string());
  out << to_json_string() << '\n';
}

LogisticModel LogisticModel::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open model file: " + file.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_string(text);
}

}  // namespace readmit
