#include "readmit/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"
#include "readmit/metrics.hpp"
#include "readmit/rng.hpp"

namespace readmit {

InstanceLabels test_instance_labels(std::span<const PatientHistory> test) {
  InstanceLabels out;
  for (const auto& history : test) {
    for (const auto& [admission_id, label] : label_readmissions(history)) {
      out.labels.push_back(label ? 1 : 0);
      out.ids.push_back(admission_id);
    }
  }
  return out;
}

PatientSplit split_by_patient(std::span<const PatientHistory> cohort,
                              double train_fraction, std::uint64_t seed) {
  if (cohort.size() < 2) {
    throw ValidationError("split_by_patient: need at least 2 patients");
  }
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw ValidationError("split_by_patient: train_fraction must be in (0,1)");
  }
  std::vector<std::size_t> order(cohort.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng{seed};
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_train = std::clamp<std::size_t>(
      std::size_t(std::llround(train_fraction * double(cohort.size()))), 1,
      cohort.size() - 1);

  PatientSplit split;
  split.train.reserve(n_train);
  split.test.reserve(cohort.size() - n_train);
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? split.train : split.test).push_back(cohort[order[k]]);
  }
  return split;
}

MetricSummary summarize_metric(std::span<const double> values) {
  if (values.empty()) throw ValidationError("summarize_metric: no values");
  MetricSummary s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           double(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / double(values.size() - 1));
    const double half = 1.96 * sd / std::sqrt(double(values.size()));
    s.has_ci = true;
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
  }
  return s;
}

EvaluationReport run_repeated_evaluation(std::span<const PatientHistory> cohort,
                                         const ModelTrainer& trainer,
                                         const SplitPlan& plan,
                                         const std::string& model_id) {
  if (plan.n_repeats < 1) {
    throw ValidationError("split plan: n_repeats must be >= 1");
  }
  {
    int patients_with_pos = 0, patients_with_neg = 0;
    for (const auto& h : cohort) {
      bool pos = false, neg = false;
      for (const auto& [id, label] : label_readmissions(h)) {
        (label ? pos : neg) = true;
      }
      patients_with_pos += pos ? 1 : 0;
      patients_with_neg += neg ? 1 : 0;
    }
    if (patients_with_pos < 2 || patients_with_neg < 2) {
      throw ValidationError(
          "run_repeated_evaluation: need at least 2 patients per class (got " +
          std::to_string(patients_with_pos) + " positive-bearing, " +
          std::to_string(patients_with_neg) + " negative-bearing)");
    }
  }

  std::vector<RepeatMetrics> results(static_cast<std::size_t>(plan.n_repeats));
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto run_one = [&](int repeat) {
    const std::uint64_t split_seed = derive_seed(plan.seed, std::uint64_t(repeat));
    try {
      PatientSplit split =
          split_by_patient(cohort, plan.train_fraction, split_seed);
      InstanceLabels truth = test_instance_labels(split.test);
      std::vector<double> scores =
          trainer(split.train, split.test, derive_seed(split_seed, 1));
      if (scores.size() != truth.labels.size()) {
        throw ComputeError("trainer returned " + std::to_string(scores.size()) +
                           " scores for " + std::to_string(truth.labels.size()) +
                           " test instances");
      }
      RepeatMetrics m;
      m.repeat = repeat;
      m.split_seed = split_seed;
      m.auc = auc_roc(scores, truth.labels);
      TopDecileMetrics decile =
          top_decile_metrics(scores, truth.labels, truth.ids);
      m.precision_top_decile = decile.precision;
      m.recall_top_decile = decile.recall;
      results[std::size_t(repeat)] = m;
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) {
        try {
          std::rethrow_exception(std::current_exception());
        } catch (const std::exception& e) {
          first_error = std::make_exception_ptr(
              ComputeError("evaluation repeat " + std::to_string(repeat) +
                           " (split seed " + std::to_string(split_seed) +
                           ") failed: " + e.what()));
        }
      }
    }
  };

  const unsigned workers = std::max(
      1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                             unsigned(plan.n_repeats)));
  if (workers == 1) {
    for (int r = 0; r < plan.n_repeats; ++r) {
      run_one(r);
      if (first_error) std::rethrow_exception(first_error);
    }
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < plan.n_repeats;
             r = next.fetch_add(1)) {
          run_one(r);
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  EvaluationReport report;
  report.model_id = model_id;
  report.plan = plan;
  report.repeats = std::move(results);

  std::vector<double> aucs, precisions, recalls;
  for (const auto& m : report.repeats) {
    aucs.push_back(m.auc);
    precisions.push_back(m.precision_top_decile);
    recalls.push_back(m.recall_top_decile);
  }
  report.auc = summarize_metric(aucs);
  report.precision_top_decile = summarize_metric(precisions);
  report.recall_top_decile = summarize_metric(recalls);
  return report;
}

namespace {

nlohmann::json summary_to_json(const MetricSummary& s) {
  nlohmann::json doc = {{"mean", s.mean}};
  if (s.has_ci) {
    doc["ci95_low"] = s.ci_low;
    doc["ci95_high"] = s.ci_high;
  } else {
    doc["ci95_low"] = nullptr;
    doc["ci95_high"] = nullptr;
  }
  return doc;
}

}  // namespace

std::string EvaluationReport::to_json_string() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : repeats) {
    rows.push_back({
        {"repeat", m.repeat},
        {"split_seed", m.split_seed},
        {"auc", m.auc},
        {"precision_top_decile", m.precision_top_decile},
        {"recall_top_decile", m.recall_top_decile},
    });
  }
  nlohmann::json doc = {
      {"schema_version", 1},
      {"model_id", model_id},
      {"plan",
       {{"seed", plan.seed},
        {"n_repeats", plan.n_repeats},
        {"train_fraction", plan.train_fraction}}},
      {"repeats", std::move(rows)},
      {"aggregates",
       {{"auc", summary_to_json(auc)},
        {"precision_top_decile", summary_to_json(precision_top_decile)},
        {"recall_top_decile", summary_to_json(recall_top_decile)}}},
  };
  return doc.dump(2);
}

std::string EvaluationReport::to_csv_string() const {
  std::ostringstream out;
  out.precision(17);
  out << "repeat,split_seed,auc,precision_top_decile,recall_top_decile\n";
  for (const auto& m : repeats) {
    out << m.repeat << ',' << m.split_seed << ',' << m.auc << ','
        << m.precision_top_decile << ',' << m.recall_top_decile << '\n';
  }
  return out.str();
}

ModelTrainer make_lace_trainer(CharlsonWeightTable table,
                               LogisticFitConfig fit_config, bool extended,
                               FeatureRegistryOptions registry_options) {
  return [table = std::move(table), fit_config, extended,
          registry_options](std::span<const PatientHistory> train,
                            std::span<const PatientHistory> test,
                            std::uint64_t /*seed*/) -> std::vector<double> {
    if (extended) {
      FeatureRegistry registry = FeatureRegistry::create(registry_options);
      registry.fit(train, table);
      AdmissionTable train_tab = extract_admission_table(train, registry, table);
      Eigen::MatrixXd X(train_tab.rows.rows(), train_tab.rows.cols());
      for (Eigen::Index i = 0; i < train_tab.rows.rows(); ++i) {
        X.row(i) =
            registry.normalize(train_tab.rows.row(i).transpose()).transpose();
      }
      LogisticModel model =
          fit_logistic(X, train_tab.labels, registry.names(), fit_config);

      AdmissionTable test_tab = extract_admission_table(test, registry, table);
      std::vector<double> scores;
      scores.reserve(std::size_t(test_tab.rows.rows()));
      for (Eigen::Index i = 0; i < test_tab.rows.rows(); ++i) {
        scores.push_back(model.predict_proba(
            registry.normalize(test_tab.rows.row(i).transpose())));
      }
      return scores;
    }

    std::vector<int> y;
    std::vector<Eigen::VectorXd> rows;
    for (const auto& history : train) {
      auto labels = label_readmissions(history);
      for (std::size_t i = 0; i < history.admissions.size(); ++i) {
        rows.push_back(lace_feature_row(lace_components(history, i, table)));
        y.push_back(labels[i].second ? 1 : 0);
      }
    }
    Eigen::MatrixXd X(rows.size(), 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      X.row(Eigen::Index(i)) = rows[i].transpose();
    }
    LogisticModel model = fit_logistic(X, y, lace_feature_names(), fit_config);

    std::vector<double> scores;
    for (const auto& history : test) {
      for (std::size_t i = 0; i < history.admissions.size(); ++i) {
        scores.push_back(model.predict_proba(
            lace_feature_row(lace_components(history, i, table))));
      }
    }
    return scores;
  };
}

ModelTrainer make_lstm_trainer(CharlsonWeightTable table, TrainConfig config,
                               FeatureRegistryOptions registry_options,
                               SequenceConfig seq_config) {
  return [table = std::move(table), config, registry_options,
          seq_config](std::span<const PatientHistory> train,
                      std::span<const PatientHistory> test,
                      std::uint64_t seed) -> std::vector<double> {
    FeatureRegistry registry = FeatureRegistry::create(registry_options);
    registry.fit(train, table);
    std::vector<LabeledSequence> train_seqs =
        build_sequences(train, registry, table, seq_config);
    TrainConfig run_config = config;
    run_config.seed = seed;
    TrainResult trained = train_lstm(train_seqs, run_config);

    std::vector<LabeledSequence> test_seqs =
        build_sequences(test, registry, table, seq_config);
    Eigen::VectorXd probs = score_sequences(trained.network, test_seqs);
    return {probs.data(), probs.data() + probs.size()};
  };
}

ModelTrainer make_oracle_trainer(CohortSpec spec) {
  return [spec](std::span<const PatientHistory> /*train*/,
                std::span<const PatientHistory> test,
                std::uint64_t /*seed*/) -> std::vector<double> {
    std::vector<double> scores;
    for (const auto& history : test) {
      for (std::size_t i = 0; i < history.admissions.size(); ++i) {
        scores.push_back(planted_probability(spec, history, i));
      }
    }
    return scores;
  };
}

}  // namespace readmit
