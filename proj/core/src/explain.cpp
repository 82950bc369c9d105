#include "readmit/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"
#include "readmit/metrics.hpp"
#include "readmit/rng.hpp"

namespace readmit {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double stddev_of(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / double(v.size() - 1));
}

PermutationRow summarize_permutation(const std::string& name, double baseline,
                                     std::span<const double> permuted_aucs) {
  PermutationRow row;
  row.feature = name;
  row.baseline_auc = baseline;
  row.n_repeats = int(permuted_aucs.size());
  row.mean_permuted_auc = mean_of(permuted_aucs);
  row.importance = baseline - row.mean_permuted_auc;
  row.stddev = stddev_of(permuted_aucs, row.mean_permuted_auc);
  return row;
}

}  // namespace

PermutationRow permutation_importance(const TabularPredictor& model,
                                      const Eigen::MatrixXd& X,
                                      std::span<const int> labels,
                                      const std::string& feature_name,
                                      int feature_index, int n_repeats,
                                      std::uint64_t seed) {
  if (feature_index < 0 || feature_index >= X.cols()) {
    throw ValidationError("permutation_importance: feature index out of range");
  }
  if (n_repeats < 1) {
    throw ValidationError("permutation_importance: n_repeats must be >= 1");
  }
  const double baseline = auc_roc(to_std(model(X)), labels);

  const Eigen::VectorXd column = X.col(feature_index);
  if ((column.array() - column[0]).abs().maxCoeff() == 0.0) {
    PermutationRow row;
    row.feature = feature_name;
    row.baseline_auc = baseline;
    row.mean_permuted_auc = baseline;
    row.n_repeats = n_repeats;
    row.constant = true;
    return row;
  }

  std::vector<double> permuted_aucs;
  Eigen::MatrixXd Xp = X;
  std::vector<std::size_t> order(static_cast<std::size_t>(X.rows()));
  for (int rep = 0; rep < n_repeats; ++rep) {
    std::mt19937_64 rng{derive_seed(derive_seed(seed, std::uint64_t(feature_index)),
                                    std::uint64_t(rep))};
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      Xp(i, feature_index) = column[Eigen::Index(order[std::size_t(i)])];
    }
    permuted_aucs.push_back(auc_roc(to_std(model(Xp)), labels));
  }
  return summarize_permutation(feature_name, baseline, permuted_aucs);
}

PermutationRow permutation_importance(const SequencePredictor& model,
                                      const std::vector<LabeledSequence>& test,
                                      const std::string& feature_name,
                                      int feature_index, int n_repeats,
                                      std::uint64_t seed) {
  if (test.empty()) throw ValidationError("permutation_importance: empty test set");
  if (feature_index < 0 || feature_index >= test[0].x.cols()) {
    throw ValidationError("permutation_importance: feature index out of range");
  }
  if (n_repeats < 1) {
    throw ValidationError("permutation_importance: n_repeats must be >= 1");
  }
  std::vector<int> labels;
  labels.reserve(test.size());
  for (const auto& s : test) labels.push_back(s.label ? 1 : 0);

  const double baseline = auc_roc(to_std(model(test)), labels);

  // Constant over valid positions?
  {
    bool constant = true;
    double first = 0.0;
    bool seen = false;
    for (const auto& s : test) {
      for (Eigen::Index t = 0; t < s.x.rows() && constant; ++t) {
        if (s.mask[t] == 0.0) continue;
        const double v = s.x(t, feature_index);
        if (!seen) { first = v; seen = true; }
        else if (v != first) constant = false;
      }
      if (!constant) break;
    }
    if (constant) {
      PermutationRow row;
      row.feature = feature_name;
      row.baseline_auc = baseline;
      row.mean_permuted_auc = baseline;
      row.n_repeats = n_repeats;
      row.constant = true;
      return row;
    }
  }

  std::vector<double> permuted_aucs;
  std::vector<std::size_t> order(test.size());
  for (int rep = 0; rep < n_repeats; ++rep) {
    std::mt19937_64 rng{derive_seed(derive_seed(seed, std::uint64_t(feature_index)),
                                    std::uint64_t(rep))};
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<LabeledSequence> permuted = test;
    for (std::size_t n = 0; n < test.size(); ++n) {
      permuted[n].x.col(feature_index) = test[order[n]].x.col(feature_index);
    }
    permuted_aucs.push_back(auc_roc(to_std(model(permuted)), labels));
  }
  return summarize_permutation(feature_name, baseline, permuted_aucs);
}

std::vector<PermutationRow> permutation_report(
    const TabularPredictor& model, const Eigen::MatrixXd& X,
    std::span<const int> labels, const std::vector<std::string>& feature_names,
    int n_repeats, std::uint64_t seed) {
  if (feature_names.size() != std::size_t(X.cols())) {
    throw ValidationError("permutation_report: feature name count mismatch");
  }
  std::vector<PermutationRow> rows;
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    rows.push_back(permutation_importance(model, X, labels, feature_names[j],
                                          int(j), n_repeats, seed));
  }
  return rows;
}

std::vector<PermutationRow> permutation_report(
    const SequencePredictor& model, const std::vector<LabeledSequence>& test,
    const std::vector<std::string>& feature_names, int n_repeats,
    std::uint64_t seed) {
  if (test.empty()) throw ValidationError("permutation_report: empty test set");
  if (feature_names.size() != std::size_t(test[0].x.cols())) {
    throw ValidationError("permutation_report: feature name count mismatch");
  }
  std::vector<PermutationRow> rows;
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    rows.push_back(permutation_importance(model, test, feature_names[j],
                                          int(j), n_repeats, seed));
  }
  return rows;
}

std::string permutation_rows_to_csv(std::span<const PermutationRow> rows) {
  std::ostringstream out;
  out.precision(17);
  out << "feature,importance,baseline_auc,mean_permuted_auc,stddev,n_repeats,"
         "constant\n";
  for (const auto& r : rows) {
    out << r.feature << ',' << r.importance << ',' << r.baseline_auc << ','
        << r.mean_permuted_auc << ',' << r.stddev << ',' << r.n_repeats << ','
        << (r.constant ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string permutation_rows_to_json(std::span<const PermutationRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({
        {"feature", r.feature},
        {"importance", r.importance},
        {"baseline_auc", r.baseline_auc},
        {"mean_permuted_auc", r.mean_permuted_auc},
        {"stddev", r.stddev},
        {"n_repeats", r.n_repeats},
        {"constant", r.constant},
    });
  }
  nlohmann::json doc = {{"schema_version", 1}, {"rows", std::move(arr)}};
  return doc.dump(2);
}

namespace {

// Shapley estimation over an abstract coalition evaluator:
//   v(S) = mean over the background of the model with features in S taken
//   from the instance.
// The caller provides v as a function of the coalition bitmask (exact mode)
// or of a boolean membership vector (sampling mode).

struct ShapleyCore {
  Eigen::VectorXd phi;
  double base_value = 0.0;   // v(empty)
  double full_value = 0.0;   // v(all) == f(x)
  double mc_stderr = 0.0;    // 0 in exact mode
};

ShapleyCore exact_shapley(
    int d, const std::function<double(std::uint32_t)>& coalition_value) {
  if (d > 12) {
    throw ValidationError(
        "exact Shapley mode supports at most 12 features, got " +
        std::to_string(d));
  }
  const std::uint32_t n_masks = 1u << d;
  std::vector<double> v(n_masks);
  for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
    v[mask] = coalition_value(mask);
  }

  // weight(k) = k! (d-1-k)! / d!  for a coalition of size k not containing f
  std::vector<double> factorial(std::size_t(d) + 1, 1.0);
  for (int k = 1; k <= d; ++k) factorial[std::size_t(k)] = factorial[std::size_t(k - 1)] * k;
  std::vector<double> weight(std::size_t(d), 0.0);
  for (int k = 0; k < d; ++k) {
    weight[std::size_t(k)] =
        factorial[std::size_t(k)] * factorial[std::size_t(d - 1 - k)] /
        factorial[std::size_t(d)];
  }

  ShapleyCore core;
  core.phi = Eigen::VectorXd::Zero(d);
  for (int f = 0; f < d; ++f) {
    const std::uint32_t bit = 1u << f;
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const int k = std::popcount(mask);
      core.phi[f] += weight[std::size_t(k)] * (v[mask | bit] - v[mask]);
    }
  }
  core.base_value = v[0];
  core.full_value = v[n_masks - 1];
  return core;
}

ShapleyCore sampled_shapley(
    int d, int n_samples, std::uint64_t seed,
    const std::function<double(const std::vector<char>&)>& coalition_value) {
  if (n_samples < 1) {
    throw ValidationError("shap_values: n_samples must be >= 1");
  }
  std::mt19937_64 rng{derive_seed(seed, 0x5a9)};

  std::vector<char> members(std::size_t(d), 0);
  const double base = coalition_value(members);
  std::fill(members.begin(), members.end(), 1);
  const double full = coalition_value(members);

  ShapleyCore core;
  core.phi = Eigen::VectorXd::Zero(d);
  core.base_value = base;
  core.full_value = full;

  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sample_sums;
  sample_sums.reserve(std::size_t(n_samples));
  for (int s = 0; s < n_samples; ++s) {
    std::shuffle(order.begin(), order.end(), rng);
    std::fill(members.begin(), members.end(), 0);
    double prev = base;
    double sum = 0.0;
    for (int k = 0; k < d; ++k) {
      members[std::size_t(order[std::size_t(k)])] = 1;
      // The final prefix is the full coalition; reuse the cached value.
      const double cur = (k == d - 1) ? full : coalition_value(members);
      const double marginal = cur - prev;
      core.phi[order[std::size_t(k)]] += marginal;
      sum += marginal;
      prev = cur;
    }
    sample_sums.push_back(sum);
  }
  core.phi /= double(n_samples);

  const double mean_sum = mean_of(sample_sums);
  core.mc_stderr =
      stddev_of(sample_sums, mean_sum) / std::sqrt(double(n_samples));
  return core;
}

ShapExplanation finish_explanation(ShapleyCore core,
                                   const std::vector<std::string>& names,
                                   Eigen::VectorXd display_values,
                                   const ShapConfig& config,
                                   const std::string& instance_id) {
  ShapExplanation ex;
  ex.instance_id = instance_id;
  ex.feature_names = names;
  ex.base_value = core.base_value;
  ex.attributions = core.phi;
  ex.feature_values = std::move(display_values);
  ex.model_output = core.full_value;
  ex.exact = config.exact;
  ex.n_samples = config.exact ? 0 : config.n_samples;
  ex.seed = config.seed;
  ex.efficiency_residual =
      std::abs(core.base_value + core.phi.sum() - core.full_value);
  ex.efficiency_tolerance =
      config.exact ? 1e-9 : std::max(1e-9, 3.0 * core.mc_stderr);
  if (ex.efficiency_residual > ex.efficiency_tolerance) {
    throw ComputeError("shap_values: efficiency residual " +
                       std::to_string(ex.efficiency_residual) +
                       " exceeds tolerance " +
                       std::to_string(ex.efficiency_tolerance));
  }
  return ex;
}

}  // namespace

ShapExplanation shap_values(const TabularPredictor& model,
                            const Eigen::VectorXd& instance,
                            const Eigen::MatrixXd& background,
                            const std::vector<std::string>& feature_names,
                            const ShapConfig& config,
                            const std::string& instance_id) {
  const int d = int(instance.size());
  if (background.rows() == 0) {
    throw ValidationError("shap_values: background set is empty");
  }
  if (background.cols() != d ||
      feature_names.size() != std::size_t(d)) {
    throw ValidationError("shap_values: feature arity mismatch");
  }
  const Eigen::Index m = background.rows();

  Eigen::MatrixXd work = background;
  auto value_of_members = [&](const std::vector<char>& members) {
    for (int j = 0; j < d; ++j) {
      if (members[std::size_t(j)]) {
        work.col(j).setConstant(instance[j]);
      } else {
        work.col(j) = background.col(j);
      }
    }
    return model(work).sum() / double(m);
  };

  ShapleyCore core;
  if (config.exact) {
    core = exact_shapley(d, [&](std::uint32_t mask) {
      std::vector<char> members(std::size_t(d), 0);
      for (int j = 0; j < d; ++j) members[std::size_t(j)] = (mask >> j) & 1u;
      return value_of_members(members);
    });
  } else {
    core = sampled_shapley(d, config.n_samples, config.seed, value_of_members);
  }
  return finish_explanation(std::move(core), feature_names, instance, config,
                            instance_id);
}

ShapExplanation shap_values(const SequencePredictor& model,
                            const LabeledSequence& instance,
                            const std::vector<LabeledSequence>& background,
                            const std::vector<std::string>& feature_names,
                            const ShapConfig& config) {
  const int d = int(instance.x.cols());
  if (background.empty()) {
    throw ValidationError("shap_values: background set is empty");
  }
  if (feature_names.size() != std::size_t(d)) {
    throw ValidationError("shap_values: feature arity mismatch");
  }
  for (const auto& b : background) {
    if (b.x.rows() != instance.x.rows() || b.x.cols() != instance.x.cols()) {
      throw ValidationError("shap_values: background sequence shape mismatch");
    }
  }

  // Hybrids keep the instance's mask; coalition features take the
  // instance's whole per-timestep column, the rest come from the background
  // sequence at aligned positions.
  std::vector<LabeledSequence> work(background.size(), instance);
  auto value_of_members = [&](const std::vector<char>& members) {
    for (std::size_t b = 0; b < background.size(); ++b) {
      for (int j = 0; j < d; ++j) {
        work[b].x.col(j) =
            members[std::size_t(j)] ? instance.x.col(j) : background[b].x.col(j);
      }
    }
    return model(work).sum() / double(background.size());
  };

  ShapleyCore core;
  if (config.exact) {
    core = exact_shapley(d, [&](std::uint32_t mask) {
      std::vector<char> members(std::size_t(d), 0);
      for (int j = 0; j < d; ++j) members[std::size_t(j)] = (mask >> j) & 1u;
      return value_of_members(members);
    });
  } else {
    core = sampled_shapley(d, config.n_samples, config.seed, value_of_members);
  }
  // Display values: the index admission's (final timestep) features.
  Eigen::VectorXd display =
      instance.x.row(instance.x.rows() - 1).transpose();
  return finish_explanation(std::move(core), feature_names, std::move(display),
                            config, instance.index_admission_id);
}

std::string export_force_plot_data(
    std::span<const ShapExplanation> explanations) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& ex : explanations) {
    std::vector<std::size_t> order(ex.feature_names.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double wa = std::abs(ex.attributions[Eigen::Index(a)]);
      const double wb = std::abs(ex.attributions[Eigen::Index(b)]);
      if (wa != wb) return wa > wb;
      return ex.feature_names[a] < ex.feature_names[b];
    });
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t j : order) {
      features.push_back({
          {"name", ex.feature_names[j]},
          {"value", ex.feature_values[Eigen::Index(j)]},
          {"attribution", ex.attributions[Eigen::Index(j)]},
      });
    }
    arr.push_back({
        {"instance_id", ex.instance_id},
        {"base_value", ex.base_value},
        {"model_output", ex.model_output},
        {"exact", ex.exact},
        {"n_samples", ex.n_samples},
        {"seed", ex.seed},
        {"efficiency_residual", ex.efficiency_residual},
        {"efficiency_tolerance", ex.efficiency_tolerance},
        {"features", std::move(features)},
    });
  }
  nlohmann::json doc = {{"schema_version", 1},
                        {"explanations", std::move(arr)}};
  return doc.dump(2);
}

}  // namespace readmit
