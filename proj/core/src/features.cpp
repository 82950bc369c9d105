#include "readmit/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "readmit/errors.hpp"

namespace readmit {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

bool is_missing(double v) { return std::isnan(v); }

}  // namespace

const std::vector<std::string>& feature_base_names() {
  static const std::vector<std::string> names = {
      "los_days",       "acute_admission",   "cci_score",
      "ed_visits_6mo",  "admissions_6mo",    "surgery",
      "num_medications", "num_consultations", "season",
      "sex",            "age",
  };
  return names;
}

FeatureRegistry FeatureRegistry::create(const FeatureRegistryOptions& options) {
  const auto& known = feature_base_names();
  for (const auto& name : options.exclude) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      std::string valid;
      for (const auto& k : known) valid += (valid.empty() ? "" : ", ") + k;
      throw ConfigError("unknown feature in exclude list: '" + name +
                        "' (valid: " + valid + ")");
    }
  }
  auto excluded = [&](const std::string& base) {
    return options.exclude.count(base) > 0;
  };

  FeatureRegistry reg;
  reg.options_ = options;
  auto add = [&](std::string name, FeatureKind kind) {
    reg.descriptors_.push_back({std::move(name), kind, 0.0, 1.0, 0.0, false});
  };
  if (!excluded("los_days")) add("los_days", FeatureKind::temporal);
  if (!excluded("acute_admission")) add("acute_admission", FeatureKind::temporal);
  if (!excluded("cci_score")) add("cci_score", FeatureKind::temporal);
  if (!excluded("ed_visits_6mo")) add("ed_visits_6mo", FeatureKind::temporal);
  if (!excluded("admissions_6mo")) add("admissions_6mo", FeatureKind::temporal);
  if (!excluded("surgery")) add("surgery", FeatureKind::temporal);
  if (!excluded("num_medications")) add("num_medications", FeatureKind::temporal);
  if (!excluded("num_consultations"))
    add("num_consultations", FeatureKind::temporal);
  if (!excluded("season")) {
    add("season_winter", FeatureKind::temporal);
    add("season_spring", FeatureKind::temporal);
    add("season_summer", FeatureKind::temporal);
    add("season_fall", FeatureKind::temporal);
  }
  if (!excluded("sex")) add("sex", FeatureKind::static_demographic);
  if (!excluded("age")) {
    if (options.bucket_age) {
      add("age_65_74", FeatureKind::static_demographic);
      add("age_75_84", FeatureKind::static_demographic);
      add("age_85_plus", FeatureKind::static_demographic);
    } else {
      add("age", FeatureKind::static_demographic);
    }
  }
  if (reg.descriptors_.empty()) {
    throw ConfigError("feature registry is empty: every feature excluded");
  }
  return reg;
}

std::vector<std::string> FeatureRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(descriptors_.size());
  for (const auto& d : descriptors_) out.push_back(d.name);
  return out;
}

int FeatureRegistry::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < descriptors_.size(); ++i) {
    if (descriptors_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

Eigen::VectorXd FeatureRegistry::raw_features(
    const PatientHistory& history, std::size_t admission_idx,
    const CharlsonWeightTable& table) const {
  if (admission_idx >= history.admissions.size()) {
    throw ValidationError("admission index out of range for patient " +
                          history.patient_id);
  }
  const AdmissionRecord& rec = history.admissions[admission_idx];
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Eigen::VectorXd row(descriptors_.size());
  for (std::size_t j = 0; j < descriptors_.size(); ++j) {
    const std::string& name = descriptors_[j].name;
    double v = 0.0;
    if (name == "los_days") {
      v = compute_los(rec);
    } else if (name == "acute_admission") {
      v = rec.acute_admission ? 1.0 : 0.0;
    } else if (name == "cci_score") {
      v = compute_cci(rec.comorbidity_categories, table);
    } else if (name == "ed_visits_6mo") {
      v = count_window_events(history, rec.admit_date, kLookbackWindowDays,
                              [](const AdmissionRecord& r) {
                                return r.via_emergency_dept;
                              });
    } else if (name == "admissions_6mo") {
      v = count_window_events(history, rec.admit_date, kLookbackWindowDays,
                              [](const AdmissionRecord&) { return true; });
    } else if (name == "surgery") {
      v = rec.surgery ? 1.0 : 0.0;
    } else if (name == "num_medications") {
      v = rec.num_medications ? double(*rec.num_medications) : nan;
    } else if (name == "num_consultations") {
      v = rec.num_consultations ? double(*rec.num_consultations) : nan;
    } else if (name == "season_winter") {
      v = rec.season() == Season::winter ? 1.0 : 0.0;
    } else if (name == "season_spring") {
      v = rec.season() == Season::spring ? 1.0 : 0.0;
    } else if (name == "season_summer") {
      v = rec.season() == Season::summer ? 1.0 : 0.0;
    } else if (name == "season_fall") {
      v = rec.season() == Season::fall ? 1.0 : 0.0;
    } else if (name == "sex") {
      v = history.sex == Sex::male ? 1.0 : 0.0;
    } else if (name == "age") {
      v = history.age_at_index;
    } else if (name == "age_65_74") {
      v = history.age_at_index <= 74 ? 1.0 : 0.0;
    } else if (name == "age_75_84") {
      v = (history.age_at_index >= 75 && history.age_at_index <= 84) ? 1.0 : 0.0;
    } else if (name == "age_85_plus") {
      v = history.age_at_index >= 85 ? 1.0 : 0.0;
    } else {
      throw ComputeError("unhandled feature descriptor: " + name);
    }
    row[static_cast<Eigen::Index>(j)] = v;
  }
  return row;
}

RegistryFitReport FeatureRegistry::fit(std::span<const PatientHistory> train,
                                       const CharlsonWeightTable& table) {
  AdmissionTable tab = extract_admission_table(train, *this, table);
  const Eigen::Index n = tab.rows.rows();
  const Eigen::Index d = tab.rows.cols();
  if (n == 0) throw ValidationError("cannot fit feature registry: no admissions");

  RegistryFitReport report;
  report.n_rows = static_cast<std::size_t>(n);

  for (Eigen::Index j = 0; j < d; ++j) {
    FeatureDescriptor& desc = descriptors_[static_cast<std::size_t>(j)];

    // Median of observed values, for imputation.
    std::vector<double> observed;
    observed.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!is_missing(tab.rows(i, j))) observed.push_back(tab.rows(i, j));
    }
    if (observed.empty()) {
      desc.median = 0.0;
      report.warnings.push_back("feature '" + desc.name +
                                "' has no observed values; imputing 0");
    } else {
      std::sort(observed.begin(), observed.end());
      const std::size_t m = observed.size();
      desc.median = (m % 2 == 1)
                        ? observed[m / 2]
                        : 0.5 * (observed[m / 2 - 1] + observed[m / 2]);
    }

    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = is_missing(tab.rows(i, j)) ? desc.median : tab.rows(i, j);
      sum += v;
    }
    desc.mean = sum / double(n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = is_missing(tab.rows(i, j)) ? desc.median : tab.rows(i, j);
      ss += (v - desc.mean) * (v - desc.mean);
    }
    desc.stddev = std::sqrt(ss / double(n));
    desc.constant = desc.stddev == 0.0;
    if (desc.constant) {
      report.warnings.push_back("feature '" + desc.name +
                                "' is constant on the training split; it "
                                "will be emitted as 0");
    }
  }
  fitted_ = true;
  return report;
}

Eigen::VectorXd FeatureRegistry::normalize(const Eigen::VectorXd& raw) const {
  if (!fitted_) {
    throw ComputeError("feature registry has no fitted statistics");
  }
  if (raw.size() != static_cast<Eigen::Index>(descriptors_.size())) {
    throw ValidationError("feature vector arity mismatch: expected " +
                          std::to_string(descriptors_.size()) + ", got " +
                          std::to_string(raw.size()));
  }
  Eigen::VectorXd out(raw.size());
  for (Eigen::Index j = 0; j < raw.size(); ++j) {
    const FeatureDescriptor& desc = descriptors_[static_cast<std::size_t>(j)];
    double v = is_missing(raw[j]) ? desc.median : raw[j];
    out[j] = desc.constant ? 0.0 : (v - desc.mean) / desc.stddev;
  }
  return out;
}

std::uint64_t FeatureRegistry::schema_hash() const {
  std::uint64_t h = fnv1a(kFnvOffset, "readmit-feature-registry-v1");
  for (const auto& d : descriptors_) {
    h = fnv1a(h, d.name);
    h = fnv1a(h, d.kind == FeatureKind::temporal ? "|t;" : "|s;");
  }
  return h;
}

void FeatureRegistry::set_descriptors(
    std::vector<FeatureDescriptor> descriptors, FeatureRegistryOptions options,
    bool fitted) {
  FeatureRegistry reference = create(options);
  if (descriptors.size() != reference.descriptors_.size()) {
    throw ValidationError("registry descriptor count does not match options");
  }
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (descriptors[i].name != reference.descriptors_[i].name ||
        descriptors[i].kind != reference.descriptors_[i].kind) {
      throw ValidationError("registry descriptor '" + descriptors[i].name +
                            "' does not match canonical layout");
    }
  }
  descriptors_ = std::move(descriptors);
  options_ = std::move(options);
  fitted_ = fitted;
}

std::vector<LabeledSequence> build_sequences(
    std::span<const PatientHistory> histories, const FeatureRegistry& registry,
    const CharlsonWeightTable& table, const SequenceConfig& config) {
  if (config.max_seq_len < 1) {
    throw ConfigError("max_seq_len must be >= 1");
  }
  const int T = config.max_seq_len;
  const Eigen::Index d = static_cast<Eigen::Index>(registry.size());

  std::vector<LabeledSequence> out;
  for (const auto& history : histories) {
    auto labels = label_readmissions(history);
    // Normalized rows for every admission, computed once per patient.
    std::vector<Eigen::VectorXd> rows;
    rows.reserve(history.admissions.size());
    for (std::size_t i = 0; i < history.admissions.size(); ++i) {
      rows.push_back(registry.normalize(registry.raw_features(history, i, table)));
    }
    for (std::size_t i = 0; i < history.admissions.size(); ++i) {
      LabeledSequence seq;
      seq.patient_id = history.patient_id;
      seq.index_admission_id = history.admissions[i].admission_id;
      seq.label = labels[i].second;
      seq.x = Eigen::MatrixXd::Zero(T, d);
      seq.mask = Eigen::VectorXd::Zero(T);
      // Keep the most recent max_seq_len admissions, left-padded.
      const std::size_t len = std::min<std::size_t>(i + 1, std::size_t(T));
      const std::size_t first = i + 1 - len;
      for (std::size_t k = 0; k < len; ++k) {
        const Eigen::Index t = static_cast<Eigen::Index>(T - len + k);
        seq.x.row(t) = rows[first + k].transpose();
        seq.mask[t] = 1.0;
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

AdmissionTable extract_admission_table(
    std::span<const PatientHistory> histories, const FeatureRegistry& registry,
    const CharlsonWeightTable& table) {
  std::size_t n = 0;
  for (const auto& h : histories) n += h.admissions.size();

  AdmissionTable tab;
  tab.rows.resize(static_cast<Eigen::Index>(n),
                  static_cast<Eigen::Index>(registry.size()));
  tab.labels.reserve(n);
  tab.admission_ids.reserve(n);
  tab.patient_ids.reserve(n);

  Eigen::Index r = 0;
  for (const auto& history : histories) {
    auto labels = label_readmissions(history);
    for (std::size_t i = 0; i < history.admissions.size(); ++i) {
      tab.rows.row(r++) = registry.raw_features(history, i, table).transpose();
      tab.labels.push_back(labels[i].second ? 1 : 0);
      tab.admission_ids.push_back(history.admissions[i].admission_id);
      tab.patient_ids.push_back(history.patient_id);
    }
  }
  return tab;
}

}  // namespace readmit
