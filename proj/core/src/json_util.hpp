#pragma once

// Internal JSON helpers shared by the core sources. Not installed.

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"
#include "readmit/features.hpp"

namespace readmit::detail {

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows[0].size();
  Eigen::MatrixXd m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c) {
      throw ValidationError("ragged matrix in JSON document");
    }
    for (std::size_t j = 0; j < c; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j].get<double>();
    }
  }
  return m;
}

inline nlohmann::json registry_to_json(const FeatureRegistry& reg) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& d : reg.descriptors()) {
    features.push_back({
        {"name", d.name},
        {"kind", d.kind == FeatureKind::temporal ? "temporal" : "static"},
        {"mean", d.mean},
        {"stddev", d.stddev},
        {"median", d.median},
        {"constant", d.constant},
    });
  }
  nlohmann::json exclude = nlohmann::json::array();
  for (const auto& name : reg.options().exclude) exclude.push_back(name);
  return {
      {"features", std::move(features)},
      {"bucket_age", reg.options().bucket_age},
      {"exclude", std::move(exclude)},
      {"fitted", reg.fitted()},
  };
}

inline FeatureRegistry registry_from_json(const nlohmann::json& doc) {
  FeatureRegistryOptions options;
  options.bucket_age = doc.at("bucket_age").get<bool>();
  for (const auto& name : doc.at("exclude")) {
    options.exclude.insert(name.get<std::string>());
  }
  std::vector<FeatureDescriptor> descriptors;
  for (const auto& f : doc.at("features")) {
    FeatureDescriptor d;
    d.name = f.at("name").get<std::string>();
    d.kind = f.at("kind").get<std::string>() == "temporal"
                 ? FeatureKind::temporal
                 : FeatureKind::static_demographic;
    d.mean = f.at("mean").get<double>();
    d.stddev = f.at("stddev").get<double>();
    d.median = f.at("median").get<double>();
    d.constant = f.at("constant").get<bool>();
    descriptors.push_back(std::move(d));
  }
  FeatureRegistry reg = FeatureRegistry::create(options);
  reg.set_descriptors(std::move(descriptors), options,
                      doc.at("fitted").get<bool>());
  return reg;
}

}  // namespace readmit::detail
