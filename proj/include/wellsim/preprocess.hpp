#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wellsim/population.hpp"

namespace wellsim {

/// Fitted parameters for one retained raw feature.
struct FeatureTransform {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  double median = 0.0;  // imputation value (mode index for categoricals)
  double mean = 0.0;
  double stddev = 1.0;  // population stddev; 0 marks a zero-variance column
  double q1 = 0.0;
  double q3 = 0.0;
  std::vector<std::string> categories;  // one-hot order for categoricals
  double missing_fraction = 0.0;

  bool standardized() const {
    return kind == FeatureKind::continuous || kind == FeatureKind::ordinal;
  }
};

struct TransformParams {
  std::vector<FeatureTransform> features;
  std::vector<std::string> dropped;
  std::vector<std::string> columns;   // derived column names
  std::vector<int> column_feature;    // derived column -> index into features

  std::size_t column_count() const { return columns.size(); }
  std::optional<std::size_t> feature_index(const std::string& name) const;
  /// Derived columns of the named raw features, in the order given.
  std::vector<int> columns_for(std::span<const std::string> names) const;

  nlohmann::json to_json() const;
  static TransformParams from_json(const nlohmann::json& j);
};

struct DesignMatrix {
  std::vector<std::string> columns;
  std::vector<int> column_feature;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd rows;                                        // n x p
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> flags;    // IQR outliers
  TransformParams transform;
  std::vector<std::string> warnings;

  Eigen::Index n() const { return rows.rows(); }
  Eigen::Index p() const { return rows.cols(); }
};

/// Linear-interpolation quantile of unsorted data (the "type 7" rule).
double quantile(std::vector<double> values, double q);

DesignMatrix fit_transform(const Population& pop);
DesignMatrix apply(const TransformParams& params, const Population& pop);

/// Transforms a single agent; `warnings` receives unseen-category notes.
Eigen::VectorXd apply_row(const TransformParams& params, const FeatureSchema& schema,
                          const AgentRecord& agent, std::vector<std::string>* warnings = nullptr);

}  // namespace wellsim
