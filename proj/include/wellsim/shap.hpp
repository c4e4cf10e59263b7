#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wellsim/forest.hpp"

namespace wellsim {

struct ShapMatrix {
  double base_value = 0.0;
  Eigen::MatrixXd values;              // n x p
  std::vector<std::string> feature_names;
  std::vector<int> feature_order;      // by mean |value| descending, stable

  Eigen::VectorXd mean_abs() const;
};

/// Path-dependent TreeSHAP for a single tree; adds into `phi` (length p).
void tree_shap_single(const Tree& tree, const double* x, double* phi, double scale = 1.0);

/// Expected tree output under the training (node-count) distribution.
double expected_value(const Tree& tree);
double expected_value(const Forest& forest);

ShapMatrix tree_shap(const Forest& forest, const Eigen::MatrixXd& X,
                     std::vector<std::string> feature_names = {});

inline constexpr int kMaxOracleFeatures = 20;

/// Conditional expectation of the forest output given the features in
/// `subset` (bitmask over columns), absent features marginalised by
/// node-count weighted descent.
double conditional_expectation(const Forest& forest, const double* x, std::uint64_t subset);

/// Exact Shapley values by enumerating all 2^p coalitions.
std::vector<double> shap_oracle_exact(const Forest& forest, const Eigen::VectorXd& x);

/// Sums columns belonging to the same feature group.
ShapMatrix aggregate_groups(const ShapMatrix& shap, const FeatureGroups& groups);

struct ImportanceRow {
  std::string feature;
  double mean_abs_shap = 0.0;
};

struct DotRow {
  std::int64_t agent_id = 0;
  std::string feature;
  double shap_value = 0.0;
  double feature_value = 0.0;
  double feature_percentile = 0.0;
};

struct ShapSummary {
  std::vector<ImportanceRow> importance;
  std::vector<DotRow> dots;
};

/// `feature_values` (n x p) supplies the colour axis of a dot plot; pass an
/// empty matrix to leave it at zero.
ShapSummary export_summary(const ShapMatrix& shap, int top_k,
                           const Eigen::MatrixXd& feature_values = {},
                           const std::vector<std::int64_t>& agent_ids = {});

void write_importance_csv(std::ostream& out, const ShapSummary& summary);
void write_dots_csv(std::ostream& out, const ShapSummary& summary);

}  // namespace wellsim
