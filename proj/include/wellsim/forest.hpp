#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace wellsim {

/// Flat CART node. Leaves have feature == -1. Samples with
/// x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double count = 0.0;  // training samples reaching the node (bootstrap multiplicity)

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const double* x) const;
  int depth() const;
};

struct ForestParams {
  int n_trees = 100;
  std::optional<int> max_depth;  // nullopt = unlimited
  int min_leaf = 5;
  std::optional<int> mtry;       // nullopt = ceil(p / 3)
  bool bootstrap = true;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ForestParams from_json(const nlohmann::json& j);
};

struct Forest {
  std::vector<Tree> trees;
  std::vector<double> feature_importances;
  int n_features = 0;
  ForestParams params;
  std::vector<std::string> warnings;

  double predict(const double* x) const;
  double predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

  nlohmann::json to_json() const;
  static Forest from_json(const nlohmann::json& j);
};

/// Grows one regression tree on the given (possibly repeated) row indices.
Tree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& rows,
              const ForestParams& params, std::uint64_t tree_seed,
              std::vector<double>* importance = nullptr);

Forest fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestParams& params);

/// Throws DimensionError when x has the wrong length.
double predict(const Forest& forest, const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Recursive feature elimination

/// Columns grouped into named features (one-hot blocks share a group).
struct FeatureGroups {
  std::vector<std::string> names;
  std::vector<int> column_group;

  static FeatureGroups identity(const std::vector<std::string>& column_names);
  std::vector<int> columns_of(const std::vector<int>& groups) const;
};

struct RfeParams {
  int step = 10;           // sets are recorded at every multiple of `step`
  int min_features = 10;
  int max_recorded = 90;
  int folds = 10;
  double holdout_fraction = 0.2;
  bool stratify = true;    // stratify folds on y (binary targets)
  bool evaluate = true;    // run CV and holdout scoring for every recorded k
  ForestParams forest;
};

struct FoldScores {
  std::vector<double> mse;
  std::vector<double> accuracy;  // thresholded forest output at 0.5
};

struct RfeResult {
  std::vector<std::string> feature_names;
  std::map<std::string, int> ranking;                      // 1 = kept to the end
  std::map<int, std::vector<std::string>> selected_sets;   // k -> ordered by importance
  std::map<int, FoldScores> cv_scores;
  std::map<int, double> holdout_mse;
  std::map<int, double> holdout_accuracy;

  nlohmann::json to_json() const;
  static RfeResult from_json(const nlohmann::json& j);
};

/// Row partition into `folds` disjoint folds; stratified by y when asked.
std::vector<std::vector<int>> make_folds(const Eigen::VectorXd& y, int folds, bool stratify,
                                         std::uint64_t seed);

RfeResult run_rfe(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FeatureGroups& groups,
                  const RfeParams& params);

}  // namespace wellsim
