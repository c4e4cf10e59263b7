#include <cmath>
#include <numeric>

#include "wellsim/error.hpp"
#include "wellsim/forest.hpp"
#include "wellsim/rng.hpp"

namespace wellsim {

nlohmann::json ForestParams::to_json() const {
  nlohmann::json j{{"n_trees", n_trees}, {"min_leaf", min_leaf}, {"bootstrap", bootstrap}, {"seed", seed}};
  j["max_depth"] = max_depth ? nlohmann::json(*max_depth) : nlohmann::json(nullptr);
  j["mtry"] = mtry ? nlohmann::json(*mtry) : nlohmann::json(nullptr);
  return j;
}

ForestParams ForestParams::from_json(const nlohmann::json& j) {
  ForestParams p;
  p.n_trees = j.value("n_trees", p.n_trees);
  p.min_leaf = j.value("min_leaf", p.min_leaf);
  p.bootstrap = j.value("bootstrap", p.bootstrap);
  p.seed = j.value("seed", p.seed);
  if (j.contains("max_depth") && !j["max_depth"].is_null()) p.max_depth = j["max_depth"].get<int>();
  if (j.contains("mtry") && !j["mtry"].is_null()) p.mtry = j["mtry"].get<int>();
  return p;
}

double Forest::predict(const double* x) const {
  if (trees.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return s / static_cast<double>(trees.size());
}

double Forest::predict(const Eigen::VectorXd& x) const { return wellsim::predict(*this, x); }

Eigen::VectorXd Forest::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != n_features)
    throw DimensionError("expected " + std::to_string(n_features) + " columns, got " + std::to_string(X.cols()));
  Eigen::VectorXd out(X.rows());
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) row[static_cast<std::size_t>(c)] = X(i, c);
    out[i] = predict(row.data());
  }
  return out;
}

double predict(const Forest& forest, const Eigen::VectorXd& x) {
  if (x.size() != forest.n_features)
    throw DimensionError("expected " + std::to_string(forest.n_features) + " features, got " +
                         std::to_string(x.size()));
  return forest.predict(x.data());
}

nlohmann::json Forest::to_json() const {
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.count});
    tj.push_back(std::move(nodes));
  }
  return {{"format_version", 1}, {"params", params.to_json()}, {"n_features", n_features},
          {"feature_importances", feature_importances}, {"trees", tj}};
}

Forest Forest::from_json(const nlohmann::json& j) {
  Forest f;
  f.params = ForestParams::from_json(j.at("params"));
  f.n_features = j.at("n_features").get<int>();
  f.feature_importances = j.at("feature_importances").get<std::vector<double>>();
  for (const auto& tj : j.at("trees")) {
    Tree t;
    for (const auto& nj : tj)
      t.nodes.push_back({nj[0].get<int>(), nj[1].get<double>(), nj[2].get<int>(), nj[3].get<int>(),
                         nj[4].get<double>(), nj[5].get<double>()});
    f.trees.push_back(std::move(t));
  }
  return f;
}

Forest fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestParams& params) {
  if (X.rows() < 1) throw std::invalid_argument("forest needs at least one training row");
  if (X.rows() != y.size()) throw DimensionError("X and y disagree on the number of rows");
  if (params.n_trees < 1) throw ConfigError("n_trees must be at least 1");
  if (!y.allFinite()) throw std::invalid_argument("targets must be finite");

  Forest forest;
  forest.params = params;
  forest.n_features = static_cast<int>(X.cols());
  std::vector<double> imp(static_cast<std::size_t>(X.cols()), 0.0);
  const int n = static_cast<int>(X.rows());
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (int t = 0; t < params.n_trees; ++t) {
    if (params.bootstrap) {
      Rng rng = make_rng(params.seed, 2 * static_cast<std::uint64_t>(t));
      std::uniform_int_distribution<int> d(0, n - 1);
      for (auto& r : rows) r = d(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.trees.push_back(
        fit_tree(X, y, rows, params, derive_seed(params.seed, 2 * static_cast<std::uint64_t>(t) + 1), &imp));
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0)
    for (auto& v : imp) v /= total;
  else
    forest.warnings.push_back("no split improved the fit (constant target?); importances are all zero");
  forest.feature_importances = std::move(imp);
  return forest;
}

}  // namespace wellsim
