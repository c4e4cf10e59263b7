#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "wellsim/error.hpp"
#include "wellsim/forest.hpp"

using namespace wellsim;

namespace {

Eigen::MatrixXd random_matrix(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = nd(rng);
  return X;
}

// Greedy exhaustive CART on squared error, written independently of the library.
struct OracleNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  std::unique_ptr<OracleNode> left, right;
};

double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

std::unique_ptr<OracleNode> oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& rows,
                                   int depth) {
  auto node = std::make_unique<OracleNode>();
  std::vector<double> ys;
  for (int r : rows) ys.push_back(y[r]);
  node->value = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  if (depth == 0 || rows.size() < 2) return node;
  const double parent = sse(ys);
  double best = 1e-12 * std::max(1.0, parent);
  for (int f = 0; f < X.cols(); ++f) {
    std::vector<double> vals;
    for (int r : rows) vals.push_back(X(r, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double t = 0.5 * (vals[k] + vals[k + 1]);
      std::vector<double> l, r;
      for (int row : rows) (X(row, f) <= t ? l : r).push_back(y[row]);
      const double gain = parent - sse(l) - sse(r);
      if (gain > best) {
        best = gain;
        node->leaf = false;
        node->feature = f;
        node->threshold = t;
      }
    }
  }
  if (node->leaf) return node;
  std::vector<int> lr, rr;
  for (int r : rows) (X(r, node->feature) <= node->threshold ? lr : rr).push_back(r);
  node->left = oracle(X, y, lr, depth - 1);
  node->right = oracle(X, y, rr, depth - 1);
  return node;
}

double oracle_predict(const OracleNode& n, const double* x) {
  if (n.leaf) return n.value;
  return oracle_predict(x[n.feature] <= n.threshold ? *n.left : *n.right, x);
}

}  // namespace

TEST_SUITE("forest") {
  TEST_CASE("small single trees match an exhaustive split oracle") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const int n = 10 + static_cast<int>(seed % 21), p = 1 + static_cast<int>(seed % 4);
      const Eigen::MatrixXd X = random_matrix(n, p, seed);
      const Eigen::VectorXd y = random_matrix(n, 1, seed + 1000).col(0);
      ForestParams fp;
      fp.max_depth = 2;
      fp.min_leaf = 1;
      fp.mtry = p;
      fp.bootstrap = false;
      std::vector<int> rows(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), 0);
      const Tree t = fit_tree(X, y, rows, fp, seed);
      const auto o = oracle(X, y, rows, 2);
      CHECK(t.depth() <= 2);
      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd x = X.row(i).transpose();
        CHECK(t.predict(x.data()) == doctest::Approx(oracle_predict(*o, x.data())).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("structural invariants") {
    const Eigen::MatrixXd X = random_matrix(200, 6, 1);
    const Eigen::VectorXd y = X.col(0) + 0.3 * random_matrix(200, 1, 2).col(0);
    ForestParams fp;
    fp.n_trees = 20;
    fp.seed = 5;
    const Forest f = fit_forest(X, y, fp);
    for (const auto& t : f.trees)
      for (const auto& nd : t.nodes) {
        CHECK(std::isfinite(nd.value));
        if (nd.is_leaf()) continue;
        REQUIRE(nd.left > 0);
        REQUIRE(nd.right > 0);
        CHECK(t.nodes[static_cast<std::size_t>(nd.left)].count + t.nodes[static_cast<std::size_t>(nd.right)].count ==
              nd.count);
      }
    double s = 0.0;
    for (double v : f.feature_importances) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0));
  }

  TEST_CASE("planted feature dominates importance") {
    const Eigen::MatrixXd X = random_matrix(300, 5, 9);
    const Eigen::VectorXd y = X.col(3);
    ForestParams fp;
    fp.n_trees = 50;
    fp.seed = 1;
    const Forest f = fit_forest(X, y, fp);
    for (int j = 0; j < 5; ++j)
      if (j != 3) CHECK(f.feature_importances[3] > 4.0 * f.feature_importances[static_cast<std::size_t>(j)]);
    // with every feature a candidate at every split the noise columns barely register
    fp.mtry = 5;
    CHECK(fit_forest(X, y, fp).feature_importances[3] > 0.9);
  }

  TEST_CASE("constant target and single row") {
    const Eigen::MatrixXd X = random_matrix(40, 3, 4);
    const Forest f = fit_forest(X, Eigen::VectorXd::Constant(40, 2.5), ForestParams{});
    for (double v : f.feature_importances) CHECK(v == 0.0);
    CHECK(f.predict(X).isApproxToConstant(2.5));
    CHECK_FALSE(f.warnings.empty());

    const Forest one = fit_forest(X.topRows(1), Eigen::VectorXd::Constant(1, -1.0), ForestParams{});
    for (const auto& t : one.trees) {
      CHECK(t.nodes.size() == 1);
      CHECK(t.nodes[0].value == -1.0);
    }
  }

  TEST_CASE("prediction is the mean of trees and ignores tree order") {
    const Eigen::MatrixXd X = random_matrix(100, 4, 6);
    const Eigen::VectorXd y = X.col(1).array().square();
    ForestParams fp;
    fp.n_trees = 15;
    Forest f = fit_forest(X, y, fp);
    const Eigen::VectorXd x = X.row(7).transpose();
    double mean = 0.0;
    for (const auto& t : f.trees) mean += t.predict(x.data());
    mean /= static_cast<double>(f.trees.size());
    CHECK(f.predict(x) == doctest::Approx(mean).epsilon(1e-12));
    Forest g = f;
    std::reverse(g.trees.begin(), g.trees.end());
    CHECK(g.predict(x) == doctest::Approx(f.predict(x)).epsilon(1e-12));

    Forest two;
    two.n_features = 1;
    Tree a, b;
    a.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 1.0, 1.0});
    b.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 3.0, 1.0});
    two.trees = {a, b};
    CHECK(predict(two, Eigen::VectorXd::Zero(1)) == 2.0);
    two.trees = {b};
    b.nodes[0].value = 3.5;
    two.trees = {b};
    CHECK(predict(two, Eigen::VectorXd::Zero(1)) == 3.5);
    CHECK_THROWS_AS(predict(two, Eigen::VectorXd::Zero(2)), DimensionError);
  }

  TEST_CASE("fit beats the constant predictor on a planted signal") {
    const Eigen::MatrixXd X = random_matrix(400, 5, 12);
    const Eigen::VectorXd noise = 0.5 * random_matrix(400, 1, 13).col(0);
    const Eigen::VectorXd y = 2.0 * X.col(0) - X.col(2) + noise;
    const Forest f = fit_forest(X, y, ForestParams{});
    const double fit_mse = (f.predict(X) - y).squaredNorm() / 400.0;
    const double const_mse = (y.array() - y.mean()).square().mean();
    CHECK(1.0 - fit_mse / const_mse > 0.9);
  }

  TEST_CASE("same seed gives the same forest, json round trip") {
    const Eigen::MatrixXd X = random_matrix(80, 4, 2);
    const Eigen::VectorXd y = X.col(0);
    ForestParams fp;
    fp.n_trees = 10;
    fp.seed = 77;
    const Forest a = fit_forest(X, y, fp), b = fit_forest(X, y, fp);
    CHECK(a.to_json() == b.to_json());
    const Forest c = Forest::from_json(a.to_json());
    CHECK(c.predict(X) == a.predict(X));
  }
}

TEST_SUITE("rfe") {
  TEST_CASE("folds partition the rows and stratify") {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(103);
    for (int i = 0; i < 103; i += 7) y[i] = 1.0;
    const auto folds = make_folds(y, 10, true, 3);
    REQUIRE(folds.size() == 10);
    std::set<int> seen;
    std::size_t total = 0;
    for (const auto& f : folds) {
      int pos = 0;
      for (int r : f) {
        seen.insert(r);
        pos += y[r] == 1.0;
      }
      total += f.size();
      CHECK(pos >= 1);
      CHECK(pos <= 2);
    }
    CHECK(total == 103);
    CHECK(seen.size() == 103);
  }

  TEST_CASE("p = 10 records the full set without elimination") {
    const Eigen::MatrixXd X = random_matrix(120, 10, 1);
    const Eigen::VectorXd y = X.col(0);
    RfeParams p;
    p.forest.n_trees = 10;
    p.folds = 4;
    const auto r = run_rfe(X, y, FeatureGroups::identity({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}), p);
    REQUIRE(r.selected_sets.size() == 1);
    CHECK(r.selected_sets.at(10).size() == 10);
    CHECK(r.cv_scores.at(10).mse.size() == 4);
    for (const auto& [name, rank] : r.ranking) CHECK(rank == 1);
  }

  TEST_CASE("recorded sets have the right sizes and fold counts") {
    const Eigen::MatrixXd X = random_matrix(150, 35, 8);
    Eigen::VectorXd y = (X.col(0) + X.col(1)).unaryExpr([](double v) { return v > 0.5 ? 1.0 : 0.0; });
    std::vector<std::string> names;
    for (int i = 0; i < 35; ++i) names.push_back("f" + std::to_string(i));
    RfeParams p;
    p.forest.n_trees = 15;
    p.folds = 5;
    const auto r = run_rfe(X, y, FeatureGroups::identity(names), p);
    CHECK(r.selected_sets.size() == 3);
    for (const auto& [k, set] : r.selected_sets) {
      CHECK(static_cast<int>(set.size()) == k);
      CHECK(r.cv_scores.at(k).mse.size() == 5);
      CHECK(r.cv_scores.at(k).accuracy.size() == 5);
      CHECK(r.holdout_mse.count(k) == 1);
    }
    const auto back = RfeResult::from_json(r.to_json());
    CHECK(back.selected_sets == r.selected_sets);
    CHECK(back.ranking == r.ranking);
  }
}
