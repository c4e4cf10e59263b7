#pragma once

// Brute-force Shapley values over all 2^p coalitions, for checking tree_shap.

#include <cmath>
#include <random>
#include <vector>

#include "wellsim/forest.hpp"

namespace wellsim::check {

// Value function: expected output with absent features marginalised by node counts.
inline double value_of(const Tree& t, int node, const Eigen::VectorXd& x, const std::vector<bool>& present) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) return n.value;
  if (present[static_cast<std::size_t>(n.feature)]) return value_of(t, x[n.feature] <= n.threshold ? n.left : n.right, x, present);
  const auto& l = t.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = t.nodes[static_cast<std::size_t>(n.right)];
  return (l.count * value_of(t, n.left, x, present) + r.count * value_of(t, n.right, x, present)) / (l.count + r.count);
}

// Shapley values by enumerating ordered coalitions via subsets.
inline std::vector<double> brute_force_shap(const Forest& f, const Eigen::VectorXd& x) {
  const int p = f.n_features;
  auto v = [&](unsigned mask) {
    std::vector<bool> present(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) present[static_cast<std::size_t>(j)] = mask >> j & 1U;
    double s = 0.0;
    for (const auto& t : f.trees) s += value_of(t, 0, x, present);
    return s / static_cast<double>(f.trees.size());
  };
  std::vector<double> fact(static_cast<std::size_t>(p) + 1, 1.0);
  for (int i = 1; i <= p; ++i) fact[static_cast<std::size_t>(i)] = fact[static_cast<std::size_t>(i) - 1] * i;
  std::vector<double> cache(1U << p);
  for (unsigned m = 0; m < (1U << p); ++m) cache[m] = v(m);
  std::vector<double> phi(static_cast<std::size_t>(p), 0.0);
  for (int i = 0; i < p; ++i)
    for (unsigned m = 0; m < (1U << p); ++m) {
      if (m >> i & 1U) continue;
      const int k = __builtin_popcount(m);
      phi[static_cast<std::size_t>(i)] += fact[static_cast<std::size_t>(k)] * fact[static_cast<std::size_t>(p - k - 1)] /
                                          fact[static_cast<std::size_t>(p)] * (cache[m | 1U << i] - cache[m]);
    }
  return phi;
}

inline Forest random_forest(std::mt19937_64& rng, int p, int depth, int trees) {
  std::normal_distribution<double> nd;
  const int n = 60;
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = std::round(nd(rng) * 4.0) / 4.0;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = X(i, 0) * X(i, p - 1) + nd(rng);
  ForestParams fp;
  fp.n_trees = trees;
  fp.max_depth = depth;
  fp.min_leaf = 2;
  fp.seed = rng();
  return fit_forest(X, y, fp);
}

}  // namespace wellsim::check
