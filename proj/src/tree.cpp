#include <algorithm>
#include <cmath>
#include <numeric>

#include "wellsim/error.hpp"
#include "wellsim/forest.hpp"
#include "wellsim/rng.hpp"

namespace wellsim {

double Tree::predict(const double* x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& nd = nodes[static_cast<std::size_t>(i)];
    i = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int best = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const auto& nd = nodes[static_cast<std::size_t>(i)];
    if (!nd.is_leaf()) {
      stack.push_back({nd.left, d + 1});
      stack.push_back({nd.right, d + 1});
    }
  }
  return best;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  std::size_t n_left = 0;
};

struct Pending {
  int node;
  std::vector<int> rows;
  int depth;
};

}  // namespace

Tree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& rows,
              const ForestParams& params, std::uint64_t tree_seed, std::vector<double>* importance) {
  if (rows.empty()) throw std::invalid_argument("cannot grow a tree on zero rows");
  const int p = static_cast<int>(X.cols());
  const int mtry = std::clamp(params.mtry.value_or((p + 2) / 3), 1, std::max(p, 1));
  const std::size_t min_leaf = static_cast<std::size_t>(std::max(params.min_leaf, 1));
  Rng rng(tree_seed);

  Tree tree;
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, rows, 0});
  std::vector<int> feats(static_cast<std::size_t>(p));
  std::vector<std::pair<double, double>> order;

  while (!stack.empty()) {
    Pending job = std::move(stack.back());
    stack.pop_back();
    const auto& r = job.rows;
    const double n = static_cast<double>(r.size());
    double sum = 0.0, sumsq = 0.0;
    for (int i : r) {
      sum += y[i];
      sumsq += y[i] * y[i];
    }
    {
      TreeNode& nd = tree.nodes[static_cast<std::size_t>(job.node)];
      nd.value = sum / n;
      nd.count = n;
    }
    const double parent_sse = sumsq - sum * sum / n;
    const bool depth_ok = !params.max_depth || job.depth < *params.max_depth;
    if (!depth_ok || r.size() < 2 * min_leaf || parent_sse <= 1e-12 * std::max(1.0, sumsq) || p == 0) continue;

    // Sample mtry candidate features, scanned in ascending index order.
    std::iota(feats.begin(), feats.end(), 0);
    for (int k = 0; k < mtry; ++k) {
      std::uniform_int_distribution<int> d(k, p - 1);
      std::swap(feats[static_cast<std::size_t>(k)], feats[static_cast<std::size_t>(d(rng))]);
    }
    std::vector<int> cand(feats.begin(), feats.begin() + mtry);
    std::sort(cand.begin(), cand.end());

    Split best;
    const double base = sum * sum / n;
    for (int f : cand) {
      order.clear();
      for (int i : r) order.emplace_back(X(i, f), y[i]);
      std::sort(order.begin(), order.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double left = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left += order[k].second;
        const std::size_t nl = k + 1;
        if (order[k].first == order[k + 1].first) continue;
        if (nl < min_leaf || order.size() - nl < min_leaf) continue;
        const double nr = n - static_cast<double>(nl);
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / nr - base;
        if (gain > best.gain + 1e-12 * std::abs(best.gain) && gain > 1e-12 * std::max(1.0, parent_sse)) {
          best.feature = f;
          best.threshold = 0.5 * (order[k].first + order[k + 1].first);
          best.gain = gain;
          best.n_left = nl;
        }
      }
    }
    if (best.feature < 0) continue;

    std::vector<int> lrows, rrows;
    for (int i : r) (X(i, best.feature) <= best.threshold ? lrows : rrows).push_back(i);
    const int li = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& nd = tree.nodes[static_cast<std::size_t>(job.node)];
    nd.feature = best.feature;
    nd.threshold = best.threshold;
    nd.left = li;
    nd.right = li + 1;
    if (importance) (*importance)[static_cast<std::size_t>(best.feature)] += best.gain;
    // Right first so the left subtree is expanded first.
    stack.push_back({li + 1, std::move(rrows), job.depth + 1});
    stack.push_back({li, std::move(lrows), job.depth + 1});
  }
  return tree;
}

}  // namespace wellsim
