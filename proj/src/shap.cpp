#include "wellsim/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>

#include "wellsim/csv.hpp"
#include "wellsim/error.hpp"

namespace wellsim {

Eigen::VectorXd ShapMatrix::mean_abs() const {
  if (values.rows() == 0) return Eigen::VectorXd::Zero(values.cols());
  return values.cwiseAbs().colwise().mean().transpose();
}

namespace {

struct PathElem {
  int feature;
  double zero_frac;  // fraction of cover flowing down this path
  double one_frac;   // 1 when x follows this path, else 0
  double weight;
};

using Path = std::vector<PathElem>;

void extend(Path& m, double pz, double po, int pi) {
  const std::size_t l = m.size();
  m.push_back({pi, pz, po, l == 0 ? 1.0 : 0.0});
  for (std::size_t i = l; i-- > 0;) {
    m[i + 1].weight += po * m[i].weight * static_cast<double>(i + 1) / static_cast<double>(l + 1);
    m[i].weight = pz * m[i].weight * static_cast<double>(l - i) / static_cast<double>(l + 1);
  }
}

void unwind(Path& m, std::size_t i) {
  const std::size_t l = m.size() - 1;
  const double o = m[i].one_frac, z = m[i].zero_frac;
  double n = m[l].weight;
  for (std::size_t j = l; j-- > 0;) {
    if (o != 0.0) {
      const double t = m[j].weight;
      m[j].weight = n * static_cast<double>(l + 1) / (static_cast<double>(j + 1) * o);
      n = t - m[j].weight * z * static_cast<double>(l - j) / static_cast<double>(l + 1);
    } else {
      m[j].weight = m[j].weight * static_cast<double>(l + 1) / (z * static_cast<double>(l - j));
    }
  }
  for (std::size_t j = i; j < l; ++j) {
    m[j].feature = m[j + 1].feature;
    m[j].zero_frac = m[j + 1].zero_frac;
    m[j].one_frac = m[j + 1].one_frac;
  }
  m.pop_back();
}

double unwound_sum(const Path& m, std::size_t i) {
  Path copy = m;
  unwind(copy, i);
  double s = 0.0;
  for (const auto& e : copy) s += e.weight;
  return s;
}

void recurse(const Tree& tree, const double* x, double* phi, double scale, int j, Path m, double pz,
             double po, int pi) {
  extend(m, pz, po, pi);
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(j)];
  if (node.is_leaf()) {
    for (std::size_t i = 1; i < m.size(); ++i)
      phi[m[i].feature] += scale * unwound_sum(m, i) * (m[i].one_frac - m[i].zero_frac) * node.value;
    return;
  }
  const int hot = x[node.feature] <= node.threshold ? node.left : node.right;
  const int cold = hot == node.left ? node.right : node.left;
  double iz = 1.0, io = 1.0;
  for (std::size_t k = 1; k < m.size(); ++k) {
    if (m[k].feature == node.feature) {
      iz = m[k].zero_frac;
      io = m[k].one_frac;
      unwind(m, k);
      break;
    }
  }
  const double rj = node.count;
  const double rh = tree.nodes[static_cast<std::size_t>(hot)].count;
  const double rc = tree.nodes[static_cast<std::size_t>(cold)].count;
  recurse(tree, x, phi, scale, hot, m, iz * rh / rj, io, node.feature);
  recurse(tree, x, phi, scale, cold, m, iz * rc / rj, 0.0, node.feature);
}

double cond_exp(const Tree& t, const double* x, std::uint64_t subset, int j) {
  const TreeNode& n = t.nodes[static_cast<std::size_t>(j)];
  if (n.is_leaf()) return n.value;
  if (subset >> n.feature & 1ULL) return cond_exp(t, x, subset, x[n.feature] <= n.threshold ? n.left : n.right);
  const double cl = t.nodes[static_cast<std::size_t>(n.left)].count;
  const double cr = t.nodes[static_cast<std::size_t>(n.right)].count;
  return (cl * cond_exp(t, x, subset, n.left) + cr * cond_exp(t, x, subset, n.right)) / n.count;
}

std::vector<int> order_by_importance(const Eigen::VectorXd& mean_abs) {
  std::vector<int> order(static_cast<std::size_t>(mean_abs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean_abs[a] > mean_abs[b]; });
  return order;
}

}  // namespace

void tree_shap_single(const Tree& tree, const double* x, double* phi, double scale) {
  if (tree.nodes.empty() || tree.nodes[0].is_leaf()) return;
  Path m;
  m.reserve(64);
  recurse(tree, x, phi, scale, 0, std::move(m), 1.0, 1.0, -1);
}

double expected_value(const Tree& tree) {
  if (tree.nodes.empty()) return 0.0;
  return cond_exp(tree, nullptr, 0, 0);
}

double expected_value(const Forest& forest) {
  if (forest.trees.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : forest.trees) s += expected_value(t);
  return s / static_cast<double>(forest.trees.size());
}

ShapMatrix tree_shap(const Forest& forest, const Eigen::MatrixXd& X, std::vector<std::string> feature_names) {
  if (X.cols() != forest.n_features)
    throw DimensionError("SHAP input has " + std::to_string(X.cols()) + " columns, forest expects " +
                         std::to_string(forest.n_features));
  ShapMatrix out;
  out.base_value = expected_value(forest);
  out.values = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  if (feature_names.empty())
    for (Eigen::Index c = 0; c < X.cols(); ++c) feature_names.push_back("f" + std::to_string(c));
  out.feature_names = std::move(feature_names);
  const double scale = forest.trees.empty() ? 0.0 : 1.0 / static_cast<double>(forest.trees.size());
  std::vector<double> x(static_cast<std::size_t>(X.cols())), phi(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) x[static_cast<std::size_t>(c)] = X(i, c);
    std::fill(phi.begin(), phi.end(), 0.0);
    for (const auto& t : forest.trees) tree_shap_single(t, x.data(), phi.data(), scale);
    for (Eigen::Index c = 0; c < X.cols(); ++c) out.values(i, c) = phi[static_cast<std::size_t>(c)];
  }
  out.feature_order = order_by_importance(out.mean_abs());
  return out;
}

double conditional_expectation(const Forest& forest, const double* x, std::uint64_t subset) {
  if (forest.trees.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : forest.trees) s += cond_exp(t, x, subset, 0);
  return s / static_cast<double>(forest.trees.size());
}

std::vector<double> shap_oracle_exact(const Forest& forest, const Eigen::VectorXd& x) {
  const int p = forest.n_features;
  if (p > kMaxOracleFeatures)
    throw ConfigError("exact Shapley enumeration needs 2^p evaluations; p = " + std::to_string(p) +
                      " exceeds the limit of " + std::to_string(kMaxOracleFeatures) + ", use tree_shap instead");
  if (x.size() != p) throw DimensionError("oracle input has the wrong length");
  const std::uint64_t full = 1ULL << p;
  std::vector<double> v(full);
  for (std::uint64_t s = 0; s < full; ++s) v[s] = conditional_expectation(forest, x.data(), s);

  std::vector<double> fact(static_cast<std::size_t>(p) + 1, 1.0);
  for (int k = 1; k <= p; ++k) fact[static_cast<std::size_t>(k)] = fact[static_cast<std::size_t>(k - 1)] * k;
  std::vector<double> phi(static_cast<std::size_t>(p), 0.0);
  for (int i = 0; i < p; ++i) {
    const std::uint64_t bit = 1ULL << i;
    for (std::uint64_t s = 0; s < full; ++s) {
      if (s & bit) continue;
      const int k = std::popcount(s);
      const double w = fact[static_cast<std::size_t>(k)] * fact[static_cast<std::size_t>(p - k - 1)] /
                       fact[static_cast<std::size_t>(p)];
      phi[static_cast<std::size_t>(i)] += w * (v[s | bit] - v[s]);
    }
  }
  return phi;
}

ShapMatrix aggregate_groups(const ShapMatrix& shap, const FeatureGroups& groups) {
  if (static_cast<Eigen::Index>(groups.column_group.size()) != shap.values.cols())
    throw DimensionError("feature groups do not match the SHAP columns");
  ShapMatrix out;
  out.base_value = shap.base_value;
  out.feature_names = groups.names;
  out.values = Eigen::MatrixXd::Zero(shap.values.rows(), static_cast<Eigen::Index>(groups.names.size()));
  for (std::size_t c = 0; c < groups.column_group.size(); ++c)
    out.values.col(groups.column_group[c]) += shap.values.col(static_cast<Eigen::Index>(c));
  out.feature_order = order_by_importance(out.mean_abs());
  return out;
}

ShapSummary export_summary(const ShapMatrix& shap, int top_k, const Eigen::MatrixXd& feature_values,
                           const std::vector<std::int64_t>& agent_ids) {
  const auto p = static_cast<int>(shap.values.cols());
  if (top_k < 1 || top_k > p) throw ConfigError("top_k must lie in [1, " + std::to_string(p) + "]");
  const bool have_values = feature_values.size() > 0;
  if (have_values && (feature_values.rows() != shap.values.rows() || feature_values.cols() != shap.values.cols()))
    throw DimensionError("feature values do not match the SHAP matrix");

  std::vector<int> order = shap.feature_order;
  if (static_cast<int>(order.size()) != p) order = order_by_importance(shap.mean_abs());
  const Eigen::VectorXd imp = shap.mean_abs();

  ShapSummary s;
  const auto n = shap.values.rows();
  for (int r = 0; r < top_k; ++r) {
    const int j = order[static_cast<std::size_t>(r)];
    const std::string& name = shap.feature_names.at(static_cast<std::size_t>(j));
    s.importance.push_back({name, imp[j]});
    std::vector<double> col;
    if (have_values) {
      col.assign(feature_values.col(j).data(), feature_values.col(j).data() + n);
      std::sort(col.begin(), col.end());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      DotRow d;
      d.agent_id = i < static_cast<Eigen::Index>(agent_ids.size()) ? agent_ids[static_cast<std::size_t>(i)] : i + 1;
      d.feature = name;
      d.shap_value = shap.values(i, j);
      if (have_values) {
        const double v = feature_values(i, j);
        const auto below = std::lower_bound(col.begin(), col.end(), v) - col.begin();
        const auto upto = std::upper_bound(col.begin(), col.end(), v) - col.begin();
        d.feature_value = v;
        d.feature_percentile = 100.0 * (static_cast<double>(below) + 0.5 * static_cast<double>(upto - below)) /
                               static_cast<double>(n);
      }
      s.dots.push_back(std::move(d));
    }
  }
  return s;
}

void write_importance_csv(std::ostream& out, const ShapSummary& summary) {
  csv::write_row(out, {"rank", "feature", "mean_abs_shap"});
  int rank = 1;
  for (const auto& r : summary.importance)
    csv::write_row(out, {std::to_string(rank++), r.feature, csv::format_double(r.mean_abs_shap)});
}

void write_dots_csv(std::ostream& out, const ShapSummary& summary) {
  csv::write_row(out, {"agent_id", "feature", "shap_value", "feature_value", "feature_percentile"});
  for (const auto& d : summary.dots)
    csv::write_row(out, {std::to_string(d.agent_id), d.feature, csv::format_double(d.shap_value),
                         csv::format_double(d.feature_value), csv::format_double(d.feature_percentile)});
}

}  // namespace wellsim
