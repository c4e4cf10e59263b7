#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "wellsim/error.hpp"
#include "wellsim/forest.hpp"
#include "wellsim/rng.hpp"

namespace wellsim {

FeatureGroups FeatureGroups::identity(const std::vector<std::string>& column_names) {
  FeatureGroups g;
  g.names = column_names;
  g.column_group.resize(column_names.size());
  std::iota(g.column_group.begin(), g.column_group.end(), 0);
  return g;
}

std::vector<int> FeatureGroups::columns_of(const std::vector<int>& groups) const {
  std::vector<int> cols;
  for (int g : groups)
    for (std::size_t c = 0; c < column_group.size(); ++c)
      if (column_group[c] == g) cols.push_back(static_cast<int>(c));
  return cols;
}

nlohmann::json RfeResult::to_json() const {
  nlohmann::json sets = nlohmann::json::object(), cv = nlohmann::json::object(),
                 hm = nlohmann::json::object(), ha = nlohmann::json::object();
  for (const auto& [k, v] : selected_sets) sets[std::to_string(k)] = v;
  for (const auto& [k, v] : cv_scores) cv[std::to_string(k)] = {{"mse", v.mse}, {"accuracy", v.accuracy}};
  for (const auto& [k, v] : holdout_mse) hm[std::to_string(k)] = v;
  for (const auto& [k, v] : holdout_accuracy) ha[std::to_string(k)] = v;
  return {{"format_version", 1},     {"feature_names", feature_names}, {"ranking", ranking},
          {"selected_sets", sets},   {"cv_scores", cv},                {"holdout_mse", hm},
          {"holdout_accuracy", ha}};
}

RfeResult RfeResult::from_json(const nlohmann::json& j) {
  RfeResult r;
  r.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  r.ranking = j.at("ranking").get<std::map<std::string, int>>();
  for (const auto& [k, v] : j.at("selected_sets").items()) r.selected_sets[std::stoi(k)] = v.get<std::vector<std::string>>();
  const auto empty = nlohmann::json::object();
  const auto& cv = j.contains("cv_scores") ? j["cv_scores"] : empty;
  const auto& hm = j.contains("holdout_mse") ? j["holdout_mse"] : empty;
  const auto& ha = j.contains("holdout_accuracy") ? j["holdout_accuracy"] : empty;
  for (const auto& [k, v] : cv.items())
    r.cv_scores[std::stoi(k)] = {v.at("mse").get<std::vector<double>>(), v.at("accuracy").get<std::vector<double>>()};
  for (const auto& [k, v] : hm.items()) r.holdout_mse[std::stoi(k)] = v.get<double>();
  for (const auto& [k, v] : ha.items())
    r.holdout_accuracy[std::stoi(k)] = v.get<double>();
  return r;
}

std::vector<std::vector<int>> make_folds(const Eigen::VectorXd& y, int folds, bool stratify, std::uint64_t seed) {
  const int n = static_cast<int>(y.size());
  if (folds < 2) throw ConfigError("need at least two folds");
  if (n < folds) throw ConfigError("fewer rows than folds");
  Rng rng(seed);
  std::map<double, std::vector<int>> strata;
  for (int i = 0; i < n; ++i) strata[stratify ? y[i] : 0.0].push_back(i);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
  std::size_t next = 0;
  for (auto& [label, rows] : strata) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (int r : rows) out[next++ % out.size()].push_back(r);
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

namespace {

Eigen::MatrixXd take(const Eigen::MatrixXd& X, const std::vector<int>& rows, const std::vector<int>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = X(rows[i], cols[c]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[rows[i]];
  return out;
}

std::pair<double, double> score(const Forest& f, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::VectorXd pred = f.predict(X);
  double mse = (pred - y).squaredNorm() / static_cast<double>(y.size());
  int hit = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) hit += (pred[i] >= 0.5) == (y[i] >= 0.5);
  return {mse, static_cast<double>(hit) / static_cast<double>(y.size())};
}

}  // namespace

RfeResult run_rfe(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FeatureGroups& groups,
                  const RfeParams& params) {
  const int p = static_cast<int>(groups.names.size());
  if (static_cast<Eigen::Index>(groups.column_group.size()) != X.cols())
    throw DimensionError("feature groups do not cover the design matrix columns");
  if (params.step < 1) throw ConfigError("RFE step must be positive");
  if (p < params.min_features)
    throw ConfigError("RFE needs at least " + std::to_string(params.min_features) + " features, got " +
                      std::to_string(p));
  if (params.evaluate && X.rows() < params.folds) throw ConfigError("fewer rows than CV folds");

  std::vector<int> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), 0);

  RfeResult res;
  res.feature_names = groups.names;
  std::vector<int> surviving(static_cast<std::size_t>(p));
  std::iota(surviving.begin(), surviving.end(), 0);
  std::vector<int> eliminated_round(static_cast<std::size_t>(p), 0);
  int round = 0;

  while (true) {
    const int k = static_cast<int>(surviving.size());
    ForestParams fp = params.forest;
    fp.seed = derive_seed(params.forest.seed, 100 + static_cast<std::uint64_t>(round));
    const auto cols = groups.columns_of(surviving);
    Forest f = fit_forest(take(X, all, cols), y, fp);
    std::map<int, double> imp;
    for (std::size_t c = 0; c < cols.size(); ++c)
      imp[groups.column_group[static_cast<std::size_t>(cols[c])]] += f.feature_importances[c];
    std::vector<int> order = surviving;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return imp[a] > imp[b]; });

    if (k % params.step == 0 && k >= params.min_features && k <= params.max_recorded) {
      auto& set = res.selected_sets[k];
      for (int g : order) set.push_back(groups.names[static_cast<std::size_t>(g)]);
    }
    if (k <= params.min_features) break;

    int target = ((k - 1) / params.step) * params.step;
    target = std::max(target, params.min_features);
    ++round;
    for (std::size_t i = static_cast<std::size_t>(target); i < order.size(); ++i)
      eliminated_round[static_cast<std::size_t>(order[i])] = round;
    order.resize(static_cast<std::size_t>(target));
    std::sort(order.begin(), order.end());
    surviving = order;
  }
  for (int g = 0; g < p; ++g) {
    const int r = eliminated_round[static_cast<std::size_t>(g)];
    res.ranking[groups.names[static_cast<std::size_t>(g)]] = r == 0 ? 1 : round - r + 2;
  }

  if (!params.evaluate) return res;
  for (const auto& [k, names] : res.selected_sets) {
    std::vector<int> gids;
    for (const auto& name : names)
      gids.push_back(static_cast<int>(std::find(groups.names.begin(), groups.names.end(), name) - groups.names.begin()));
    std::sort(gids.begin(), gids.end());
    const auto cols = groups.columns_of(gids);
    const Eigen::MatrixXd Xk = take(X, all, cols);
    std::vector<int> idx(cols.size());
    std::iota(idx.begin(), idx.end(), 0);

    auto folds = make_folds(y, params.folds, params.stratify, derive_seed(params.forest.seed, 200 + static_cast<std::uint64_t>(k)));
    FoldScores fs;
    for (std::size_t fi = 0; fi < folds.size(); ++fi) {
      std::vector<int> train;
      for (std::size_t fj = 0; fj < folds.size(); ++fj)
        if (fj != fi) train.insert(train.end(), folds[fj].begin(), folds[fj].end());
      std::sort(train.begin(), train.end());
      ForestParams fp = params.forest;
      fp.seed = derive_seed(params.forest.seed, 1000 * static_cast<std::uint64_t>(k) + fi);
      Forest f = fit_forest(take(Xk, train, idx), take(y, train), fp);
      auto [mse, acc] = score(f, take(Xk, folds[fi], idx), take(y, folds[fi]));
      fs.mse.push_back(mse);
      fs.accuracy.push_back(acc);
    }
    res.cv_scores[k] = std::move(fs);

    // 80/20 holdout: one fold of a five-way stratified split is held out.
    const int parts = std::max(2, static_cast<int>(std::lround(1.0 / params.holdout_fraction)));
    auto split = make_folds(y, parts, params.stratify, derive_seed(params.forest.seed, 300 + static_cast<std::uint64_t>(k)));
    std::vector<int> train;
    for (std::size_t fj = 1; fj < split.size(); ++fj) train.insert(train.end(), split[fj].begin(), split[fj].end());
    std::sort(train.begin(), train.end());
    ForestParams fp = params.forest;
    fp.seed = derive_seed(params.forest.seed, 400 + static_cast<std::uint64_t>(k));
    Forest f = fit_forest(take(Xk, train, idx), take(y, train), fp);
    auto [mse, acc] = score(f, take(Xk, split[0], idx), take(y, split[0]));
    res.holdout_mse[k] = mse;
    res.holdout_accuracy[k] = acc;
  }
  return res;
}

}  // namespace wellsim
