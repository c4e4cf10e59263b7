#include "wellsim/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "wellsim/error.hpp"

namespace wellsim {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::optional<std::size_t> TransformParams::feature_index(const std::string& name) const {
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i].name == name) return i;
  return std::nullopt;
}

std::vector<int> TransformParams::columns_for(std::span<const std::string> names) const {
  std::vector<int> cols;
  for (const auto& name : names) {
    auto fi = feature_index(name);
    if (!fi) throw SchemaError("feature '" + name + "' is not part of the fitted transform");
    for (std::size_t c = 0; c < column_feature.size(); ++c)
      if (column_feature[c] == static_cast<int>(*fi)) cols.push_back(static_cast<int>(c));
  }
  return cols;
}

nlohmann::json TransformParams::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features) {
    feats.push_back({{"name", f.name},
                     {"kind", to_string(f.kind)},
                     {"median", f.median},
                     {"mean", f.mean},
                     {"stddev", f.stddev},
                     {"q1", f.q1},
                     {"q3", f.q3},
                     {"categories", f.categories},
                     {"missing_fraction", f.missing_fraction}});
  }
  return {{"format_version", 1}, {"features", feats}, {"dropped", dropped},
          {"columns", columns}, {"column_feature", column_feature}};
}

TransformParams TransformParams::from_json(const nlohmann::json& j) {
  TransformParams p;
  for (const auto& fj : j.at("features")) {
    FeatureTransform f;
    f.name = fj.at("name").get<std::string>();
    f.kind = feature_kind_from_string(fj.at("kind").get<std::string>());
    f.median = fj.at("median").get<double>();
    f.mean = fj.at("mean").get<double>();
    f.stddev = fj.at("stddev").get<double>();
    f.q1 = fj.value("q1", 0.0);
    f.q3 = fj.value("q3", 0.0);
    f.categories = fj.value("categories", std::vector<std::string>{});
    f.missing_fraction = fj.value("missing_fraction", 0.0);
    p.features.push_back(std::move(f));
  }
  p.dropped = j.value("dropped", std::vector<std::string>{});
  p.columns = j.at("columns").get<std::vector<std::string>>();
  p.column_feature = j.at("column_feature").get<std::vector<int>>();
  return p;
}

namespace {

double mode_of(const std::vector<double>& v) {
  std::map<double, int> counts;
  for (double x : v) ++counts[x];
  double best = v.front();
  int best_n = -1;
  for (const auto& [x, n] : counts)
    if (n > best_n) best = x, best_n = n;  // ties keep the smallest value
  return best;
}

}  // namespace

DesignMatrix fit_transform(const Population& pop) {
  if (pop.agents.empty()) throw std::invalid_argument("cannot fit a transform on an empty population");
  const auto n = static_cast<double>(pop.size());
  TransformParams params;
  std::vector<std::string> warnings;

  for (std::size_t f = 0; f < pop.schema.size(); ++f) {
    const FeatureDef& def = pop.schema[f];
    std::vector<double> observed;
    for (const auto& a : pop.agents)
      if (a.raw[f]) observed.push_back(*a.raw[f]);
    const double missing = 1.0 - static_cast<double>(observed.size()) / n;
    if (observed.empty() || missing > kMaxMissingFraction) {
      params.dropped.push_back(def.name);
      warnings.push_back("feature '" + def.name + "' dropped: " +
                         std::to_string(static_cast<int>(std::lround(missing * 100))) + "% missing");
      continue;
    }
    if (missing > 0.10)
      warnings.push_back("feature '" + def.name + "' imputed with " +
                         std::to_string(static_cast<int>(std::lround(missing * 100))) + "% missing");

    FeatureTransform t;
    t.name = def.name;
    t.kind = def.kind;
    t.missing_fraction = missing;
    t.categories = def.categories;
    const bool use_mode = def.kind == FeatureKind::categorical || def.kind == FeatureKind::binary;
    t.median = use_mode ? mode_of(observed) : quantile(observed, 0.5);
    if (def.kind == FeatureKind::continuous) {
      t.q1 = quantile(observed, 0.25);
      t.q3 = quantile(observed, 0.75);
    }
    if (t.standardized()) {
      double sum = 0.0;
      for (const auto& a : pop.agents) sum += a.raw[f].value_or(t.median);
      t.mean = sum / n;
      double ss = 0.0;
      for (const auto& a : pop.agents) {
        const double d = a.raw[f].value_or(t.median) - t.mean;
        ss += d * d;
      }
      t.stddev = std::sqrt(ss / n);
      if (t.stddev == 0.0)
        warnings.push_back("feature '" + def.name + "' has zero variance; standardised to zeros");
    } else {
      t.mean = 0.0;
      t.stddev = 1.0;
    }

    const int fi = static_cast<int>(params.features.size());
    if (def.kind == FeatureKind::categorical) {
      for (const auto& c : def.categories) {
        params.columns.push_back(def.name + "=" + c);
        params.column_feature.push_back(fi);
      }
    } else {
      params.columns.push_back(def.name);
      params.column_feature.push_back(fi);
    }
    params.features.push_back(std::move(t));
  }

  DesignMatrix dm = apply(params, pop);
  warnings.insert(warnings.end(), dm.warnings.begin(), dm.warnings.end());
  dm.warnings = std::move(warnings);
  return dm;
}

Eigen::VectorXd apply_row(const TransformParams& params, const FeatureSchema& schema,
                          const AgentRecord& agent, std::vector<std::string>* warnings) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.column_count()));
  Eigen::Index col = 0;
  for (const auto& t : params.features) {
    const std::size_t f = schema.require(t.name);
    const std::optional<double> raw = agent.raw.at(f);
    if (t.kind == FeatureKind::categorical) {
      std::size_t idx = 0;
      std::string label;
      if (raw) {
        const auto& cats = schema[f].categories;
        const auto ci = static_cast<std::size_t>(*raw);
        label = ci < cats.size() ? cats[ci] : std::string("#") + std::to_string(ci);
      } else {
        label = t.categories.at(static_cast<std::size_t>(t.median));
      }
      auto it = std::find(t.categories.begin(), t.categories.end(), label);
      if (it == t.categories.end()) {
        if (warnings)
          warnings->push_back("agent " + std::to_string(agent.agent_id) + ": unseen category '" + label +
                              "' for '" + t.name + "'");
      } else {
        idx = static_cast<std::size_t>(it - t.categories.begin());
        row[col + static_cast<Eigen::Index>(idx)] = 1.0;
      }
      col += static_cast<Eigen::Index>(t.categories.size());
      continue;
    }
    const double v = raw.value_or(t.median);
    if (t.standardized())
      row[col] = t.stddev > 0.0 ? (v - t.mean) / t.stddev : 0.0;
    else
      row[col] = v;
    ++col;
  }
  return row;
}

DesignMatrix apply(const TransformParams& params, const Population& pop) {
  for (const auto& t : params.features)
    if (!pop.schema.index_of(t.name))
      throw SchemaError("feature '" + t.name + "' is missing from the population");

  DesignMatrix dm;
  dm.columns = params.columns;
  dm.column_feature = params.column_feature;
  for (const auto& t : params.features) dm.feature_names.push_back(t.name);
  const auto n = static_cast<Eigen::Index>(pop.size());
  const auto p = static_cast<Eigen::Index>(params.column_count());
  dm.rows.resize(n, p);
  dm.flags.setConstant(n, p, false);
  for (Eigen::Index i = 0; i < n; ++i)
    dm.rows.row(i) = apply_row(params, pop.schema, pop.agents[static_cast<std::size_t>(i)], &dm.warnings).transpose();

  for (Eigen::Index c = 0; c < p; ++c) {
    const auto& t = params.features[static_cast<std::size_t>(params.column_feature[static_cast<std::size_t>(c)])];
    if (t.kind != FeatureKind::continuous) continue;
    const double iqr = t.q3 - t.q1;
    const double lo = t.q1 - 1.5 * iqr, hi = t.q3 + 1.5 * iqr;
    const std::size_t f = *pop.schema.index_of(t.name);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& raw = pop.agents[static_cast<std::size_t>(i)].raw[f];
      dm.flags(i, c) = raw && (*raw < lo || *raw > hi);
    }
  }
  dm.transform = params;
  return dm;
}

}  // namespace wellsim
