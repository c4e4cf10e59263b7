#include "wellsim/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "wellsim/csv.hpp"
#include "wellsim/error.hpp"
#include "wellsim/rng.hpp"

namespace wellsim {

nlohmann::json CalibrationSpec::to_json() const {
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [name, fm] : marginals) {
    nlohmann::json j{{"mean", fm.mean}, {"sd", fm.sd}, {"weights", fm.weights},
                     {"missing_rate", fm.missing_rate}};
    if (fm.lo) j["lo"] = *fm.lo;
    if (fm.hi) j["hi"] = *fm.hi;
    m[name] = std::move(j);
  }
  return {{"target_rate", target_rate},
          {"coefficient_scale", coefficient_scale},
          {"coefficients", coefficients},
          {"marginals", m},
          {"frequency_mix", frequency_mix}};
}

CalibrationSpec CalibrationSpec::from_json(const nlohmann::json& j) {
  CalibrationSpec c;
  c.target_rate = j.value("target_rate", c.target_rate);
  c.coefficient_scale = j.value("coefficient_scale", c.coefficient_scale);
  if (j.contains("coefficients")) c.coefficients = j["coefficients"].get<std::map<std::string, double>>();
  if (j.contains("frequency_mix")) c.frequency_mix = j["frequency_mix"].get<std::vector<double>>();
  if (j.contains("marginals")) {
    for (const auto& [name, mj] : j["marginals"].items()) {
      FeatureMarginal fm;
      fm.mean = mj.value("mean", 0.0);
      fm.sd = mj.value("sd", 1.0);
      if (mj.contains("lo")) fm.lo = mj["lo"].get<double>();
      if (mj.contains("hi")) fm.hi = mj["hi"].get<double>();
      if (mj.contains("weights")) fm.weights = mj["weights"].get<std::vector<double>>();
      fm.missing_rate = mj.value("missing_rate", 0.0);
      c.marginals[name] = fm;
    }
  }
  return c;
}

namespace {

// Substream indices; feature streams use their schema position.
constexpr std::uint64_t kAwarenessStream = 1000;
constexpr std::uint64_t kMissingStream = 2000;
constexpr std::uint64_t kLabelStream = 3000;
constexpr std::uint64_t kDynamicStream = 4000;

const std::vector<std::pair<AwarenessDomain, const char*>>& awareness_columns() {
  static const std::vector<std::pair<AwarenessDomain, const char*>> cols{
      {AwarenessDomain::well_age, "awareness_well_age"},
      {AwarenessDomain::well_depth, "awareness_well_depth"},
      {AwarenessDomain::well_features, "awareness_well_features"},
      {AwarenessDomain::treatment_use, "awareness_treatment_use"},
      {AwarenessDomain::previous_test, "awareness_previous_test"},
      {AwarenessDomain::relevant_pathogens, "awareness_pathogens"},
      {AwarenessDomain::pathogen_sources, "awareness_pathogen_sources"},
  };
  return cols;
}

int draw_index(const std::vector<double>& weights, std::size_t levels, Rng& rng) {
  if (weights.empty()) {
    std::uniform_int_distribution<int> d(0, static_cast<int>(levels) - 1);
    return d(rng);
  }
  if (weights.size() != levels) throw ConfigError("marginal weights do not match the level count");
  std::discrete_distribution<int> d(weights.begin(), weights.end());
  return d(rng);
}

double sample_value(const FeatureDef& f, const FeatureMarginal& m, Rng& rng) {
  switch (f.kind) {
    case FeatureKind::continuous: {
      std::normal_distribution<double> nd(0.0, 1.0);
      double v = m.mean + m.sd * nd(rng);
      if (m.lo) v = std::max(v, *m.lo);
      if (m.hi) v = std::min(v, *m.hi);
      return v;
    }
    case FeatureKind::ordinal:
      return f.min_level + draw_index(m.weights, static_cast<std::size_t>(f.max_level - f.min_level + 1), rng);
    case FeatureKind::binary:
      return draw_index(m.weights, 2, rng);
    case FeatureKind::categorical:
      return draw_index(m.weights, f.categories.size(), rng);
  }
  return 0.0;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Population synthesize_population(std::size_t n, std::uint64_t seed, const CalibrationSpec& calibration,
                                 LabelModel* label_model) {
  if (n == 0) throw ConfigError("population size must be at least 1");
  if (!(calibration.target_rate > 0.0 && calibration.target_rate < 1.0))
    throw ConfigError("calibration target rate must lie strictly between 0 and 1");
  if (calibration.frequency_mix.size() != 4) throw ConfigError("frequency_mix needs four weights");

  const FeatureSchema& schema = canonical_schema();
  for (const auto& [name, fm] : calibration.marginals) {
    schema.require(name);
    if (fm.missing_rate < 0.0 || fm.missing_rate >= 1.0)
      throw ConfigError("missing_rate for '" + name + "' must lie in [0, 1)");
  }

  Population pop;
  pop.schema = schema;
  pop.seed = seed;
  pop.provenance = Provenance::synthetic;
  pop.agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    pop.agents[i].agent_id = static_cast<std::int64_t>(i + 1);
    pop.agents[i].raw.assign(schema.size(), std::nullopt);
  }

  const FeatureMarginal neutral{};
  for (std::size_t f = 0; f < schema.size(); ++f) {
    auto it = calibration.marginals.find(schema[f].name);
    const FeatureMarginal& m = it == calibration.marginals.end() ? neutral : it->second;
    Rng rng = make_rng(seed, f);
    for (auto& a : pop.agents) a.raw[f] = sample_value(schema[f], m, rng);
  }

  // Awareness: sample a response per domain and score it.
  {
    Rng rng = make_rng(seed, kAwarenessStream);
    const std::size_t total_col = schema.require("well_awareness");
    for (auto& a : pop.agents) {
      int total = 0;
      for (const auto& [domain, col] : awareness_columns()) {
        const auto& cats = response_categories(domain);
        std::uniform_int_distribution<std::size_t> d(0, cats.size() - 1);
        int pts = score_domain(domain, cats[d(rng)]);
        a.raw[schema.require(col)] = pts;
        total += pts;
      }
      a.raw[total_col] = total;
    }
  }

  // Labels from a logistic model over standardised features.
  std::map<std::string, double> coefs = calibration.coefficients;
  if (coefs.empty())
    for (const auto& r : top_feature_importances()) coefs[r.name] = calibration.coefficient_scale * r.importance;

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& [name, c] : coefs) {
    const std::size_t f = schema.require(name);
    double sum = 0.0;
    for (const auto& a : pop.agents) sum += *a.raw[f];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& a : pop.agents) ss += (*a.raw[f] - mean) * (*a.raw[f] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) eta[static_cast<Eigen::Index>(i)] += c * (*pop.agents[i].raw[f] - mean) / sd;
  }

  auto mean_rate = [&](double b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) s += logistic(eta[i] + b);
    return s / static_cast<double>(n);
  };
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (mean_rate(mid) < calibration.target_rate ? lo : hi) = mid;
  }
  const double intercept = 0.5 * (lo + hi);
  const double expected = mean_rate(intercept);
  if (std::abs(expected - calibration.target_rate) > 0.01)
    throw ConfigError("calibration target rate is not reachable with this label model");

  {
    Rng rng = make_rng(seed, kLabelStream);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::discrete_distribution<int> freq(calibration.frequency_mix.begin(), calibration.frequency_mix.end());
    for (std::size_t i = 0; i < n; ++i) {
      auto& a = pop.agents[i];
      const double p = logistic(eta[static_cast<Eigen::Index>(i)] + intercept);
      a.label_adoption = u(rng) < p ? 1 : 0;
      int lf = freq(rng) + 1;
      if (*a.label_adoption == 1) a.label_frequency = lf;
    }
  }

  {
    Rng rng = make_rng(seed, kDynamicStream);
    std::uniform_int_distribution<int> months(0, 11);
    for (auto& a : pop.agents) {
      int m = months(rng);
      a.dynamic.season_index = 0;
      a.dynamic.months_since_last_test = a.label_adoption == 1 ? m : 24;
      a.dynamic.peer_norm = 0.0;
    }
  }

  // Missingness last so it never perturbs the value streams.
  for (std::size_t f = 0; f < schema.size(); ++f) {
    auto it = calibration.marginals.find(schema[f].name);
    if (it == calibration.marginals.end() || it->second.missing_rate <= 0.0) continue;
    Rng rng = make_rng(seed, kMissingStream + f);
    std::bernoulli_distribution miss(it->second.missing_rate);
    for (auto& a : pop.agents)
      if (miss(rng)) a.raw[f].reset();
  }

  if (label_model) {
    label_model->coefficients = coefs;
    label_model->intercept = intercept;
    label_model->expected_rate = expected;
  }
  return pop;
}

double adoption_rate(const Population& pop) {
  int labelled = 0, positive = 0;
  for (const auto& a : pop.agents) {
    if (!a.label_adoption) continue;
    ++labelled;
    positive += *a.label_adoption;
  }
  return labelled ? static_cast<double>(positive) / labelled : 0.0;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

const std::vector<std::string> kMetaColumns{"agent_id", "label_adoption", "label_frequency",
                                            "months_since_last_test", "peer_norm"};

std::optional<long long> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

Population ingest_csv(std::istream& in, const FeatureSchema& schema) {
  auto rows = csv::read(in);
  if (rows.empty()) throw SchemaError("CSV has no header row");
  const auto& header = rows.front();

  std::map<std::string, std::size_t> col_of;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    bool meta = std::find(kMetaColumns.begin(), kMetaColumns.end(), name) != kMetaColumns.end();
    if (!meta && !schema.index_of(name)) throw SchemaError("unknown column '" + name + "'");
    if (!col_of.emplace(name, c).second) throw SchemaError("duplicate column '" + name + "'");
  }
  for (const auto& f : schema.features())
    if (!col_of.count(f.name)) throw SchemaError("missing required column '" + f.name + "'");

  const std::size_t n = rows.size() - 1;
  Population pop;
  pop.provenance = Provenance::ingested;

  // Parse every schema feature, then decide which survive.
  std::vector<std::vector<std::optional<double>>> values(schema.size(), std::vector<std::optional<double>>(n));
  std::vector<std::string> kept_names;
  std::vector<FeatureDef> kept;
  std::vector<std::size_t> kept_src;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const std::size_t c = col_of.at(schema[f].name);
    int missing = 0, bad = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto& row = rows[r + 1];
      const std::string cell = c < row.size() ? row[c] : std::string();
      if (cell.find_first_not_of(" \t") == std::string::npos) {
        ++missing;
        continue;
      }
      auto v = schema.parse_value(f, cell);
      if (!v) ++bad;
      values[f][r] = v;
    }
    if (bad > 0) {
      pop.unparseable_counts[schema[f].name] = bad;
      pop.warnings.push_back(std::to_string(bad) + " unparseable value(s) in '" + schema[f].name +
                             "' treated as missing");
    }
    const double frac = n ? static_cast<double>(missing + bad) / static_cast<double>(n) : 0.0;
    if (frac > kMaxMissingFraction) {
      pop.excluded_features.push_back(schema[f].name);
      pop.warnings.push_back("feature '" + schema[f].name + "' excluded: " +
                             std::to_string(static_cast<int>(std::lround(frac * 100))) +
                             "% of values missing or unparseable");
      continue;
    }
    kept.push_back(schema[f]);
    kept_src.push_back(f);
  }
  pop.schema = FeatureSchema(std::move(kept), schema.version());

  auto meta = [&](const std::string& name, const csv::Row& row) -> std::string {
    auto it = col_of.find(name);
    if (it == col_of.end() || it->second >= row.size()) return {};
    return row[it->second];
  };

  pop.agents.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = rows[r + 1];
    auto& a = pop.agents[r];
    a.agent_id = static_cast<std::int64_t>(r + 1);
    if (auto id = parse_int(meta("agent_id", row))) a.agent_id = *id;
    a.raw.resize(kept_src.size());
    for (std::size_t k = 0; k < kept_src.size(); ++k) a.raw[k] = values[kept_src[k]][r];

    const std::string where = " (row " + std::to_string(r + 2) + ")";
    const std::string la = meta("label_adoption", row);
    if (!la.empty()) {
      auto v = parse_int(la);
      if (!v || (*v != 0 && *v != 1)) throw SchemaError("label_adoption must be 0 or 1" + where);
      a.label_adoption = static_cast<int>(*v);
    }
    const std::string lf = meta("label_frequency", row);
    if (!lf.empty()) {
      auto v = parse_int(lf);
      if (!v || *v < 1 || *v > 4) throw SchemaError("label_frequency must be in 1..4" + where);
      if (a.label_adoption != 1) throw SchemaError("label_frequency given for a non-tester" + where);
      a.label_frequency = static_cast<int>(*v);
    }
    const std::string ms = meta("months_since_last_test", row);
    if (!ms.empty()) {
      auto v = parse_int(ms);
      if (!v || *v < 0) throw SchemaError("months_since_last_test must be a non-negative integer" + where);
      a.dynamic.months_since_last_test = static_cast<int>(*v);
    } else {
      a.dynamic.months_since_last_test = a.label_adoption == 1 ? 0 : 24;
    }
    const std::string pn = meta("peer_norm", row);
    if (!pn.empty()) {
      double v = 0.0;
      try {
        v = std::stod(pn);
      } catch (const std::exception&) {
        throw SchemaError("peer_norm is not a number" + where);
      }
      if (!(v >= 0.0 && v <= 1.0)) throw SchemaError("peer_norm must lie in [0, 1]" + where);
      a.dynamic.peer_norm = v;
    }
  }
  return pop;
}

Population ingest_csv(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return ingest_csv(in, schema);
}

void write_population_csv(std::ostream& out, const Population& pop) {
  csv::Row header{"agent_id"};
  for (const auto& f : pop.schema.features()) header.push_back(f.name);
  for (std::size_t i = 1; i < kMetaColumns.size(); ++i) header.push_back(kMetaColumns[i]);
  csv::write_row(out, header);
  for (const auto& a : pop.agents) {
    csv::Row row{std::to_string(a.agent_id)};
    for (std::size_t f = 0; f < pop.schema.size(); ++f)
      row.push_back(a.raw[f] ? pop.schema.format_value(f, *a.raw[f]) : std::string());
    row.push_back(a.label_adoption ? std::to_string(*a.label_adoption) : std::string());
    row.push_back(a.label_frequency ? std::to_string(*a.label_frequency) : std::string());
    row.push_back(std::to_string(a.dynamic.months_since_last_test));
    row.push_back(csv::format_double(a.dynamic.peer_norm));
    csv::write_row(out, row);
  }
}

void write_population_csv(const std::string& path, const Population& pop) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_population_csv(out, pop);
}

std::string population_to_csv(const Population& pop) {
  std::ostringstream os;
  write_population_csv(os, pop);
  return os.str();
}

}  // namespace wellsim
