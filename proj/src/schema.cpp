#include "wellsim/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "wellsim/csv.hpp"
#include "wellsim/error.hpp"

namespace wellsim {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::continuous: return "continuous";
    case FeatureKind::ordinal: return "ordinal";
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::binary: return "binary";
  }
  return "continuous";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "continuous") return FeatureKind::continuous;
  if (s == "ordinal") return FeatureKind::ordinal;
  if (s == "categorical") return FeatureKind::categorical;
  if (s == "binary") return FeatureKind::binary;
  throw SchemaError("unknown feature kind '" + s + "'");
}

FeatureSchema::FeatureSchema(std::vector<FeatureDef> features, std::string version)
    : features_(std::move(features)), version_(std::move(version)) {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (!index_.emplace(f.name, i).second) throw SchemaError("duplicate feature '" + f.name + "'");
    if (f.kind == FeatureKind::categorical && f.categories.empty())
      throw SchemaError("categorical feature '" + f.name + "' has no categories");
    if (f.kind == FeatureKind::ordinal && f.max_level < f.min_level)
      throw SchemaError("ordinal feature '" + f.name + "' has an empty level range");
  }
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t FeatureSchema::require(const std::string& name) const {
  auto i = index_of(name);
  if (!i) throw SchemaError("unknown feature '" + name + "'");
  return *i;
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::optional<double> parse_number(const std::string& t) {
  double v = 0.0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::optional<double> FeatureSchema::parse_value(std::size_t feature, const std::string& text) const {
  const auto& f = features_.at(feature);
  std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  switch (f.kind) {
    case FeatureKind::continuous:
      return parse_number(t);
    case FeatureKind::ordinal: {
      auto v = parse_number(t);
      if (!v || *v != std::floor(*v) || *v < f.min_level || *v > f.max_level) return std::nullopt;
      return v;
    }
    case FeatureKind::binary: {
      std::string l = lower(t);
      if (l == "1" || l == "yes" || l == "true") return 1.0;
      if (l == "0" || l == "no" || l == "false") return 0.0;
      return std::nullopt;
    }
    case FeatureKind::categorical: {
      for (std::size_t c = 0; c < f.categories.size(); ++c)
        if (f.categories[c] == t) return static_cast<double>(c);
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::string FeatureSchema::format_value(std::size_t feature, double value) const {
  const auto& f = features_.at(feature);
  switch (f.kind) {
    case FeatureKind::categorical: return f.categories.at(static_cast<std::size_t>(value));
    case FeatureKind::ordinal:
    case FeatureKind::binary: return std::to_string(static_cast<long long>(std::llround(value)));
    case FeatureKind::continuous: return csv::format_double(value);
  }
  return {};
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features_) {
    nlohmann::json j{{"name", f.name}, {"kind", to_string(f.kind)}};
    if (!f.categories.empty()) j["categories"] = f.categories;
    if (f.unit) j["unit"] = *f.unit;
    if (f.kind == FeatureKind::ordinal) {
      j["min_level"] = f.min_level;
      j["max_level"] = f.max_level;
    }
    feats.push_back(std::move(j));
  }
  return {{"format_version", 1}, {"version", version_}, {"features", feats}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  std::vector<FeatureDef> defs;
  for (const auto& fj : j.at("features")) {
    FeatureDef f;
    f.name = fj.at("name").get<std::string>();
    f.kind = feature_kind_from_string(fj.at("kind").get<std::string>());
    if (fj.contains("categories")) f.categories = fj["categories"].get<std::vector<std::string>>();
    if (fj.contains("unit")) f.unit = fj["unit"].get<std::string>();
    f.min_level = fj.value("min_level", 0);
    f.max_level = fj.value("max_level", 0);
    defs.push_back(std::move(f));
  }
  return FeatureSchema(std::move(defs), j.value("version", std::string("custom")));
}

namespace {

FeatureDef cont(std::string name, std::string unit = {}) {
  FeatureDef f{std::move(name), FeatureKind::continuous, {}, std::nullopt, 0, 0};
  if (!unit.empty()) f.unit = std::move(unit);
  return f;
}
FeatureDef ord(std::string name, int lo, int hi) {
  return FeatureDef{std::move(name), FeatureKind::ordinal, {}, std::nullopt, lo, hi};
}
FeatureDef likert(std::string name) { return ord(std::move(name), 1, 5); }
FeatureDef bin(std::string name) {
  return FeatureDef{std::move(name), FeatureKind::binary, {}, std::nullopt, 0, 1};
}
FeatureDef cat(std::string name, std::vector<std::string> cats) {
  return FeatureDef{std::move(name), FeatureKind::categorical, std::move(cats), std::nullopt, 0, 0};
}

std::vector<FeatureDef> canonical_features() {
  return {
      // most influential attributes, rank order
      likert("information_seeking_behaviour"),
      ord("well_awareness", 0, kMaxAwarenessScore),
      bin("treatment_system"),
      likert("maintenance_confidence"),
      ord("total_barriers", 0, 8),
      likert("ewe_impact_consequences"),
      likert("climate_change_concern"),
      likert("ewe_impact_likelihood"),
      ord("income", 1, 6),
      cont("well_age", "years"),
      cont("well_depth", "m"),
      likert("flood_history_importance"),
      likert("ewe_risk_perception"),
      likert("ewe_impact_severity"),
      cont("tenure_with_well", "years"),
      cont("age", "years"),
      cont("residential_tenure", "years"),
      ord("well_status_awareness", 1, 3),
      ord("education", 1, 5),
      cat("province", {"Leinster", "Munster", "Connacht", "Ulster"}),
      // awareness components
      bin("awareness_well_age"),
      bin("awareness_well_depth"),
      ord("awareness_well_features", 0, 5),
      bin("awareness_treatment_use"),
      bin("awareness_previous_test"),
      ord("awareness_pathogens", 0, 3),
      ord("awareness_pathogen_sources", 0, 2),
      // household and well
      cat("gender", {"female", "male", "other"}),
      ord("household_size", 1, 8),
      bin("children_in_household"),
      cat("supply_type", {"dug", "drilled", "spring", "unknown"}),
      cat("well_use", {"domestic", "agricultural", "mixed"}),
      cat("wastewater_system", {"septic_tank", "public_sewer", "unknown"}),
      bin("gi_illness_history"),
      bin("farm_household"),
      bin("livestock_nearby"),
      cont("septic_tank_distance", "m"),
      bin("well_cap_present"),
      ord("well_casing_condition", 1, 3),
      cat("pump_location", {"in_well", "at_base", "remote"}),
      bin("buried_well"),
      bin("previous_contamination"),
      bin("boil_water_notice"),
      // attitudes and beliefs
      likert("risk_perception_general"),
      likert("risk_perception_health"),
      likert("groundwater_beliefs"),
      likert("attitude_testing_cost"),
      likert("attitude_responsibility"),
      likert("trust_local_authority"),
      likert("trust_epa"),
      likert("trust_hse"),
      likert("peer_advice_credence"),
      likert("descriptive_norm"),
      likert("injunctive_norm"),
      likert("media_exposure"),
      likert("perceived_test_cost"),
      likert("perceived_test_convenience"),
      bin("knows_test_lab"),
      likert("test_result_understanding"),
      likert("self_efficacy"),
      likert("response_efficacy"),
      likert("health_concern"),
      bin("taste_odour_issues"),
      bin("water_appearance_issues"),
      // weather and environment
      bin("flood_experience"),
      bin("drought_experience"),
      likert("ewe_frequency_perception"),
      likert("rainfall_concern"),
      likert("agricultural_runoff_concern"),
      likert("wastewater_concern"),
      // socio-economic and practice
      cat("employment_status", {"employed", "self_employed", "retired", "other"}),
      bin("home_ownership"),
      cont("property_age", "years"),
      cont("distance_to_neighbour_well", "m"),
      cont("land_area", "ha"),
      likert("bottled_water_use"),
      bin("water_filter_use"),
      bin("uv_treatment"),
      bin("softener"),
      bin("chlorination"),
      likert("maintenance_frequency"),
      bin("well_inspection_history"),
      bin("grant_awareness"),
      likert("regulation_support"),
      likert("free_testing_support"),
      ord("information_source_count", 0, 6),
      cat("preferred_channel", {"post", "email", "radio", "social_media", "in_person"}),
      bin("community_group_member"),
      ord("rurality", 1, 3),
      ord("climate_adaptation_actions", 0, 5),
  };
}

}  // namespace

const FeatureSchema& canonical_schema() {
  static const FeatureSchema schema(canonical_features(), "well-survey-1");
  return schema;
}

const std::vector<RankedFeature>& top_feature_importances() {
  static const std::vector<RankedFeature> ranked{
      {"information_seeking_behaviour", 0.14},
      {"well_awareness", 0.12},
      {"treatment_system", 0.11},
      {"maintenance_confidence", 0.11},
      {"total_barriers", 0.09},
      {"ewe_impact_consequences", 0.08},
      {"climate_change_concern", 0.08},
      {"ewe_impact_likelihood", 0.07},
      {"income", 0.06},
      {"well_age", 0.06},
      {"well_depth", 0.05},
      {"flood_history_importance", 0.05},
      {"ewe_risk_perception", 0.04},
      {"ewe_impact_severity", 0.04},
      {"tenure_with_well", 0.04},
      {"age", 0.04},
      {"residential_tenure", 0.04},
      {"well_status_awareness", 0.03},
      {"education", 0.03},
      {"province", 0.02},
  };
  return ranked;
}

}  // namespace wellsim
