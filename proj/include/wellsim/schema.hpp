#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace wellsim {

enum class FeatureKind { continuous, ordinal, categorical, binary };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

/// One survey attribute. Categorical values are stored as the index into
/// `categories`; ordinal values are integer levels in [min_level, max_level].
struct FeatureDef {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::string> categories;
  std::optional<std::string> unit;
  int min_level = 0;
  int max_level = 0;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<FeatureDef> features, std::string version);

  const std::vector<FeatureDef>& features() const { return features_; }
  const std::string& version() const { return version_; }
  std::size_t size() const { return features_.size(); }
  const FeatureDef& operator[](std::size_t i) const { return features_[i]; }

  std::optional<std::size_t> index_of(const std::string& name) const;
  /// Throws SchemaError naming the feature when absent.
  std::size_t require(const std::string& name) const;

  /// Parses a cell according to the feature kind; nullopt when unparseable.
  std::optional<double> parse_value(std::size_t feature, const std::string& text) const;
  std::string format_value(std::size_t feature, double value) const;

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);

 private:
  std::vector<FeatureDef> features_;
  std::string version_;
  std::map<std::string, std::size_t> index_;
};

/// The 90-attribute well-user survey schema.
const FeatureSchema& canonical_schema();

/// The twenty most influential attributes with their published mean |SHAP|
/// importances, in rank order. These drive the synthetic label model.
struct RankedFeature {
  std::string name;
  double importance;
};
const std::vector<RankedFeature>& top_feature_importances();

// ---------------------------------------------------------------------------
// Awareness scoring

enum class AwarenessDomain {
  well_age,
  well_depth,
  well_features,
  treatment_use,
  previous_test,
  relevant_pathogens,
  pathogen_sources,
};

std::string to_string(AwarenessDomain d);
AwarenessDomain awareness_domain_from_string(const std::string& s);
const std::vector<AwarenessDomain>& all_awareness_domains();

/// Recognised response categories per domain. Count-style domains
/// (well_features, relevant_pathogens, pathogen_sources) accept
/// "aware-of-N" with N in [0, max_count].
const std::vector<std::string>& response_categories(AwarenessDomain d);
int max_count(AwarenessDomain d);
int max_points(AwarenessDomain d);

inline constexpr int kMaxAwarenessScore = 14;

struct AwarenessScore {
  std::map<std::string, int> components;
  int total = 0;
};

/// Keys and values are domain / response names as strings so survey rows can
/// be passed straight through; unknown domain or response -> SchemaError.
AwarenessScore score_awareness(const std::map<std::string, std::string>& answers);
int score_domain(AwarenessDomain domain, const std::string& response);

}  // namespace wellsim
