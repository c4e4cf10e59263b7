#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wellsim/schema.hpp"

namespace wellsim {

/// Time-varying part of an agent's state.
struct DynamicState {
  int season_index = 0;  // 0 Winter, 1 Spring, 2 Summer, 3 Autumn
  int months_since_last_test = 0;
  double peer_norm = 0.0;  // always in [0, 1]

  bool operator==(const DynamicState&) const = default;
};

struct AgentRecord {
  std::int64_t agent_id = 0;
  /// Positional values aligned with the population schema; nullopt = missing.
  std::vector<std::optional<double>> raw;
  DynamicState dynamic;
  std::optional<int> label_adoption;   // 0 / 1
  std::optional<int> label_frequency;  // 1..4, only when label_adoption == 1

  bool operator==(const AgentRecord&) const = default;
};

enum class Provenance { synthetic, ingested };

struct Population {
  FeatureSchema schema;
  std::vector<AgentRecord> agents;
  std::uint64_t seed = 0;
  Provenance provenance = Provenance::synthetic;
  /// Features dropped at ingestion because too many cells were missing.
  std::vector<std::string> excluded_features;
  /// Per-feature count of cells that were present but could not be parsed.
  std::map<std::string, int> unparseable_counts;
  std::vector<std::string> warnings;

  std::size_t size() const { return agents.size(); }
};

inline constexpr std::size_t kDefaultPopulationSize = 561;

/// Marginal for one feature. Continuous: clamp(mean + sd * N(0,1), lo, hi).
/// Ordinal / categorical: `weights` over levels (uniform when empty).
struct FeatureMarginal {
  double mean = 0.0;
  double sd = 1.0;
  std::optional<double> lo;
  std::optional<double> hi;
  std::vector<double> weights;
  double missing_rate = 0.0;
};

struct CalibrationSpec {
  /// Target fraction of agents labelled as testers; must lie in (0, 1).
  double target_rate = 0.05;
  /// Label-model coefficient = scale * published importance.
  double coefficient_scale = 12.0;
  /// Label-model coefficients per feature name (standardised units).
  /// Empty means "derive from top_feature_importances()".
  std::map<std::string, double> coefficients;
  std::map<std::string, FeatureMarginal> marginals;
  /// Mix over testing frequencies 1..4 among testers.
  std::vector<double> frequency_mix{0.05, 0.15, 0.50, 0.30};

  nlohmann::json to_json() const;
  static CalibrationSpec from_json(const nlohmann::json& j);
};

/// Label-model details of a synthesis, useful for auditing the calibration.
struct LabelModel {
  std::map<std::string, double> coefficients;
  double intercept = 0.0;
  double expected_rate = 0.0;
};

Population synthesize_population(std::size_t n, std::uint64_t seed,
                                 const CalibrationSpec& calibration = {},
                                 LabelModel* label_model = nullptr);

/// Fraction of agents with label_adoption == 1 among labelled agents.
double adoption_rate(const Population& pop);

/// Reads a survey CSV. Header names must belong to the schema (any order);
/// the optional columns agent_id, label_adoption, label_frequency,
/// months_since_last_test and peer_norm are recognised as well.
Population ingest_csv(const std::string& path, const FeatureSchema& schema = canonical_schema());
Population ingest_csv(std::istream& in, const FeatureSchema& schema = canonical_schema());

/// Writes the population in the same dialect ingest_csv reads.
void write_population_csv(std::ostream& out, const Population& pop);
void write_population_csv(const std::string& path, const Population& pop);
std::string population_to_csv(const Population& pop);

inline constexpr double kMaxMissingFraction = 0.30;

}  // namespace wellsim
