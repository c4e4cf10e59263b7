#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace wellsim {

enum class Season { winter = 0, spring = 1, summer = 2, autumn = 3 };

inline constexpr int kSeasonCount = 4;
inline constexpr int kMonthsPerYear = 12;

std::string to_string(Season s);
Season season_of(int month);

struct SeasonProfile {
  Season season;
  std::vector<int> months;
  double rainfall_mm_per_month;
  double risk_weight;  // reward multiplier for testing in this season
};

/// Winter, Spring, Summer, Autumn in that order.
const std::array<SeasonProfile, kSeasonCount>& season_table();

enum class ScenarioFamily { adoption, annual };

std::string to_string(ScenarioFamily f);

struct ScenarioSpec {
  int id = 0;
  ScenarioFamily family = ScenarioFamily::adoption;
  std::string name;
  std::vector<double> weights;
  std::string description;

  double combined_weight() const;
  nlohmann::json to_json() const;
};

const std::vector<ScenarioSpec>& scenario_registry();
/// By id (1..14); throws ConfigError otherwise.
const ScenarioSpec& scenario_by_id(int id);
/// By case-insensitive name, or a numeric id string.
const ScenarioSpec& find_scenario(const std::string& key);

inline constexpr int kFrequencyActions = 4;

struct RewardSpec {
  double test = 1.0;
  double no_test = -1.0;
  /// Base reward per testing frequency a_f = 1..4.
  std::array<double, kFrequencyActions> frequency{0.5, 1.0, 2.5, 2.0};
  /// Tests per year implied by each frequency; scales the scenario bonus.
  std::array<double, kFrequencyActions> tests_per_year{3.0, 1.0, 1.0 / 3.0, 0.1};
  std::array<double, kSeasonCount> season_multiplier{0.6, 0.8, 0.4, 1.0};

  double multiplier(Season s) const { return season_multiplier[static_cast<int>(s)]; }
  nlohmann::json to_json() const;
  static RewardSpec from_json(const nlohmann::json& j);
};

const RewardSpec& default_rewards();

/// action 1 = test, 0 = no test.
double adoption_reward(int action, const ScenarioSpec* scenario, Season season,
                       const RewardSpec& spec = default_rewards());

/// a_f in 1..4.
double frequency_reward(int a_f, const ScenarioSpec* scenario, Season season,
                        const RewardSpec& spec = default_rewards());

nlohmann::json environment_to_json(const RewardSpec& spec = default_rewards());

}  // namespace wellsim
