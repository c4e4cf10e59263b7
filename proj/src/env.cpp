#include "wellsim/env.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "wellsim/error.hpp"

namespace wellsim {

std::string to_string(Season s) {
  switch (s) {
    case Season::winter: return "Winter";
    case Season::spring: return "Spring";
    case Season::summer: return "Summer";
    case Season::autumn: return "Autumn";
  }
  return "Winter";
}

Season season_of(int month) {
  if (month < 1 || month > 12) throw std::out_of_range("month must be in 1..12, got " + std::to_string(month));
  if (month == 12 || month <= 2) return Season::winter;
  if (month <= 5) return Season::spring;
  if (month <= 8) return Season::summer;
  return Season::autumn;
}

const std::array<SeasonProfile, kSeasonCount>& season_table() {
  static const std::array<SeasonProfile, kSeasonCount> table{{
      {Season::winter, {12, 1, 2}, 130.0, 0.6},
      {Season::spring, {3, 4, 5}, 100.0, 0.8},
      {Season::summer, {6, 7, 8}, 80.0, 0.4},
      {Season::autumn, {9, 10, 11}, 130.0, 1.0},
  }};
  return table;
}

std::string to_string(ScenarioFamily f) { return f == ScenarioFamily::adoption ? "adoption" : "annual"; }

double ScenarioSpec::combined_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

nlohmann::json ScenarioSpec::to_json() const {
  return {{"id", id},           {"family", to_string(family)},          {"name", name},
          {"weights", weights}, {"combined_weight", combined_weight()}, {"description", description}};
}

const std::vector<ScenarioSpec>& scenario_registry() {
  using F = ScenarioFamily;
  static const std::vector<ScenarioSpec> reg{
      {1, F::adoption, "Incentivised well testing", {0.4}, "Subsidised testing lowers the cost of a test."},
      {2, F::adoption, "Free well testing", {0.9}, "Tests are offered at no cost to the household."},
      {3, F::adoption, "Household health risk messaging", {0.3},
       "Health-risk communication built around local case studies."},
      {4, F::adoption, "Domestic wastewater treatment system messaging", {0.2},
       "Communication on contamination from septic systems."},
      {5, F::adoption, "Implementation of information campaign", {0.4},
       "More information on testing and contamination risk."},
      {6, F::adoption, "Adjusting peer influence", {0.4}, "Shifts in community norms and trust in peer advice."},
      {7, F::adoption, "Regulation", {0.7}, "Stricter inspection and property-transfer testing rules."},
      {8, F::adoption, "Free well testing + intensive information campaign", {0.9, 0.4},
       "Free tests paired with a sustained risk campaign."},
      {9, F::adoption, "Free well testing + regulation", {0.9, 0.7}, "Free tests paired with regulatory change."},
      {10, F::adoption, "Gender-focused messaging", {0.4}, "Messages tailored to women and men separately."},
      {11, F::annual, "Messaging about rainfall impacts", {0.2},
       "Links heavy rain to supply contamination, favouring yearly tests."},
      {12, F::annual, "Index of test result", {0.2}, "A positive result from a previous test is shared."},
      {13, F::annual, "Messaging about regular maintenance", {0.2},
       "Frames testing as routine well upkeep."},
      {14, F::annual, "Implementation of information campaign (annual testing)", {0.4},
       "More information on testing aimed at yearly testing."},
  };
  return reg;
}

const ScenarioSpec& scenario_by_id(int id) {
  const auto& reg = scenario_registry();
  if (id < 1 || id > static_cast<int>(reg.size()))
    throw ConfigError("unknown scenario id " + std::to_string(id) + " (valid: 1..14)");
  return reg[static_cast<std::size_t>(id - 1)];
}

namespace {
std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}
}  // namespace

const ScenarioSpec& find_scenario(const std::string& key) {
  if (!key.empty() && std::all_of(key.begin(), key.end(), ::isdigit)) return scenario_by_id(std::stoi(key));
  for (const auto& s : scenario_registry())
    if (lower(s.name) == lower(key)) return s;
  throw ConfigError("unknown scenario '" + key + "'");
}

nlohmann::json RewardSpec::to_json() const {
  return {{"test", test},
          {"no_test", no_test},
          {"frequency", frequency},
          {"tests_per_year", tests_per_year},
          {"season_multiplier", season_multiplier}};
}

RewardSpec RewardSpec::from_json(const nlohmann::json& j) {
  RewardSpec r;
  r.test = j.value("test", r.test);
  r.no_test = j.value("no_test", r.no_test);
  if (j.contains("frequency")) r.frequency = j["frequency"].get<std::array<double, kFrequencyActions>>();
  if (j.contains("tests_per_year")) r.tests_per_year = j["tests_per_year"].get<std::array<double, kFrequencyActions>>();
  if (j.contains("season_multiplier"))
    r.season_multiplier = j["season_multiplier"].get<std::array<double, kSeasonCount>>();
  return r;
}

const RewardSpec& default_rewards() {
  static const RewardSpec spec{};
  return spec;
}

double adoption_reward(int action, const ScenarioSpec* scenario, Season season, const RewardSpec& spec) {
  if (action == 0) return spec.no_test;
  if (action != 1) throw std::invalid_argument("adoption action must be 0 or 1");
  const double w = scenario ? scenario->combined_weight() : 0.0;
  return (spec.test + w) * spec.multiplier(season);
}

double frequency_reward(int a_f, const ScenarioSpec* scenario, Season season, const RewardSpec& spec) {
  if (a_f < 1 || a_f > kFrequencyActions) throw std::invalid_argument("a_f must be in 1..4");
  const auto k = static_cast<std::size_t>(a_f - 1);
  double bonus = 0.0;
  if (scenario) {
    const bool applies = scenario->family == ScenarioFamily::adoption || a_f <= 2;
    if (applies) bonus = scenario->combined_weight() * spec.tests_per_year[k];
  }
  return (spec.frequency[k] + bonus) * spec.multiplier(season);
}

nlohmann::json environment_to_json(const RewardSpec& spec) {
  nlohmann::json seasons = nlohmann::json::array();
  for (const auto& s : season_table())
    seasons.push_back({{"season", to_string(s.season)},
                       {"months", s.months},
                       {"rainfall_mm_per_month", s.rainfall_mm_per_month},
                       {"risk_weight", spec.multiplier(s.season)}});
  nlohmann::json scen = nlohmann::json::array();
  for (const auto& s : scenario_registry()) scen.push_back(s.to_json());
  return {{"format_version", 1}, {"seasons", seasons}, {"scenarios", scen}, {"rewards", spec.to_json()}};
}

}  // namespace wellsim
