#include "wellsim/report.hpp"

#include <fstream>
#include <ostream>

#include "wellsim/csv.hpp"
#include "wellsim/error.hpp"

namespace wellsim {

namespace fs = std::filesystem;
using csv::format_double;

namespace {

// Column order of the frequency table: Autumn first, as in the published breakdown.
constexpr std::array<Season, kSeasonCount> kSeasonColumns{Season::autumn, Season::winter, Season::spring,
                                                          Season::summer};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number '" + s + "'");
  return v;
}

}  // namespace

void write_scenario_summary(std::ostream& out, const std::map<int, ScenarioAggregate>& results) {
  csv::write_row(out, {"id", "name", "weight", "agents_testing", "episodes_to_convergence", "decision_pct", "mse",
                       "runs", "converged_runs"});
  for (const auto& [id, a] : results)
    csv::write_row(out, {std::to_string(id), a.name, format_double(a.weight), format_double(a.testers_mean),
                         format_double(a.converged_mean), format_double(a.pct_mean), format_double(a.mse_mean),
                         std::to_string(a.runs.size()), std::to_string(a.converged_runs)});
}

void write_frequency_breakdown(std::ostream& out, const std::map<int, ScenarioAggregate>& results) {
  csv::Row header{"id", "name", "a_f1", "a_f2", "a_f3", "a_f4"};
  for (Season s : kSeasonColumns) header.push_back(to_string(s));
  csv::write_row(out, header);
  for (const auto& [id, a] : results) {
    csv::Row row{std::to_string(id), a.name};
    for (double v : a.frequency_mean) row.push_back(format_double(v));
    for (Season s : kSeasonColumns) row.push_back(format_double(a.season_mean[static_cast<std::size_t>(s)]));
    csv::write_row(out, row);
  }
}

void write_learning_curve(std::ostream& out, const RunResult& run) {
  csv::write_row(out, {"episode", "epsilon", "mean_reward", "total_reward", "testers", "loss"});
  for (const auto& m : run.per_episode)
    csv::write_row(out, {std::to_string(m.episode), format_double(m.epsilon), format_double(m.mean_reward),
                         format_double(m.total_reward), std::to_string(m.testers), format_double(m.loss)});
}

void write_run_log(std::ostream& out, const RunResult& run) {
  csv::Row header{"episode", "testers", "mean_reward", "total_reward", "epsilon", "loss", "train_steps"};
  for (int a = 1; a <= kFrequencyActions; ++a) header.push_back("a_f" + std::to_string(a));
  for (int s = 0; s < kSeasonCount; ++s) header.push_back(to_string(static_cast<Season>(s)));
  csv::write_row(out, header);
  for (const auto& m : run.per_episode) {
    csv::Row row{std::to_string(m.episode),     std::to_string(m.testers),  format_double(m.mean_reward),
                 format_double(m.total_reward), format_double(m.epsilon),   format_double(m.loss),
                 std::to_string(m.train_steps)};
    for (int v : m.frequency_histogram) row.push_back(std::to_string(v));
    for (int v : m.season_histogram) row.push_back(std::to_string(v));
    csv::write_row(out, row);
  }
}

std::vector<fs::path> render_report(const std::map<int, ScenarioAggregate>& results, const fs::path& dir) {
  if (results.empty()) throw ConfigError("nothing to report: no run results given");
  fs::create_directories(dir);
  std::vector<fs::path> written;
  {
    const auto p = dir / "scenario_summary.csv";
    auto out = open_out(p);
    write_scenario_summary(out, results);
    written.push_back(p);
  }
  {
    const auto p = dir / "frequency_breakdown.csv";
    auto out = open_out(p);
    write_frequency_breakdown(out, results);
    written.push_back(p);
  }
  for (const auto& [id, a] : results) {
    if (a.runs.empty()) continue;
    const auto p = dir / ("learning_curve_" + std::to_string(id) + ".csv");
    auto out = open_out(p);
    write_learning_curve(out, a.runs.front());
    written.push_back(p);
  }
  return written;
}

std::vector<fs::path> render_report(const std::map<int, RunResult>& results, const fs::path& dir) {
  std::map<int, ScenarioAggregate> agg;
  for (const auto& [id, r] : results) {
    const bool freq = std::any_of(r.final_frequency.begin(), r.final_frequency.end(), [](double v) { return v > 0; });
    agg.emplace(id, aggregate_runs(id, freq ? ModelKind::frequency : ModelKind::adoption, {r}));
  }
  return render_report(agg, dir);
}

RunResult read_run(const fs::path& summary_json, const fs::path& run_log) {
  std::ifstream in(summary_json);
  if (!in) throw std::runtime_error("cannot read " + summary_json.string());
  const auto j = nlohmann::json::parse(in);
  RunResult r;
  if (!j["converged_at"].is_null()) r.converged_at = j["converged_at"].get<int>();
  r.agents = j.at("agents").get<int>();
  r.final_testers = j.at("final_testers").get<int>();
  r.decision_performance_pct = j.at("decision_performance_pct").get<double>();
  r.final_mse = j["final_mse"].is_null() ? std::nan("") : j["final_mse"].get<double>();
  r.final_frequency = j.at("final_frequency").get<std::array<double, kFrequencyActions>>();
  r.final_season = j.at("final_season").get<std::array<double, kSeasonCount>>();
  r.checkpoint_ref = j.value("checkpoint_ref", "");

  const auto rows = csv::read_file(run_log.string());
  if (rows.empty()) throw std::runtime_error(run_log.string() + " has no header");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 7 + kFrequencyActions + kSeasonCount)
      throw std::runtime_error(run_log.string() + ": row " + std::to_string(i) + " has the wrong width");
    EpisodeMetrics m;
    m.episode = std::stoi(row[0]);
    m.testers = std::stoi(row[1]);
    m.mean_reward = to_double(row[2]);
    m.total_reward = to_double(row[3]);
    m.epsilon = to_double(row[4]);
    m.loss = to_double(row[5]);
    m.train_steps = std::stoi(row[6]);
    for (int a = 0; a < kFrequencyActions; ++a) m.frequency_histogram[static_cast<std::size_t>(a)] = std::stoi(row[7 + static_cast<std::size_t>(a)]);
    for (int s = 0; s < kSeasonCount; ++s)
      m.season_histogram[static_cast<std::size_t>(s)] = std::stoi(row[7 + kFrequencyActions + static_cast<std::size_t>(s)]);
    r.per_episode.push_back(m);
  }
  return r;
}

}  // namespace wellsim
