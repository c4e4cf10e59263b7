#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "wellsim/simulation.hpp"

namespace wellsim {

inline constexpr int kReportFormatVersion = 1;

void write_scenario_summary(std::ostream& out, const std::map<int, ScenarioAggregate>& results);
void write_frequency_breakdown(std::ostream& out, const std::map<int, ScenarioAggregate>& results);
void write_learning_curve(std::ostream& out, const RunResult& run);
/// Per-episode run log with histogram columns.
void write_run_log(std::ostream& out, const RunResult& run);

/// Writes scenario_summary.csv, frequency_breakdown.csv and one
/// learning_curve_<id>.csv per entry (first seed). Returns the files written.
std::vector<std::filesystem::path> render_report(const std::map<int, ScenarioAggregate>& results,
                                                 const std::filesystem::path& dir);
std::vector<std::filesystem::path> render_report(const std::map<int, RunResult>& results,
                                                 const std::filesystem::path& dir);

/// Reads a RunResult summary (as written by RunResult::summary_json plus the
/// run log) back for reporting.
RunResult read_run(const std::filesystem::path& summary_json, const std::filesystem::path& run_log);

}  // namespace wellsim
