#include <cmath>
#include <limits>

#include "wellsim/error.hpp"
#include "wellsim/simulation.hpp"

namespace wellsim {

namespace {

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
}

}  // namespace

void ScenarioAggregate::recompute() {
  std::vector<double> testers, used, pct;
  double mse_sum = 0.0;
  int mse_n = 0;
  converged_runs = 0;
  frequency_mean.fill(0.0);
  season_mean.fill(0.0);
  for (const auto& r : runs) {
    testers.push_back(r.final_testers);
    used.push_back(r.episodes_used());
    pct.push_back(r.decision_performance_pct);
    converged_runs += r.converged_at.has_value();
    if (std::isfinite(r.final_mse)) {
      mse_sum += r.final_mse;
      ++mse_n;
    }
    for (std::size_t a = 0; a < frequency_mean.size(); ++a) frequency_mean[a] += r.final_frequency[a];
    for (std::size_t s = 0; s < season_mean.size(); ++s) season_mean[s] += r.final_season[s];
  }
  mean_sd(testers, testers_mean, testers_sd);
  mean_sd(used, converged_mean, converged_sd);
  mean_sd(pct, pct_mean, pct_sd);
  mse_mean = mse_n ? mse_sum / mse_n : std::numeric_limits<double>::quiet_NaN();
  if (!runs.empty()) {
    for (auto& v : frequency_mean) v /= static_cast<double>(runs.size());
    for (auto& v : season_mean) v /= static_cast<double>(runs.size());
  }
}

nlohmann::json ScenarioAggregate::to_json() const {
  nlohmann::json rj = nlohmann::json::array();
  for (const auto& r : runs) rj.push_back(r.summary_json());
  return {{"id", id},
          {"name", name},
          {"weight", weight},
          {"model", to_string(model)},
          {"testers_mean", testers_mean},
          {"testers_sd", testers_sd},
          {"episodes_mean", converged_mean},
          {"episodes_sd", converged_sd},
          {"converged_runs", converged_runs},
          {"pct_mean", pct_mean},
          {"pct_sd", pct_sd},
          {"mse_mean", std::isfinite(mse_mean) ? nlohmann::json(mse_mean) : nlohmann::json(nullptr)},
          {"frequency_mean", frequency_mean},
          {"season_mean", season_mean},
          {"runs", rj}};
}

ScenarioAggregate aggregate_runs(int id, ModelKind model, std::vector<RunResult> runs) {
  ScenarioAggregate a;
  a.id = id;
  a.model = model;
  if (id == 0) {
    a.name = "Baseline";
  } else {
    const auto& s = scenario_by_id(id);
    a.name = s.name;
    a.weight = s.combined_weight();
  }
  a.runs = std::move(runs);
  a.recompute();
  return a;
}

ScenarioAggregate SweepResult::baseline() const { return aggregate_runs(0, ModelKind::adoption, baselines); }

SweepResult sweep_scenarios(const SimConfig& base, const SimWorld& world, const std::vector<int>& ids,
                            const std::vector<std::uint64_t>& seeds,
                            const std::vector<nlohmann::json>* baseline_checkpoints) {
  if (seeds.empty()) throw ConfigError("a sweep needs at least one seed");
  if (baseline_checkpoints && baseline_checkpoints->size() != seeds.size())
    throw ConfigError("one baseline checkpoint per seed is required");
  for (int id : ids) scenario_by_id(id);

  SweepResult out;
  std::map<int, std::vector<RunResult>> runs;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    SimConfig cfg = base;
    cfg.seed = seeds[k];
    cfg.model = ModelKind::adoption;
    cfg.scenario.reset();
    nlohmann::json baseline_ckpt;
    if (baseline_checkpoints) {
      baseline_ckpt = (*baseline_checkpoints)[k];
    } else {
      out.baselines.push_back(train_run(cfg, world));
      baseline_ckpt = out.baselines.back().checkpoint;
    }
    for (int id : ids) {
      cfg.scenario = id;
      cfg.model = ModelKind::adoption;
      RunResult adopt = train_run(cfg, world, {&baseline_ckpt, {}});
      if (base.model == ModelKind::adoption) {
        runs[id].push_back(std::move(adopt));
        continue;
      }
      // The scenario's adoption policy decides who tests; a fresh network learns how often.
      const DqnLearner gate_learner = DqnLearner::from_checkpoint(adopt.checkpoint);
      cfg.model = ModelKind::frequency;
      RunResult freq = train_run(cfg, world, {nullptr, {&gate_learner.net(), gate_learner.schedule().epsilon()}});
      runs[id].push_back(std::move(freq));
    }
  }
  for (auto& [id, r] : runs) out.scenarios.emplace(id, aggregate_runs(id, base.model, std::move(r)));
  return out;
}

}  // namespace wellsim
