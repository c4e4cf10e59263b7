#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wellsim/dqn.hpp"
#include "wellsim/env.hpp"
#include "wellsim/error.hpp"
#include "wellsim/forest.hpp"
#include "wellsim/population.hpp"
#include "wellsim/preprocess.hpp"

namespace wellsim {

enum class ModelKind { adoption, frequency };

std::string to_string(ModelKind m);
ModelKind model_kind_from_string(const std::string& s);
int action_count(ModelKind m);

struct ConvergenceConfig {
  int window = 100;
  double rel_tol = 0.01;
  int patience = 100;
};

/// Per-agent cost of testing. Agents whose survey profile predicts testing
/// face a low barrier; b_i = lo + (hi - lo) * (1 - Phi(z_i)).
struct BarrierConfig {
  bool enabled = true;
  double lo = 0.9;
  double hi = 2.6;
};

struct SimConfig {
  ModelKind model = ModelKind::adoption;
  int feature_set = 20;
  std::optional<int> scenario;
  int episodes = 2000;
  int agents = 561;
  std::uint64_t seed = 0;
  TrainConfig train;
  double peer_delta = 0.05;
  ConvergenceConfig convergence;
  BarrierConfig barrier;
  bool stop_at_convergence = true;
  int eval_experiences = 1000;
  RewardSpec rewards;

  void validate() const;
  nlohmann::json to_json() const;
  static SimConfig from_json(const nlohmann::json& j);
};

/// Reduced-scale settings for quick runs.
struct DeskPreset {
  static constexpr int agents = 100;
  static constexpr int episodes = 300;
  static constexpr int seeds = 3;
};

struct EpisodeMetrics {
  int episode = 0;  // 1-based
  int testers = 0;
  double mean_reward = 0.0;   // per agent, summed over the episode's months
  double total_reward = 0.0;
  double epsilon = 0.0;       // at the end of the episode
  double loss = 0.0;          // mean train loss, NaN when no update ran
  int train_steps = 0;
  std::array<int, kFrequencyActions> frequency_histogram{};
  std::array<int, kSeasonCount> season_histogram{};
};

struct RunResult {
  std::vector<EpisodeMetrics> per_episode;
  std::optional<int> converged_at;
  int agents = 0;
  int final_testers = 0;
  double decision_performance_pct = 0.0;
  double final_mse = 0.0;
  /// Tail-window mean histograms (frequency model only).
  std::array<double, kFrequencyActions> final_frequency{};
  std::array<double, kSeasonCount> final_season{};
  std::string checkpoint_ref;
  nlohmann::json checkpoint;  // learner state at the end of the run

  /// Episodes spent; the convergence episode when converged.
  int episodes_used() const;
  nlohmann::json summary_json() const;
};

// ---------------------------------------------------------------------------
// World: the encoded agents a run acts on

struct SimWorld {
  std::vector<std::string> features;   // selected raw features
  TransformParams transform;
  std::vector<int> columns;            // derived columns used in the state
  Eigen::MatrixXd static_state;        // agents x columns
  std::vector<double> barrier;
  std::vector<DynamicState> initial;
  std::vector<std::int64_t> agent_ids;

  int agents() const { return static_cast<int>(agent_ids.size()); }
  int state_dim() const { return static_cast<int>(columns.size()) + 6; }
  /// The first n agents; barriers keep their whole-population calibration.
  SimWorld head(int n) const;
};

/// Standard normal CDF.
double normal_cdf(double z);

/// Per-agent barriers from an OLS fit of the adoption label on `X`.
std::vector<double> testing_barriers(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                     const BarrierConfig& cfg);

/// Ranks features by RFE on the adoption label and returns the k-set.
std::vector<std::string> select_features(const Population& pop, int k, std::uint64_t seed,
                                         RfeResult* rfe = nullptr, int n_trees = 100);

SimWorld build_world(const Population& pop, const std::vector<std::string>& features,
                     const BarrierConfig& barrier = {});

/// Appends the dynamic block (season one-hot, months since test / 12,
/// peer norm) to an encoded static vector.
Eigen::VectorXd encode_state(const Eigen::VectorXd& static_part, const DynamicState& dyn);

/// Full encoding from a raw agent record; SchemaError when a selected
/// feature is not part of the transform.
Eigen::VectorXd encode_state(const AgentRecord& agent, const FeatureSchema& schema,
                             const TransformParams& transform,
                             std::span<const std::string> features);

/// Dynamic state at the start of an episode (December, peer norm 0).
DynamicState reset_dynamic(const DynamicState& initial);

inline constexpr int kFirstMonth = 12;
inline constexpr int kMonthsPerEpisode = 12;

struct StepResult {
  std::vector<double> rewards;
  std::vector<DynamicState> next;
  int next_month = 1;
  int testers = 0;
};

/// Actions: 0 = no test; adoption 1 = test; frequency 1..4 = a_f.
StepResult step_environment(std::span<const DynamicState> states, std::span<const int> actions,
                            int month, ModelKind model, const ScenarioSpec* scenario,
                            double peer_delta, std::span<const double> barrier = {},
                            const RewardSpec& rewards = default_rewards());

/// Fixed gate used by the frequency model to decide whether an agent tests.
struct TestingGate {
  const QNetwork* net = nullptr;
  double epsilon = 0.0;
};

struct EpisodeOptions {
  ModelKind model = ModelKind::adoption;
  const ScenarioSpec* scenario = nullptr;
  double peer_delta = 0.05;
  RewardSpec rewards;
  TestingGate gate;
  bool learn = true;                       // push experiences and train
  std::vector<Experience>* capture = nullptr;
  std::size_t capture_limit = 0;
};

EpisodeMetrics run_episode(const SimWorld& world, DqnLearner& learner, const EpisodeOptions& opts,
                           int episode);

/// Tracks the moving average of tester counts. The run has converged once the
/// average changed by less than rel_tol (relative) for `patience` episodes.
class ConvergenceTracker {
 public:
  explicit ConvergenceTracker(ConvergenceConfig cfg = {});
  /// Feeds episode `episode` (1-based); returns true once converged.
  bool update(int episode, double testers);
  std::optional<int> converged_at() const { return converged_at_; }

 private:
  ConvergenceConfig cfg_;
  std::vector<double> series_;
  double sum_ = 0.0;
  std::optional<double> prev_ma_;
  int streak_ = 0;
  std::optional<int> converged_at_;
};

std::optional<int> detect_convergence(std::span<const double> testers,
                                      const ConvergenceConfig& cfg);

/// Learner state and policy gate a run starts from.
struct RunStart {
  const nlohmann::json* checkpoint = nullptr;  // fine-tune from this learner
  TestingGate gate;                            // frequency model only
};

/// Divergence during training; carries the last finite learner state.
class DivergenceError : public TrainingError {
 public:
  DivergenceError(const std::string& what, nlohmann::json last_checkpoint, int episode);
  const nlohmann::json& last_checkpoint() const { return checkpoint_; }
  int episode() const { return episode_; }

 private:
  nlohmann::json checkpoint_;
  int episode_;
};

RunResult train_run(const SimConfig& config, const SimWorld& world, const RunStart& start = {});

// ---------------------------------------------------------------------------
// Scenario sweeps

struct ScenarioAggregate {
  int id = 0;  // 0 = baseline
  std::string name;
  double weight = 0.0;
  ModelKind model = ModelKind::adoption;
  std::vector<RunResult> runs;

  double testers_mean = 0.0, testers_sd = 0.0;
  double converged_mean = 0.0, converged_sd = 0.0;  // episodes used
  int converged_runs = 0;
  double pct_mean = 0.0, pct_sd = 0.0;
  double mse_mean = 0.0;
  std::array<double, kFrequencyActions> frequency_mean{};
  std::array<double, kSeasonCount> season_mean{};

  void recompute();
  nlohmann::json to_json() const;
};

ScenarioAggregate aggregate_runs(int id, ModelKind model, std::vector<RunResult> runs);

struct SweepResult {
  std::vector<RunResult> baselines;  // one per seed, same order as seeds
  std::map<int, ScenarioAggregate> scenarios;
  ScenarioAggregate baseline() const;
};

/// Trains one adoption baseline per seed (unless supplied) and fine-tunes it
/// under every scenario. Frequency sweeps also train a scenario adoption gate.
SweepResult sweep_scenarios(const SimConfig& base, const SimWorld& world,
                            const std::vector<int>& ids, const std::vector<std::uint64_t>& seeds,
                            const std::vector<nlohmann::json>* baseline_checkpoints = nullptr);

}  // namespace wellsim
