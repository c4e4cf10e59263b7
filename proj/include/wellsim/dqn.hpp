#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wellsim/rng.hpp"

namespace wellsim {

enum class Mode { train, eval };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Activations kept from a batched forward pass for backpropagation.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer (after dropout)
  std::vector<Eigen::MatrixXd> pre;     // pre-activations of hidden layers
  std::vector<Eigen::MatrixXd> masks;   // scaled dropout masks (train mode)
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;
};

/// Dense ReLU MLP estimating Q(s, .) for every action.
class QNetwork {
 public:
  static const std::vector<int>& default_hidden();
  static const std::vector<double>& default_dropout();

  QNetwork() = default;
  QNetwork(int state_dim, int actions, std::vector<int> hidden = default_hidden(),
           std::vector<double> dropout = default_dropout());

  /// He-style uniform fan-in initialisation; biases start at zero.
  void init_he_uniform(Rng& rng);
  void set_zero();

  int state_dim() const { return state_dim_; }
  int actions() const { return actions_; }
  const std::vector<int>& hidden() const { return hidden_; }
  const std::vector<double>& dropout() const { return dropout_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const;
  bool all_finite() const;

  /// states: d x batch, one column per sample. Returns |A| x batch.
  /// Train mode applies inverted dropout after every hidden ReLU.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& states, Mode mode, Rng* rng = nullptr,
                          ForwardCache* cache = nullptr) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& state, Mode mode, Rng* rng = nullptr) const;

  /// Gradients of sum(dq .* Q) given a cache from a train/eval forward pass.
  Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& dq) const;

  double weight_norm_squared() const;

  nlohmann::json to_json() const;
  static QNetwork from_json(const nlohmann::json& j);

  bool operator==(const QNetwork& other) const;

 private:
  int state_dim_ = 0;
  int actions_ = 0;
  std::vector<int> hidden_;
  std::vector<double> dropout_;
  std::vector<DenseLayer> layers_;
};

/// Argmax with ties broken by the lowest index.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& q);

// ---------------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam update of one parameter block; `t` is the 1-based step index.
void adam_update(Eigen::Ref<Eigen::ArrayXd> param, const Eigen::Ref<const Eigen::ArrayXd>& grad,
                 Eigen::Ref<Eigen::ArrayXd> m, Eigen::Ref<Eigen::ArrayXd> v, double lr,
                 const AdamConfig& cfg, long t);

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const QNetwork& net, AdamConfig cfg);

  void step(QNetwork& net, const Gradients& grads, double lr);
  long t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  nlohmann::json to_json() const;
  static AdamOptimizer from_json(const nlohmann::json& j);

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
};

// ---------------------------------------------------------------------------

struct Experience {
  Eigen::VectorXd s;
  int a = 0;
  double r = 0.0;
  Eigen::VectorXd s_next;
  bool done = false;

  bool operator==(const Experience& o) const {
    return a == o.a && r == o.r && done == o.done && s == o.s && s_next == o.s_next;
  }
};

inline constexpr std::size_t kDefaultReplayCapacity = 100'000;

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = kDefaultReplayCapacity);

  void push(Experience e);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  void clear();

  /// i-th oldest stored experience.
  const Experience& at(std::size_t i) const;

  /// Uniform sample without replacement; throws TrainingError if underfull.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;
  std::vector<const Experience*> sample(std::size_t batch, Rng& rng) const;

  nlohmann::json to_json() const;
  static ReplayBuffer from_json(const nlohmann::json& j);

 private:
  std::size_t capacity_;
  std::vector<Experience> storage_;
  std::size_t head_ = 0;  // slot of the oldest element once full
  std::size_t size_ = 0;
};

// ---------------------------------------------------------------------------

struct ExplorationSchedule {
  double eps_start = 0.9;
  double eps_end = 0.05;
  double decay_steps = 100'000.0;
  long step = 0;
  std::optional<double> forced;  // overrides the schedule when set

  double epsilon() const;
  double epsilon_at(long s) const;
};

double epsilon(const ExplorationSchedule& schedule, long step);

struct TrainConfig {
  double gamma = 0.99;
  int batch = 64;
  long target_sync = 10'000;
  double lr = 0.001;
  double lr_factor = 0.9;
  long lr_every = 100;
  double lr_floor = 1e-6;
  AdamConfig adam;
  double l2_lambda = 1e-4;
  std::size_t replay_capacity = kDefaultReplayCapacity;
  double eps_start = 0.9;
  double eps_end = 0.05;
  double eps_decay_steps = 100'000.0;
  std::vector<int> hidden = QNetwork::default_hidden();
  std::vector<double> dropout = QNetwork::default_dropout();

  static const std::vector<double>& lr_grid();

  double lr_at(long step) const;
  ExplorationSchedule schedule() const;
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Picks an action for one state and advances the schedule by one step.
int select_action(const QNetwork& net, const Eigen::VectorXd& s, ExplorationSchedule& schedule,
                  Rng& rng);

/// Batched variant: one decision per column; the schedule advances once per column.
std::vector<int> select_actions(const QNetwork& net, const Eigen::MatrixXd& states,
                                ExplorationSchedule& schedule, Rng& rng);

std::vector<double> bellman_targets(std::span<const Experience* const> batch, const QNetwork& net,
                                    const QNetwork& target_net, double gamma);
std::vector<double> bellman_targets(std::span<const Experience> batch, const QNetwork& net,
                                    const QNetwork& target_net, double gamma);

double mse(std::span<const double> y, std::span<const double> y_hat);
double cumulative_reward(std::span<const double> rewards, double gamma);

/// Loss and gradients on a fixed batch with known targets; exposed for gradient checks.
double batch_loss(const QNetwork& net, std::span<const Experience* const> batch,
                  std::span<const double> targets, double l2_lambda, Mode mode, Rng* rng,
                  Gradients* grads);

/// Network, target network, optimiser, replay memory and exploration state of one run.
class DqnLearner {
 public:
  DqnLearner() = default;
  DqnLearner(int state_dim, int actions, TrainConfig config, std::uint64_t seed);

  QNetwork& net() { return net_; }
  const QNetwork& net() const { return net_; }
  const QNetwork& target_net() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  ExplorationSchedule& schedule() { return schedule_; }
  const ExplorationSchedule& schedule() const { return schedule_; }
  const TrainConfig& config() const { return config_; }
  Rng& rng() { return rng_; }
  long step_count() const { return step_count_; }
  double current_lr() const { return config_.lr_at(step_count_); }
  const AdamOptimizer& optimizer() const { return adam_; }

  /// One minibatch update. Throws TrainingError when the buffer holds fewer
  /// than `batch` experiences or the loss is not finite.
  double train_step();

  /// Restart optimiser, learning-rate schedule and replay memory, keeping the
  /// weights (used when fine-tuning a trained baseline).
  void reset_for_finetune(std::uint64_t seed);

  nlohmann::json checkpoint(bool include_replay = false) const;
  static DqnLearner from_checkpoint(const nlohmann::json& j);

 private:
  TrainConfig config_;
  QNetwork net_;
  QNetwork target_;
  AdamOptimizer adam_;
  ReplayBuffer buffer_;
  ExplorationSchedule schedule_;
  Rng rng_;
  long step_count_ = 0;
};

/// Free-function form of DqnLearner::train_step.
double train_step(DqnLearner& learner);

inline constexpr int kCheckpointFormatVersion = 1;

}  // namespace wellsim
