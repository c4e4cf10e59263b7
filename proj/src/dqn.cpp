#include <algorithm>
#include <cmath>
#include <sstream>

#include "wellsim/dqn.hpp"
#include "wellsim/error.hpp"

namespace wellsim {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
  if (e.s.size() != e.s_next.size()) throw DimensionError("experience states differ in dimension");
  if (!std::isfinite(e.r)) throw std::invalid_argument("experience reward is not finite");
  if (size_ < capacity_) {
    storage_.push_back(std::move(e));
    ++size_;
  } else {
    storage_[head_] = std::move(e);
    head_ = (head_ + 1) % capacity_;
  }
}

void ReplayBuffer::clear() {
  storage_.clear();
  head_ = 0;
  size_ = 0;
}

const Experience& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index out of range");
  return storage_[(head_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (batch == 0 || size_ < batch)
    throw TrainingError("replay buffer holds " + std::to_string(size_) + " experiences, batch needs " +
                        std::to_string(batch));
  std::uniform_int_distribution<std::size_t> d(0, size_ - 1);
  std::vector<std::size_t> idx;
  idx.reserve(batch);
  while (idx.size() < batch) {
    const std::size_t i = d(rng);
    if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
  }
  return idx;
}

std::vector<const Experience*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  std::vector<const Experience*> out;
  for (std::size_t i : sample_indices(batch, rng)) out.push_back(&at(i));
  return out;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const nlohmann::json& j) {
  const auto d = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
}

}  // namespace

nlohmann::json ReplayBuffer::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < size_; ++i) {
    const auto& e = at(i);
    items.push_back({vec_json(e.s), e.a, e.r, vec_json(e.s_next), e.done});
  }
  return {{"capacity", capacity_}, {"items", items}};
}

ReplayBuffer ReplayBuffer::from_json(const nlohmann::json& j) {
  ReplayBuffer b(j.at("capacity").get<std::size_t>());
  for (const auto& it : j.at("items"))
    b.push({vec_from(it[0]), it[1].get<int>(), it[2].get<double>(), vec_from(it[3]), it[4].get<bool>()});
  return b;
}

// ---------------------------------------------------------------------------

double ExplorationSchedule::epsilon_at(long s) const {
  return eps_end + (eps_start - eps_end) * std::exp(-static_cast<double>(s) / decay_steps);
}

double ExplorationSchedule::epsilon() const { return forced ? *forced : epsilon_at(step); }

double epsilon(const ExplorationSchedule& schedule, long step) {
  if (step < 0) throw std::invalid_argument("step must be non-negative");
  return schedule.epsilon_at(step);
}

const std::vector<double>& TrainConfig::lr_grid() {
  static const std::vector<double> g{0.4, 0.3, 0.2, 0.1, 0.001, 0.0001};
  return g;
}

double TrainConfig::lr_at(long step) const {
  const double decayed = lr * std::pow(lr_factor, static_cast<double>(step / lr_every));
  return std::max(decayed, std::min(lr, lr_floor));
}

ExplorationSchedule TrainConfig::schedule() const {
  ExplorationSchedule s;
  s.eps_start = eps_start;
  s.eps_end = eps_end;
  s.decay_steps = eps_decay_steps;
  return s;
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (batch < 1) throw ConfigError("batch must be at least 1");
  if (target_sync < 1) throw ConfigError("target_sync must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) throw ConfigError("lr_factor must lie in (0, 1]");
  if (lr_every < 1) throw ConfigError("lr_every must be at least 1");
  if (l2_lambda < 0.0) throw ConfigError("l2_lambda must be non-negative");
  if (replay_capacity < static_cast<std::size_t>(batch)) throw ConfigError("replay capacity is smaller than a batch");
  if (!(eps_end >= 0.0 && eps_end <= eps_start && eps_start <= 1.0)) throw ConfigError("need 0 <= eps_end <= eps_start <= 1");
  if (!(eps_decay_steps > 0.0)) throw ConfigError("eps_decay_steps must be positive");
  if (hidden.size() != dropout.size()) throw ConfigError("one dropout rate per hidden layer is required");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"gamma", gamma},
          {"batch", batch},
          {"target_sync", target_sync},
          {"lr", lr},
          {"lr_factor", lr_factor},
          {"lr_every", lr_every},
          {"lr_floor", lr_floor},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"adam_eps", adam.eps},
          {"l2_lambda", l2_lambda},
          {"replay_capacity", replay_capacity},
          {"eps_start", eps_start},
          {"eps_end", eps_end},
          {"eps_decay_steps", eps_decay_steps},
          {"hidden", hidden},
          {"dropout", dropout}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.batch = j.value("batch", c.batch);
  c.target_sync = j.value("target_sync", c.target_sync);
  c.lr = j.value("lr", c.lr);
  c.lr_factor = j.value("lr_factor", c.lr_factor);
  c.lr_every = j.value("lr_every", c.lr_every);
  c.lr_floor = j.value("lr_floor", c.lr_floor);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.eps = j.value("adam_eps", c.adam.eps);
  c.l2_lambda = j.value("l2_lambda", c.l2_lambda);
  c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
  c.eps_start = j.value("eps_start", c.eps_start);
  c.eps_end = j.value("eps_end", c.eps_end);
  c.eps_decay_steps = j.value("eps_decay_steps", c.eps_decay_steps);
  c.hidden = j.value("hidden", c.hidden);
  c.dropout = j.value("dropout", c.dropout);
  return c;
}

// ---------------------------------------------------------------------------

std::vector<int> select_actions(const QNetwork& net, const Eigen::MatrixXd& states, ExplorationSchedule& schedule,
                                Rng& rng) {
  const Eigen::MatrixXd q = net.forward(states, Mode::eval);
  std::vector<int> actions(static_cast<std::size_t>(states.cols()));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, net.actions() - 1);
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    const double eps = schedule.epsilon();
    ++schedule.step;
    actions[static_cast<std::size_t>(c)] = u(rng) < eps ? pick(rng) : argmax(q.col(c));
  }
  return actions;
}

int select_action(const QNetwork& net, const Eigen::VectorXd& s, ExplorationSchedule& schedule, Rng& rng) {
  Eigen::MatrixXd m = s;
  return select_actions(net, m, schedule, rng).front();
}

std::vector<double> bellman_targets(std::span<const Experience* const> batch, const QNetwork& net,
                                    const QNetwork& target_net, double gamma) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (net.state_dim() != target_net.state_dim() || net.actions() != target_net.actions())
    throw DimensionError("online and target networks differ in shape");
  std::vector<double> y(batch.size());
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i]->r;
    if (!batch[i]->done && gamma != 0.0) live.push_back(i);
  }
  if (live.empty()) return y;
  Eigen::MatrixXd next(target_net.state_dim(), static_cast<Eigen::Index>(live.size()));
  for (std::size_t k = 0; k < live.size(); ++k) next.col(static_cast<Eigen::Index>(k)) = batch[live[k]]->s_next;
  const Eigen::MatrixXd q = target_net.forward(next, Mode::eval);
  for (std::size_t k = 0; k < live.size(); ++k) y[live[k]] += gamma * q.col(static_cast<Eigen::Index>(k)).maxCoeff();
  return y;
}

std::vector<double> bellman_targets(std::span<const Experience> batch, const QNetwork& net,
                                    const QNetwork& target_net, double gamma) {
  std::vector<const Experience*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);
  return bellman_targets(std::span<const Experience* const>(ptrs), net, target_net, gamma);
}

double mse(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw DimensionError("mse: length mismatch");
  if (y.empty()) throw std::invalid_argument("mse of empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  return s / static_cast<double>(y.size());
}

double cumulative_reward(std::span<const double> rewards, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must lie in [0, 1]");
  double total = 0.0, w = 1.0;
  for (double r : rewards) {
    total += w * r;
    w *= gamma;
  }
  return total;
}

double batch_loss(const QNetwork& net, std::span<const Experience* const> batch, std::span<const double> targets,
                  double l2_lambda, Mode mode, Rng* rng, Gradients* grads) {
  if (batch.size() != targets.size()) throw DimensionError("batch and targets differ in length");
  const auto B = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd S(net.state_dim(), B);
  for (Eigen::Index i = 0; i < B; ++i) S.col(i) = batch[static_cast<std::size_t>(i)]->s;
  ForwardCache cache;
  const Eigen::MatrixXd q = net.forward(S, mode, rng, grads ? &cache : nullptr);
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const int a = batch[static_cast<std::size_t>(i)]->a;
    if (a < 0 || a >= net.actions()) throw std::invalid_argument("experience action out of range");
    const double diff = q(a, i) - targets[static_cast<std::size_t>(i)];
    loss += diff * diff;
    dq(a, i) = 2.0 * diff / static_cast<double>(B);
  }
  loss = loss / static_cast<double>(B) + l2_lambda * net.weight_norm_squared();
  if (grads) {
    *grads = net.backward(cache, dq);
    if (l2_lambda != 0.0)
      for (std::size_t l = 0; l < grads->weights.size(); ++l)
        grads->weights[l] += 2.0 * l2_lambda * net.layers()[l].weights;
  }
  return loss;
}

// ---------------------------------------------------------------------------

DqnLearner::DqnLearner(int state_dim, int actions, TrainConfig config, std::uint64_t seed)
    : config_(std::move(config)), buffer_(config_.replay_capacity) {
  config_.validate();
  rng_ = make_rng(seed, 0x51);
  net_ = QNetwork(state_dim, actions, config_.hidden, config_.dropout);
  net_.init_he_uniform(rng_);
  target_ = net_;
  adam_ = AdamOptimizer(net_, config_.adam);
  schedule_ = config_.schedule();
}

double DqnLearner::train_step() {
  const auto batch_size = static_cast<std::size_t>(config_.batch);
  const auto batch = buffer_.sample(batch_size, rng_);
  const auto targets = bellman_targets(std::span<const Experience* const>(batch), net_, target_, config_.gamma);
  Gradients grads;
  const double loss = batch_loss(net_, batch, targets, config_.l2_lambda, Mode::train, &rng_, &grads);
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << "non-finite training loss at step " << step_count_ << " (lr " << current_lr() << ")";
    throw TrainingError(os.str());
  }
  adam_.step(net_, grads, current_lr());
  ++step_count_;
  if (step_count_ % config_.target_sync == 0) target_ = net_;
  return loss;
}

double train_step(DqnLearner& learner) { return learner.train_step(); }

void DqnLearner::reset_for_finetune(std::uint64_t seed) {
  adam_ = AdamOptimizer(net_, config_.adam);
  step_count_ = 0;
  buffer_ = ReplayBuffer(config_.replay_capacity);
  target_ = net_;
  rng_ = make_rng(seed, 0x52);
}

nlohmann::json DqnLearner::checkpoint(bool include_replay) const {
  nlohmann::json j{{"format_version", kCheckpointFormatVersion},
                   {"kind", "dqn_learner"},
                   {"config", config_.to_json()},
                   {"step_count", step_count_},
                   {"schedule",
                    {{"eps_start", schedule_.eps_start},
                     {"eps_end", schedule_.eps_end},
                     {"decay_steps", schedule_.decay_steps},
                     {"step", schedule_.step},
                     {"forced", schedule_.forced ? nlohmann::json(*schedule_.forced) : nlohmann::json(nullptr)}}},
                   {"net", net_.to_json()},
                   {"target", target_.to_json()},
                   {"adam", adam_.to_json()},
                   {"rng", rng_state(rng_)}};
  if (include_replay) j["replay"] = buffer_.to_json();
  return j;
}

DqnLearner DqnLearner::from_checkpoint(const nlohmann::json& j) {
  if (j.value("kind", std::string()) != "dqn_learner") throw std::invalid_argument("not a learner checkpoint");
  if (j.value("format_version", 0) != kCheckpointFormatVersion)
    throw std::invalid_argument("unsupported checkpoint format version");
  DqnLearner l;
  l.config_ = TrainConfig::from_json(j.at("config"));
  l.step_count_ = j.at("step_count").get<long>();
  const auto& sj = j.at("schedule");
  l.schedule_.eps_start = sj.at("eps_start").get<double>();
  l.schedule_.eps_end = sj.at("eps_end").get<double>();
  l.schedule_.decay_steps = sj.at("decay_steps").get<double>();
  l.schedule_.step = sj.at("step").get<long>();
  if (!sj.at("forced").is_null()) l.schedule_.forced = sj["forced"].get<double>();
  l.net_ = QNetwork::from_json(j.at("net"));
  l.target_ = QNetwork::from_json(j.at("target"));
  l.adam_ = AdamOptimizer::from_json(j.at("adam"));
  restore_rng_state(l.rng_, j.at("rng").get<std::string>());
  l.buffer_ = j.contains("replay") ? ReplayBuffer::from_json(j["replay"]) : ReplayBuffer(l.config_.replay_capacity);
  return l;
}

}  // namespace wellsim
