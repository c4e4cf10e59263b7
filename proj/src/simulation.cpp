#include "wellsim/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wellsim/error.hpp"

namespace wellsim {

std::string to_string(ModelKind m) { return m == ModelKind::adoption ? "adoption" : "frequency"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "adoption") return ModelKind::adoption;
  if (s == "frequency") return ModelKind::frequency;
  throw ConfigError("unknown model '" + s + "' (expected adoption or frequency)");
}

int action_count(ModelKind m) { return m == ModelKind::adoption ? 2 : kFrequencyActions; }

void SimConfig::validate() const {
  train.validate();
  if (feature_set < 10 || feature_set > 90 || feature_set % 10 != 0)
    throw ConfigError("feature_set must be one of 10, 20, ..., 90");
  if (scenario) scenario_by_id(*scenario);
  if (episodes < 1) throw ConfigError("episodes must be at least 1");
  if (agents < 1) throw ConfigError("agents must be at least 1");
  if (peer_delta < 0.0 || peer_delta > 1.0) throw ConfigError("peer_delta must lie in [0, 1]");
  if (convergence.window < 1 || convergence.patience < 1 || convergence.rel_tol <= 0.0)
    throw ConfigError("convergence window, patience and rel_tol must be positive");
  if (stop_at_convergence && episodes < convergence.window + convergence.patience)
    throw ConfigError("episodes must be at least window + patience (" +
                      std::to_string(convergence.window + convergence.patience) + ")");
  if (barrier.enabled && barrier.hi < barrier.lo) throw ConfigError("barrier hi must not be below lo");
  if (eval_experiences < 0) throw ConfigError("eval_experiences must be non-negative");
}

nlohmann::json SimConfig::to_json() const {
  return {{"model", to_string(model)},
          {"feature_set", feature_set},
          {"scenario", scenario ? nlohmann::json(*scenario) : nlohmann::json(nullptr)},
          {"episodes", episodes},
          {"agents", agents},
          {"seed", seed},
          {"train", train.to_json()},
          {"peer_delta", peer_delta},
          {"convergence",
           {{"window", convergence.window}, {"rel_tol", convergence.rel_tol}, {"patience", convergence.patience}}},
          {"barrier", {{"enabled", barrier.enabled}, {"lo", barrier.lo}, {"hi", barrier.hi}}},
          {"stop_at_convergence", stop_at_convergence},
          {"eval_experiences", eval_experiences},
          {"rewards", rewards.to_json()}};
}

SimConfig SimConfig::from_json(const nlohmann::json& j) {
  SimConfig c;
  if (j.contains("model")) c.model = model_kind_from_string(j["model"].get<std::string>());
  c.feature_set = j.value("feature_set", c.feature_set);
  if (j.contains("scenario") && !j["scenario"].is_null()) c.scenario = j["scenario"].get<int>();
  c.episodes = j.value("episodes", c.episodes);
  c.agents = j.value("agents", c.agents);
  c.seed = j.value("seed", c.seed);
  if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
  c.peer_delta = j.value("peer_delta", c.peer_delta);
  if (j.contains("convergence")) {
    const auto& cj = j["convergence"];
    c.convergence.window = cj.value("window", c.convergence.window);
    c.convergence.rel_tol = cj.value("rel_tol", c.convergence.rel_tol);
    c.convergence.patience = cj.value("patience", c.convergence.patience);
  }
  if (j.contains("barrier")) {
    const auto& bj = j["barrier"];
    c.barrier.enabled = bj.value("enabled", c.barrier.enabled);
    c.barrier.lo = bj.value("lo", c.barrier.lo);
    c.barrier.hi = bj.value("hi", c.barrier.hi);
  }
  c.stop_at_convergence = j.value("stop_at_convergence", c.stop_at_convergence);
  c.eval_experiences = j.value("eval_experiences", c.eval_experiences);
  if (j.contains("rewards")) c.rewards = RewardSpec::from_json(j["rewards"]);
  return c;
}

int RunResult::episodes_used() const {
  return converged_at ? *converged_at : static_cast<int>(per_episode.size());
}

nlohmann::json RunResult::summary_json() const {
  return {{"format_version", 1},
          {"episodes_run", per_episode.size()},
          {"converged_at", converged_at ? nlohmann::json(*converged_at) : nlohmann::json(nullptr)},
          {"agents", agents},
          {"final_testers", final_testers},
          {"decision_performance_pct", decision_performance_pct},
          {"final_mse", std::isfinite(final_mse) ? nlohmann::json(final_mse) : nlohmann::json(nullptr)},
          {"final_frequency", final_frequency},
          {"final_season", final_season},
          {"checkpoint_ref", checkpoint_ref}};
}

// ---------------------------------------------------------------------------

SimWorld SimWorld::head(int n) const {
  if (n < 1 || n > agents()) throw ConfigError("requested " + std::to_string(n) + " agents, world has " +
                                               std::to_string(agents()));
  SimWorld w = *this;
  w.static_state = static_state.topRows(n);
  w.barrier.resize(static_cast<std::size_t>(n));
  w.initial.resize(static_cast<std::size_t>(n));
  w.agent_ids.resize(static_cast<std::size_t>(n));
  return w;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::vector<double> testing_barriers(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                     const BarrierConfig& cfg) {
  const auto n = X.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw DimensionError("one label per agent is required");
  std::vector<double> b(static_cast<std::size_t>(n), 0.0);
  if (!cfg.enabled || n == 0) return b;
  Eigen::MatrixXd A(n, X.cols() + 1);
  A.col(0).setOnes();
  A.rightCols(X.cols()) = X;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)];
  const Eigen::VectorXd beta = A.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd fit = A * beta;
  const double mean = fit.mean();
  const double sd = std::sqrt((fit.array() - mean).square().mean());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = sd > 0.0 ? (fit[i] - mean) / sd : 0.0;
    b[static_cast<std::size_t>(i)] = cfg.lo + (cfg.hi - cfg.lo) * (1.0 - normal_cdf(z));
  }
  return b;
}

namespace {

Eigen::VectorXd adoption_labels(const Population& pop) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(pop.size()));
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop.agents[i].label_adoption)
      throw ConfigError("agent " + std::to_string(pop.agents[i].agent_id) + " has no adoption label");
    y[static_cast<Eigen::Index>(i)] = *pop.agents[i].label_adoption;
  }
  return y;
}

}  // namespace

std::vector<std::string> select_features(const Population& pop, int k, std::uint64_t seed, RfeResult* rfe,
                                         int n_trees) {
  const DesignMatrix dm = fit_transform(pop);
  FeatureGroups groups{dm.feature_names, dm.column_feature};
  RfeParams params;
  params.evaluate = false;
  params.forest.n_trees = n_trees;
  params.forest.seed = seed;
  params.max_recorded = std::max(params.max_recorded, static_cast<int>(groups.names.size()));
  RfeResult res = run_rfe(dm.rows, adoption_labels(pop), groups, params);
  auto it = res.selected_sets.find(k);
  if (it == res.selected_sets.end()) throw ConfigError("RFE did not record a feature set of size " + std::to_string(k));
  std::vector<std::string> out = it->second;
  if (rfe) *rfe = std::move(res);
  return out;
}

SimWorld build_world(const Population& pop, const std::vector<std::string>& features, const BarrierConfig& barrier) {
  const DesignMatrix dm = fit_transform(pop);
  SimWorld w;
  w.features = features;
  w.transform = dm.transform;
  w.columns = w.transform.columns_for(features);
  const auto n = dm.n();
  w.static_state.resize(n, static_cast<Eigen::Index>(w.columns.size()));
  for (std::size_t c = 0; c < w.columns.size(); ++c)
    w.static_state.col(static_cast<Eigen::Index>(c)) = dm.rows.col(w.columns[c]);
  std::vector<int> labels;
  bool labelled = true;
  for (const auto& a : pop.agents) {
    labelled = labelled && a.label_adoption.has_value();
    labels.push_back(a.label_adoption.value_or(0));
  }
  if (barrier.enabled && !labelled) throw ConfigError("testing barriers need adoption labels for every agent");
  w.barrier = testing_barriers(w.static_state, labels, barrier);
  for (const auto& a : pop.agents) {
    w.initial.push_back(a.dynamic);
    w.agent_ids.push_back(a.agent_id);
  }
  return w;
}

Eigen::VectorXd encode_state(const Eigen::VectorXd& static_part, const DynamicState& dyn) {
  const auto k = static_part.size();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(k + 6);
  s.head(k) = static_part;
  if (dyn.season_index < 0 || dyn.season_index >= kSeasonCount) throw std::invalid_argument("season index out of range");
  s[k + dyn.season_index] = 1.0;
  s[k + 4] = std::min(dyn.months_since_last_test, 24) / 12.0;
  s[k + 5] = dyn.peer_norm;
  return s;
}

Eigen::VectorXd encode_state(const AgentRecord& agent, const FeatureSchema& schema, const TransformParams& transform,
                             std::span<const std::string> features) {
  const auto cols = transform.columns_for(features);
  const Eigen::VectorXd row = apply_row(transform, schema, agent);
  Eigen::VectorXd part(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) part[static_cast<Eigen::Index>(c)] = row[cols[c]];
  return encode_state(part, agent.dynamic);
}

DynamicState reset_dynamic(const DynamicState& initial) {
  DynamicState d;
  d.season_index = static_cast<int>(season_of(kFirstMonth));
  d.months_since_last_test = initial.months_since_last_test;
  d.peer_norm = 0.0;
  return d;
}

StepResult step_environment(std::span<const DynamicState> states, std::span<const int> actions, int month,
                            ModelKind model, const ScenarioSpec* scenario, double peer_delta,
                            std::span<const double> barrier, const RewardSpec& rewards) {
  if (states.size() != actions.size()) throw DimensionError("one action per agent is required");
  if (!barrier.empty() && barrier.size() != states.size()) throw DimensionError("one barrier per agent is required");
  const Season season = season_of(month);
  const std::size_t n = states.size();
  StepResult out;
  out.rewards.resize(n);
  out.next.resize(n);
  out.next_month = month % kMonthsPerYear + 1;
  const int next_season = static_cast<int>(season_of(out.next_month));
  for (std::size_t i = 0; i < n; ++i) {
    const int a = actions[i];
    const bool tested = a != 0;
    const double b = tested && !barrier.empty() ? barrier[i] : 0.0;
    if (model == ModelKind::adoption)
      out.rewards[i] = adoption_reward(a, scenario, season, rewards) - b;
    else
      out.rewards[i] = tested ? frequency_reward(a, scenario, season, rewards) - b : rewards.no_test;
    out.testers += tested;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const bool tested = actions[i] != 0;
    DynamicState d = states[i];
    d.season_index = next_season;
    d.months_since_last_test = tested ? 0 : std::min(d.months_since_last_test + 1, 1200);
    const int others = out.testers - (tested ? 1 : 0);
    d.peer_norm = std::clamp(d.peer_norm + peer_delta * others, 0.0, 1.0);
    out.next[i] = d;
  }
  return out;
}

namespace {

void fill_dynamic(Eigen::MatrixXd& X, Eigen::Index k, const std::vector<DynamicState>& dyn) {
  X.bottomRows(6).setZero();
  for (std::size_t i = 0; i < dyn.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    X(k + dyn[i].season_index, c) = 1.0;
    X(k + 4, c) = std::min(dyn[i].months_since_last_test, 24) / 12.0;
    X(k + 5, c) = dyn[i].peer_norm;
  }
}

}  // namespace

EpisodeMetrics run_episode(const SimWorld& world, DqnLearner& learner, const EpisodeOptions& opts, int episode) {
  const int n = world.agents();
  const Eigen::Index k = world.static_state.cols();
  const int d = world.state_dim();
  if (learner.net().state_dim() != d || learner.net().actions() != action_count(opts.model))
    throw DimensionError("network shape does not match the world and model");
  const bool freq = opts.model == ModelKind::frequency;
  if (freq && (!opts.gate.net || opts.gate.net->state_dim() != d || opts.gate.net->actions() != 2))
    throw ConfigError("the frequency model needs an adoption gate network of matching shape");

  std::vector<DynamicState> dyn(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) dyn[static_cast<std::size_t>(i)] = reset_dynamic(world.initial[static_cast<std::size_t>(i)]);
  Eigen::MatrixXd X(d, n), Xn(d, n);
  X.topRows(k) = world.static_state.transpose();
  Xn.topRows(k) = X.topRows(k);
  fill_dynamic(X, k, dyn);

  std::vector<char> tested_any(static_cast<std::size_t>(n), 0);
  std::vector<int> last_af(static_cast<std::size_t>(n), 0), last_season(static_cast<std::size_t>(n), -1);
  EpisodeMetrics m;
  m.episode = episode;
  double loss_sum = 0.0;
  int month = kFirstMonth;
  Rng& rng = learner.rng();
  std::vector<int> actions(static_cast<std::size_t>(n));

  for (int t = 0; t < kMonthsPerEpisode; ++t) {
    std::vector<int> deciders;  // columns whose decision the learner made
    if (!freq) {
      actions = select_actions(learner.net(), X, learner.schedule(), rng);
      deciders.resize(static_cast<std::size_t>(n));
      std::iota(deciders.begin(), deciders.end(), 0);
    } else {
      const Eigen::MatrixXd qg = opts.gate.net->forward(X, Mode::eval);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::uniform_int_distribution<int> coin(0, 1);
      for (int i = 0; i < n; ++i) {
        const int g = u(rng) < opts.gate.epsilon ? coin(rng) : argmax(qg.col(i));
        actions[static_cast<std::size_t>(i)] = 0;
        if (g == 1) deciders.push_back(i);
      }
      if (!deciders.empty()) {
        Eigen::MatrixXd Xt(d, static_cast<Eigen::Index>(deciders.size()));
        for (std::size_t j = 0; j < deciders.size(); ++j) Xt.col(static_cast<Eigen::Index>(j)) = X.col(deciders[j]);
        const auto af = select_actions(learner.net(), Xt, learner.schedule(), rng);
        for (std::size_t j = 0; j < deciders.size(); ++j) actions[static_cast<std::size_t>(deciders[j])] = af[j] + 1;
      }
    }

    const StepResult step =
        step_environment(dyn, actions, month, opts.model, opts.scenario, opts.peer_delta, world.barrier, opts.rewards);
    fill_dynamic(Xn, k, step.next);
    const bool done = t == kMonthsPerEpisode - 1;
    const int season = static_cast<int>(season_of(month));

    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      m.total_reward += step.rewards[ui];
      if (actions[ui] != 0) {
        tested_any[ui] = 1;
        last_af[ui] = actions[ui];
        last_season[ui] = season;
      }
    }
    for (int i : deciders) {
      const auto ui = static_cast<std::size_t>(i);
      const int a = freq ? actions[ui] - 1 : actions[ui];
      if (opts.learn) learner.buffer().push({X.col(i), a, step.rewards[ui], Xn.col(i), done});
      if (opts.capture && opts.capture->size() < opts.capture_limit)
        opts.capture->push_back({X.col(i), a, step.rewards[ui], Xn.col(i), done});
    }
    if (opts.learn && learner.buffer().size() >= static_cast<std::size_t>(learner.config().batch)) {
      loss_sum += learner.train_step();
      ++m.train_steps;
    }
    dyn = step.next;
    X.bottomRows(6) = Xn.bottomRows(6);
    month = step.next_month;
  }

  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (!tested_any[ui]) continue;
    ++m.testers;
    if (freq) ++m.frequency_histogram[static_cast<std::size_t>(last_af[ui] - 1)];
    ++m.season_histogram[static_cast<std::size_t>(last_season[ui])];
  }
  m.mean_reward = m.total_reward / n;
  m.epsilon = learner.schedule().epsilon();
  m.loss = m.train_steps ? loss_sum / m.train_steps : std::numeric_limits<double>::quiet_NaN();
  return m;
}

// ---------------------------------------------------------------------------

ConvergenceTracker::ConvergenceTracker(ConvergenceConfig cfg) : cfg_(cfg) {}

bool ConvergenceTracker::update(int episode, double testers) {
  series_.push_back(testers);
  sum_ += testers;
  const auto w = static_cast<std::size_t>(cfg_.window);
  if (series_.size() > w) sum_ -= series_[series_.size() - 1 - w];
  if (series_.size() >= w) {
    const double ma = sum_ / static_cast<double>(w);
    if (prev_ma_) {
      const double rel = std::abs(ma - *prev_ma_) / std::max(std::abs(*prev_ma_), 1.0);
      streak_ = rel < cfg_.rel_tol ? streak_ + 1 : 0;
      if (streak_ >= cfg_.patience && !converged_at_) converged_at_ = episode;
    }
    prev_ma_ = ma;
  }
  return converged_at_.has_value();
}

std::optional<int> detect_convergence(std::span<const double> testers, const ConvergenceConfig& cfg) {
  ConvergenceTracker t(cfg);
  for (std::size_t i = 0; i < testers.size(); ++i)
    if (t.update(static_cast<int>(i) + 1, testers[i])) break;
  return t.converged_at();
}

DivergenceError::DivergenceError(const std::string& what, nlohmann::json last_checkpoint, int episode)
    : TrainingError(what), checkpoint_(std::move(last_checkpoint)), episode_(episode) {}

RunResult train_run(const SimConfig& config, const SimWorld& full_world, const RunStart& start) {
  config.validate();
  const SimWorld world = config.agents == full_world.agents() ? full_world : full_world.head(config.agents);
  const int d = world.state_dim();
  const int A = action_count(config.model);
  if (config.model == ModelKind::frequency && !start.gate.net)
    throw ConfigError("the frequency model needs a trained adoption gate");

  DqnLearner learner;
  if (start.checkpoint) {
    learner = DqnLearner::from_checkpoint(*start.checkpoint);
    if (learner.net().state_dim() != d || learner.net().actions() != A)
      throw ConfigError("baseline checkpoint does not match the state encoding or action count");
    learner.reset_for_finetune(derive_seed(config.seed, 1));
  } else {
    learner = DqnLearner(d, A, config.train, config.seed);
  }

  EpisodeOptions opts;
  opts.model = config.model;
  opts.scenario = config.scenario ? &scenario_by_id(*config.scenario) : nullptr;
  opts.peer_delta = config.peer_delta;
  opts.rewards = config.rewards;
  opts.gate = start.gate;

  RunResult res;
  res.agents = world.agents();
  ConvergenceTracker tracker(config.convergence);
  for (int ep = 1; ep <= config.episodes; ++ep) {
    try {
      res.per_episode.push_back(run_episode(world, learner, opts, ep));
    } catch (const TrainingError& e) {
      // The loss is checked before the update is applied, so the weights are still finite here.
      throw DivergenceError(std::string(e.what()) + " in episode " + std::to_string(ep), learner.checkpoint(false), ep);
    }
    if (tracker.update(ep, res.per_episode.back().testers) && config.stop_at_convergence) break;
  }
  res.converged_at = tracker.converged_at();

  const std::size_t total = res.per_episode.size();
  const std::size_t tail = std::min<std::size_t>(total, static_cast<std::size_t>(config.convergence.window));
  double testers = 0.0;
  for (std::size_t i = total - tail; i < total; ++i) {
    const auto& m = res.per_episode[i];
    testers += m.testers;
    for (int a = 0; a < kFrequencyActions; ++a) res.final_frequency[static_cast<std::size_t>(a)] += m.frequency_histogram[static_cast<std::size_t>(a)];
    for (int s = 0; s < kSeasonCount; ++s) res.final_season[static_cast<std::size_t>(s)] += m.season_histogram[static_cast<std::size_t>(s)];
  }
  res.final_testers = static_cast<int>(std::lround(testers / static_cast<double>(tail)));
  for (auto& v : res.final_frequency) v /= static_cast<double>(tail);
  for (auto& v : res.final_season) v /= static_cast<double>(tail);
  res.decision_performance_pct = 100.0 * res.final_testers / res.agents;
  res.checkpoint = learner.checkpoint(false);

  // Held-out evaluation: a fresh episode whose experiences are never trained on.
  std::vector<Experience> eval;
  EpisodeOptions eopts = opts;
  eopts.learn = false;
  eopts.capture = &eval;
  eopts.capture_limit = static_cast<std::size_t>(config.eval_experiences);
  while (eval.size() < eopts.capture_limit) {
    const std::size_t before = eval.size();
    run_episode(world, learner, eopts, static_cast<int>(total) + 1);
    if (eval.size() == before) break;
  }
  if (eval.empty()) {
    res.final_mse = std::numeric_limits<double>::quiet_NaN();
  } else {
    const auto y = bellman_targets(std::span<const Experience>(eval), learner.net(), learner.target_net(),
                                   learner.config().gamma);
    Eigen::MatrixXd S(d, static_cast<Eigen::Index>(eval.size()));
    for (std::size_t i = 0; i < eval.size(); ++i) S.col(static_cast<Eigen::Index>(i)) = eval[i].s;
    const Eigen::MatrixXd q = learner.net().forward(S, Mode::eval);
    std::vector<double> qa(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) qa[i] = q(eval[i].a, static_cast<Eigen::Index>(i));
    res.final_mse = mse(y, qa);
  }
  return res;
}

}  // namespace wellsim
