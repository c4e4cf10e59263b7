#include <cmath>

#include "wellsim/dqn.hpp"
#include "wellsim/error.hpp"

namespace wellsim {

const std::vector<int>& QNetwork::default_hidden() {
  static const std::vector<int> h{64, 128, 256, 512};
  return h;
}

const std::vector<double>& QNetwork::default_dropout() {
  static const std::vector<double> d{0.20, 0.25, 0.15, 0.20};
  return d;
}

QNetwork::QNetwork(int state_dim, int actions, std::vector<int> hidden, std::vector<double> dropout)
    : state_dim_(state_dim), actions_(actions), hidden_(std::move(hidden)), dropout_(std::move(dropout)) {
  if (state_dim < 1 || actions < 1) throw ConfigError("network needs a positive input and output size");
  if (dropout_.empty()) dropout_.assign(hidden_.size(), 0.0);
  if (dropout_.size() != hidden_.size()) throw ConfigError("one dropout rate per hidden layer is required");
  for (double r : dropout_)
    if (r < 0.0 || r >= 1.0) throw ConfigError("dropout rates must lie in [0, 1)");
  int in = state_dim;
  for (int h : hidden_) {
    if (h < 1) throw ConfigError("hidden layer sizes must be positive");
    layers_.push_back({Eigen::MatrixXd::Zero(h, in), Eigen::VectorXd::Zero(h)});
    in = h;
  }
  layers_.push_back({Eigen::MatrixXd::Zero(actions, in), Eigen::VectorXd::Zero(actions)});
}

void QNetwork::init_he_uniform(Rng& rng) {
  for (auto& l : layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weights.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = u(rng);
    l.bias.setZero();
  }
}

void QNetwork::set_zero() {
  for (auto& l : layers_) {
    l.weights.setZero();
    l.bias.setZero();
  }
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

bool QNetwork::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

Eigen::MatrixXd QNetwork::forward(const Eigen::MatrixXd& states, Mode mode, Rng* rng, ForwardCache* cache) const {
  if (states.rows() != state_dim_)
    throw DimensionError("state has dimension " + std::to_string(states.rows()) + ", network expects " +
                         std::to_string(state_dim_));
  if (!states.allFinite()) throw std::invalid_argument("non-finite value in network input");
  const bool dropout = mode == Mode::train;
  if (dropout && !rng) throw std::invalid_argument("train-mode forward pass needs an RNG for dropout");
  if (cache) *cache = ForwardCache{};

  Eigen::MatrixXd a = states;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    const auto& L = layers_[l];
    Eigen::MatrixXd z = L.weights * a;
    z.colwise() += L.bias;
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(z);
    }
    a = z.cwiseMax(0.0);
    const double rate = dropout_[l];
    if (dropout && rate > 0.0) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double keep = 1.0 / (1.0 - rate);
      Eigen::MatrixXd mask(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = u(*rng) < rate ? 0.0 : keep;
      a.array() *= mask.array();
      if (cache) cache->masks.push_back(std::move(mask));
    } else if (cache) {
      cache->masks.emplace_back();
    }
  }
  const auto& out = layers_.back();
  Eigen::MatrixXd q = out.weights * a;
  q.colwise() += out.bias;
  if (cache) cache->inputs.push_back(std::move(a));
  return q;
}

Eigen::VectorXd QNetwork::forward(const Eigen::VectorXd& state, Mode mode, Rng* rng) const {
  Eigen::MatrixXd s = state;
  return forward(s, mode, rng, nullptr).col(0);
}

Gradients QNetwork::backward(const ForwardCache& cache, const Eigen::MatrixXd& dq) const {
  const std::size_t L = layers_.size();
  if (cache.inputs.size() != L) throw std::invalid_argument("forward cache does not match the network");
  Gradients g;
  g.weights.resize(L);
  g.bias.resize(L);
  Eigen::MatrixXd delta = dq;
  for (std::size_t l = L; l-- > 0;) {
    g.weights[l] = delta * cache.inputs[l].transpose();
    g.bias[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd da = layers_[l].weights.transpose() * delta;
    const auto& mask = cache.masks[l - 1];
    if (mask.size() > 0) da.array() *= mask.array();
    delta = (cache.pre[l - 1].array() > 0.0).select(da.array(), 0.0).matrix();
  }
  return g;
}

double QNetwork::weight_norm_squared() const {
  double s = 0.0;
  for (const auto& l : layers_) s += l.weights.squaredNorm();
  return s;
}

nlohmann::json QNetwork::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    std::vector<double> w(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        w[static_cast<std::size_t>(r * l.weights.cols() + c)] = l.weights(r, c);
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"rows", l.weights.rows()}, {"cols", l.weights.cols()}, {"weights", w}, {"bias", b}});
  }
  return {{"state_dim", state_dim_}, {"actions", actions_}, {"hidden", hidden_}, {"dropout", dropout_},
          {"layers", layers}};
}

QNetwork QNetwork::from_json(const nlohmann::json& j) {
  QNetwork net(j.at("state_dim").get<int>(), j.at("actions").get<int>(), j.at("hidden").get<std::vector<int>>(),
               j.at("dropout").get<std::vector<double>>());
  const auto& lj = j.at("layers");
  if (lj.size() != net.layers_.size()) throw std::invalid_argument("checkpoint layer count mismatch");
  for (std::size_t i = 0; i < lj.size(); ++i) {
    auto& l = net.layers_[i];
    const auto w = lj[i].at("weights").get<std::vector<double>>();
    const auto b = lj[i].at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != l.weights.size() || static_cast<Eigen::Index>(b.size()) != l.bias.size())
      throw std::invalid_argument("checkpoint layer shape mismatch");
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        l.weights(r, c) = w[static_cast<std::size_t>(r * l.weights.cols() + c)];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = b[static_cast<std::size_t>(r)];
  }
  return net;
}

bool QNetwork::operator==(const QNetwork& other) const {
  if (state_dim_ != other.state_dim_ || actions_ != other.actions_ || hidden_ != other.hidden_ ||
      dropout_ != other.dropout_)
    return false;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].weights != other.layers_[i].weights || layers_[i].bias != other.layers_[i].bias) return false;
  return true;
}

int argmax(const Eigen::Ref<const Eigen::VectorXd>& q) {
  int best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = static_cast<int>(i);
  return best;
}

// ---------------------------------------------------------------------------

void adam_update(Eigen::Ref<Eigen::ArrayXd> param, const Eigen::Ref<const Eigen::ArrayXd>& grad,
                 Eigen::Ref<Eigen::ArrayXd> m, Eigen::Ref<Eigen::ArrayXd> v, double lr, const AdamConfig& cfg,
                 long t) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.square();
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  param -= lr * (m / c1) / ((v / c2).sqrt() + cfg.eps);
}

AdamOptimizer::AdamOptimizer(const QNetwork& net, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& l : net.layers()) {
    m_w_.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    v_w_.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    m_b_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    v_b_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
}

void AdamOptimizer::step(QNetwork& net, const Gradients& grads, double lr) {
  auto& layers = net.layers();
  if (grads.weights.size() != layers.size() || m_w_.size() != layers.size())
    throw std::invalid_argument("optimizer state does not match the network");
  ++t_;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    using Flat = Eigen::Map<Eigen::ArrayXd>;
    Flat w(layers[l].weights.data(), layers[l].weights.size());
    Flat mw(m_w_[l].data(), m_w_[l].size());
    Flat vw(v_w_[l].data(), v_w_[l].size());
    Eigen::Map<const Eigen::ArrayXd> gw(grads.weights[l].data(), grads.weights[l].size());
    adam_update(w, gw, mw, vw, lr, cfg_, t_);
    Flat b(layers[l].bias.data(), layers[l].bias.size());
    Flat mb(m_b_[l].data(), m_b_[l].size());
    Flat vb(v_b_[l].data(), v_b_[l].size());
    Eigen::Map<const Eigen::ArrayXd> gb(grads.bias[l].data(), grads.bias[l].size());
    adam_update(b, gb, mb, vb, lr, cfg_, t_);
  }
}

namespace {

nlohmann::json mats(const std::vector<Eigen::MatrixXd>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& M : v)
    out.push_back({{"rows", M.rows()}, {"cols", M.cols()},
                   {"data", std::vector<double>(M.data(), M.data() + M.size())}});
  return out;
}

nlohmann::json vecs(const std::vector<Eigen::VectorXd>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& x : v) out.push_back(std::vector<double>(x.data(), x.data() + x.size()));
  return out;
}

std::vector<Eigen::MatrixXd> mats_from(const nlohmann::json& j) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& mj : j) {
    const auto d = mj.at("data").get<std::vector<double>>();
    out.push_back(Eigen::Map<const Eigen::MatrixXd>(d.data(), mj.at("rows").get<Eigen::Index>(),
                                                    mj.at("cols").get<Eigen::Index>()));
  }
  return out;
}

std::vector<Eigen::VectorXd> vecs_from(const nlohmann::json& j) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& vj : j) {
    const auto d = vj.get<std::vector<double>>();
    out.push_back(Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
  }
  return out;
}

}  // namespace

nlohmann::json AdamOptimizer::to_json() const {
  return {{"beta1", cfg_.beta1}, {"beta2", cfg_.beta2}, {"eps", cfg_.eps}, {"t", t_},
          {"m_w", mats(m_w_)},   {"v_w", mats(v_w_)},   {"m_b", vecs(m_b_)}, {"v_b", vecs(v_b_)}};
}

AdamOptimizer AdamOptimizer::from_json(const nlohmann::json& j) {
  AdamOptimizer a;
  a.cfg_ = {j.at("beta1").get<double>(), j.at("beta2").get<double>(), j.at("eps").get<double>()};
  a.t_ = j.at("t").get<long>();
  a.m_w_ = mats_from(j.at("m_w"));
  a.v_w_ = mats_from(j.at("v_w"));
  a.m_b_ = vecs_from(j.at("m_b"));
  a.v_b_ = vecs_from(j.at("v_b"));
  return a;
}

}  // namespace wellsim
