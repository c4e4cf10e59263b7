#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "../support/checks.hpp"
#include "wellsim/dqn.hpp"
#include "wellsim/error.hpp"

using namespace wellsim;

namespace {

Experience tagged(double r) {
  Experience e;
  e.s = Eigen::VectorXd::Constant(2, r);
  e.s_next = e.s;
  e.r = r;
  return e;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.hidden = {8, 8};
  c.dropout = {0.2, 0.2};
  c.batch = 8;
  c.target_sync = 5;
  c.replay_capacity = 200;
  return c;
}

void fill(DqnLearner& l, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto batch = check::random_batch(rng, l.net().state_dim(), l.net().actions(), n);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto e = batch[i];
    e.done = i % 12 == 11;
    l.buffer().push(e);
  }
}

}  // namespace

TEST_SUITE("dqn") {
  TEST_CASE("analytic gradients match central differences") {
    std::size_t params = 0, skips = 0;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const auto r = check::gradient_check(seed);
      CAPTURE(seed);
      CHECK(r.max_rel_err < 1e-4);
      params += r.parameters;
      skips += r.kink_skips;
    }
    CHECK(params > 1000);
    CHECK(skips * 100 < params);
  }

  TEST_CASE("Bellman target examples") {
    const auto f = check::bellman_fixture();
    CHECK(check::bellman_fixture_error() < 1e-12);
    const std::vector<Experience> one{f.batch[0]};
    CHECK(bellman_targets(std::span<const Experience>(one), f.online, f.target, 0.0)[0] == 1.0);
    QNetwork other(3, 2, {}, {});
    CHECK_THROWS_AS(bellman_targets(std::span<const Experience>(one), other, f.target, 0.9), DimensionError);
  }

  TEST_CASE("Adam matches a hand-stepped update for five steps") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(check::adam_oracle_error(seed) < 1e-10);
    // first step moves each parameter by about lr against the gradient sign
    Eigen::ArrayXd p = Eigen::ArrayXd::Zero(2), m = p, v = p;
    Eigen::ArrayXd g(2);
    g << 3.0, -0.5;
    adam_update(p, g, m, v, 0.1, AdamConfig{}, 1);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-6));
  }

  TEST_CASE("mse and cumulative reward examples") {
    const std::vector<double> y{1.0, 2.0}, yh{1.5, 2.5};
    CHECK(mse(y, yh) == 0.25);
    const std::vector<double> a{0.0, 0.0, 0.0, 0.0}, b{2.0, -2.0, 2.0, -2.0};
    const std::vector<double> b2{4.0, -4.0, 4.0, -4.0};
    CHECK(mse(a, b2) == doctest::Approx(4.0 * mse(a, b)));
    CHECK_THROWS_AS(mse(y, a), DimensionError);

    const std::vector<double> ones{1.0, 1.0, 1.0};
    CHECK(cumulative_reward(ones, 1.0) == 3.0);
    CHECK(cumulative_reward(ones, 0.9) == doctest::Approx(2.71));
    CHECK(cumulative_reward({}, 0.9) == 0.0);
    CHECK_THROWS(cumulative_reward(ones, 1.5));
  }

  TEST_CASE("exploration schedule") {
    ExplorationSchedule s;
    CHECK(epsilon(s, 0) == doctest::Approx(0.9));
    CHECK(epsilon(s, 100'000) == doctest::Approx(0.3627).epsilon(1e-4));
    double prev = 2.0;
    for (long t = 0; t <= 1'000'000; t += 997) {
      const double e = epsilon(s, t);
      CHECK(e < prev);
      CHECK(e > 0.05);
      prev = e;
    }
    CHECK_THROWS(epsilon(s, -1));
    s.forced = 0.0;
    CHECK(s.epsilon() == 0.0);
  }

  TEST_CASE("select_action: greedy, ties and uniform exploration") {
    QNetwork net(2, 2, {}, {});
    net.set_zero();
    ExplorationSchedule s;
    s.forced = 0.0;
    Rng rng(1);
    CHECK(select_action(net, Eigen::Vector2d(1, 1), s, rng) == 0);  // tie goes to the lower index
    net.layers()[0].bias = Eigen::Vector2d(0.2, 0.9);
    CHECK(select_action(net, Eigen::Vector2d(1, 1), s, rng) == 1);
    CHECK(s.step == 2);

    s.forced = 1.0;
    const int n = 10'000;
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += select_action(net, Eigen::Vector2d(1, 1), s, rng);
    CHECK(std::abs(ones - n / 2.0) < 3.0 * std::sqrt(n * 0.25));

    Eigen::VectorXd q(4);
    q << 1, 3, 3, 2;
    CHECK(argmax(q) == 1);
  }

  TEST_CASE("replay buffer is FIFO and samples uniformly") {
    ReplayBuffer b(3);
    for (int i = 0; i < 5; ++i) b.push(tagged(i));
    CHECK(b.size() == 3);
    CHECK(b.at(0).r == 2.0);
    CHECK(b.at(2).r == 4.0);

    ReplayBuffer big(100);
    for (int i = 0; i < 100; ++i) big.push(tagged(i));
    Rng rng(3);
    std::map<std::size_t, int> hits;
    const int draws = 10'000;
    for (int i = 0; i < draws / 10; ++i) {
      const auto idx = big.sample_indices(10, rng);
      std::set<std::size_t> unique(idx.begin(), idx.end());
      CHECK(unique.size() == 10);
      for (auto k : idx) ++hits[k];
    }
    CHECK(hits.size() == 100);
    const double expect = draws / 100.0, sd = std::sqrt(draws * 0.01 * 0.99);
    int outside = 0;
    for (const auto& [k, c] : hits) outside += std::abs(c - expect) > 3.0 * sd;
    CHECK(outside <= 2);
    CHECK_THROWS_AS(b.sample(4, rng), TrainingError);
    const auto back = ReplayBuffer::from_json(b.to_json());
    CHECK(back.size() == 3);
    CHECK(back.at(0) == b.at(0));
  }

  TEST_CASE("forward pass") {
    QNetwork zero(5, 3, {4, 4}, {0.5, 0.5});
    zero.set_zero();
    CHECK(zero.forward(Eigen::VectorXd(Eigen::VectorXd::Ones(5)), Mode::eval).isZero());

    // one hidden unit: q = 2 * relu(x0 - x1 + 0.5) - 1
    QNetwork n(2, 1, {1}, {0.0});
    n.layers()[0].weights << 1.0, -1.0;
    n.layers()[0].bias << 0.5;
    n.layers()[1].weights << 2.0;
    n.layers()[1].bias << -1.0;
    CHECK(n.forward(Eigen::VectorXd(Eigen::Vector2d(1.0, 0.0)), Mode::eval)[0] == 2.0);
    CHECK(n.forward(Eigen::VectorXd(Eigen::Vector2d(0.0, 3.0)), Mode::eval)[0] == -1.0);

    QNetwork d(4, 2);
    Rng rng(4);
    d.init_he_uniform(rng);
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1, 1);
    CHECK(d.forward(x, Mode::eval) == d.forward(x, Mode::eval));
    CHECK(QNetwork::from_json(d.to_json()) == d);
    CHECK_THROWS_AS(d.forward(Eigen::VectorXd(Eigen::VectorXd::Ones(3)), Mode::eval), DimensionError);
  }

  TEST_CASE("target network only changes on sync") {
    DqnLearner l(4, 2, tiny_config(), 9);
    fill(l, 64, 1);
    const QNetwork before = l.target_net();
    for (int i = 0; i < 4; ++i) {
      l.train_step();
      CHECK(l.target_net() == before);
    }
    CHECK_FALSE(l.net() == before);
    l.train_step();
    CHECK(l.target_net() == l.net());
  }

  TEST_CASE("training is bit-reproducible and resumes from a checkpoint") {
    DqnLearner a(4, 2, tiny_config(), 11), b(4, 2, tiny_config(), 11);
    fill(a, 64, 2);
    fill(b, 64, 2);
    for (int i = 0; i < 7; ++i) CHECK(a.train_step() == b.train_step());
    CHECK(a.net() == b.net());

    DqnLearner c = DqnLearner::from_checkpoint(a.checkpoint(true));
    for (int i = 0; i < 6; ++i) CHECK(a.train_step() == c.train_step());
    CHECK(a.net() == c.net());
    CHECK(a.target_net() == c.target_net());
    CHECK(a.step_count() == c.step_count());

    DqnLearner empty(4, 2, tiny_config(), 1);
    CHECK_THROWS_AS(empty.train_step(), TrainingError);
  }

  TEST_CASE("fine-tune reset keeps weights only") {
    DqnLearner l(4, 2, tiny_config(), 12);
    fill(l, 64, 3);
    for (int i = 0; i < 3; ++i) l.train_step();
    const QNetwork w = l.net();
    l.reset_for_finetune(5);
    CHECK(l.net() == w);
    CHECK(l.target_net() == w);
    CHECK(l.step_count() == 0);
    CHECK(l.buffer().size() == 0);
  }

  TEST_CASE("learning rate decays stepwise with a floor") {
    TrainConfig c;
    c.lr = 0.1;
    CHECK(c.lr_at(0) == 0.1);
    CHECK(c.lr_at(99) == 0.1);
    CHECK(c.lr_at(100) == doctest::Approx(0.09));
    CHECK(c.lr_at(1'000'000) == c.lr_floor);
    c.lr = 1e-7;
    CHECK(c.lr_at(1'000'000) == 1e-7);
    CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
  }
}
