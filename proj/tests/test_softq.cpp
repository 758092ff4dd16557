#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sqil/scenario.hpp"
#include "sqil/softq.hpp"

using namespace sqil;

namespace {

Transition make_transition(int state, int action, int next_state, bool absorbing) {
  Transition t;
  t.state = state;
  t.action = action;
  t.next_state = next_state;
  t.absorbing = absorbing;
  return t;
}

Eigen::VectorXd random_q_row(RandomStream& rng, int n, double scale) {
  Eigen::VectorXd q(n);
  for (int i = 0; i < n; ++i) q[i] = rng.uniform(-scale, scale);
  return q;
}

}  // namespace

TEST_CASE("soft value basics") {
  CHECK(soft_value(Eigen::Vector2d(0.0, 0.0)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  Eigen::VectorXd single(1);
  single << -3.25;
  CHECK(soft_value(single) == doctest::Approx(-3.25).epsilon(1e-15));
  CHECK(soft_value(Eigen::Vector2d(1000.0, 1000.0)) ==
        doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
  Eigen::VectorXd empty(0);
  CHECK_THROWS_AS(soft_value(empty), ContractError);
}

TEST_CASE("soft value shift identity and bounds: random rows") {
  RandomStream rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(6));
    const Eigen::VectorXd q = random_q_row(rng, n, 50.0);
    const double c = rng.uniform(-100.0, 100.0);
    CHECK(soft_value((q.array() + c).matrix()) ==
          doctest::Approx(soft_value(q) + c).epsilon(1e-9));
    const double v = soft_value(q);
    CHECK(v >= q.maxCoeff());
    CHECK(v <= q.maxCoeff() + std::log(static_cast<double>(n)) + 1e-12);
  }
}

TEST_CASE("boltzmann policy values") {
  const ActionDistribution even = boltzmann_policy(Eigen::Vector2d(1.0, 1.0));
  CHECK(even[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(even[1] == doctest::Approx(0.5).epsilon(1e-12));

  const ActionDistribution skewed = boltzmann_policy(Eigen::Vector2d(std::log(2.0), 0.0));
  CHECK(skewed[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(skewed[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("boltzmann policy properties: random rows") {
  RandomStream rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(6));
    const Eigen::VectorXd q = random_q_row(rng, n, 30.0);
    const ActionDistribution p = boltzmann_policy(q);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.minCoeff() >= 0.0);
    const ActionDistribution shifted = boltzmann_policy((q.array() + 5.0).matrix());
    CHECK((p - shifted).cwiseAbs().maxCoeff() <= 1e-12);
    int qa, pa;
    q.maxCoeff(&qa);
    p.maxCoeff(&pa);
    CHECK(qa == pa);
  }
}

TEST_CASE("squared soft Bellman error: hand cases") {
  const SoftQFunction q = SoftQFunction::tabular(Eigen::MatrixXd::Zero(2, 2));
  const std::vector<Transition> live{make_transition(0, 0, 1, false)};
  const double expected = std::pow(1.0 + 0.9 * std::log(2.0), 2.0);
  CHECK(squared_soft_bellman_error(q, live, 1.0, 0.9) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(2.63683).epsilon(1e-5));

  const std::vector<Transition> dead{make_transition(0, 0, 1, true)};
  CHECK(squared_soft_bellman_error(q, dead, 0.0, 0.9) == 0.0);

  CHECK_THROWS_AS(squared_soft_bellman_error(q, {}, 0.0, 0.9), ContractError);
  CHECK(squared_soft_bellman_error(q, live, 1.0, 0.9, Norm::Sum) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("solved Q is a Bellman fixed point on sampled transitions") {
  GridNavConfig cfg = preset_scenario("matched-start");
  cfg.slip_prob = 0.0;  // deterministic so one sample is the expectation
  const GridNav env(cfg);
  const SoftQFunction q = soft_value_iteration(env, 0.9, 1e-12);

  RandomStream rng(31);
  const PolicyFn random_walk = [&](const Observation&) {
    return ActionDistribution::Constant(env.action_count(), 1.0 / env.action_count());
  };
  int checked = 0;
  for (int episode = 0; episode < 40; ++episode) {
    const Rollout r = env.rollout(random_walk, env.config().demo_init, rng);
    for (const Transition& t : r.transitions) {
      if (t.absorbing && !env.is_absorbing(t.next_state)) continue;  // step-limit cut
      const std::vector<Transition> batch{t};
      const double reward = env.expected_reward(t.state, t.action);
      CHECK(squared_soft_bellman_error(q, batch, reward, 0.9) <= 1e-10);
      CHECK(implied_reward(q, t, 0.9) == doctest::Approx(reward).epsilon(1e-10));
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("implied reward degenerate cases") {
  // With one action the soft value of a zero row is zero, so Q == 0 implies
  // a zero reward; with several actions the entropy term -gamma*log|A| remains.
  const SoftQFunction zero1 = SoftQFunction::tabular(Eigen::MatrixXd::Zero(3, 1));
  CHECK(implied_reward(zero1, make_transition(0, 0, 2, false), 0.9) == 0.0);
  const SoftQFunction zero = SoftQFunction::tabular(Eigen::MatrixXd::Zero(3, 4));
  CHECK(implied_reward(zero, make_transition(0, 1, 2, false), 0.9) ==
        doctest::Approx(-0.9 * std::log(4.0)).epsilon(1e-12));
  Eigen::MatrixXd table(2, 2);
  table << 3.0, -1.0, 0.5, 2.0;
  const SoftQFunction q = SoftQFunction::tabular(table);
  CHECK(implied_reward(q, make_transition(0, 1, 1, false), 0.0) == -1.0);
  CHECK(implied_reward(q, make_transition(1, 0, 0, true), 0.9) == 0.5);
}

TEST_CASE("soft value iteration analytic fixed points") {
  TabularMdp loop;
  loop.rewards = Eigen::MatrixXd::Constant(1, 1, 2.5);
  loop.kernels = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
  loop.absorbing = {false};
  const SoftQFunction q = soft_value_iteration(loop, 0.9, 1e-12);
  CHECK(q.table()(0, 0) == doctest::Approx(25.0).epsilon(1e-9));

  const GridNav env(preset_scenario("matched-start"));
  const SoftQFunction q0 = soft_value_iteration(env, 0.0);
  CHECK((q0.table() - env.tabular_mdp().rewards).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("soft value iteration contracts at rate gamma") {
  const GridNav env(preset_scenario("shifted-start"));
  std::vector<double> residuals;
  const double gamma = 0.9;
  const SoftQFunction q = soft_value_iteration(env, gamma, 1e-10, 100000, &residuals);
  REQUIRE(residuals.size() >= 3);
  CHECK(residuals.back() <= 1e-10);
  for (std::size_t i = 1; i < residuals.size(); ++i) {
    if (residuals[i - 1] <= 1e-13) break;  // at rounding noise the ratio is meaningless
    CHECK(residuals[i] < residuals[i - 1]);
    CHECK(residuals[i] <= gamma * residuals[i - 1] * (1.0 + 1e-9) + 1e-15);
  }

  // Independent re-evaluation of the fixed point, element by element.
  const TabularMdp mdp = env.tabular_mdp();
  const Eigen::MatrixXd& table = q.table();
  double worst = 0.0;
  for (int s = 0; s < mdp.state_count(); ++s) {
    for (int a = 0; a < mdp.action_count(); ++a) {
      double target = mdp.rewards(s, a);
      if (!mdp.absorbing[s]) {
        for (int s2 = 0; s2 < mdp.state_count(); ++s2) {
          if (mdp.kernels[a](s, s2) == 0.0 || mdp.absorbing[s2]) continue;
          target += gamma * mdp.kernels[a](s, s2) * soft_value(table.row(s2));
        }
      }
      if (mdp.absorbing[s]) target = mdp.rewards(s, a);
      worst = std::max(worst, std::abs(table(s, a) - target));
    }
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("soft value iteration reports non-convergence") {
  TabularMdp loop;
  loop.rewards = Eigen::MatrixXd::Constant(1, 1, 1.0);
  loop.kernels = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
  loop.absorbing = {false};
  CHECK_THROWS_AS(soft_value_iteration(loop, 0.99, 1e-12, 3), NumericalError);
  CHECK_THROWS_AS(soft_value_iteration(loop, 1.0, 1e-10), ContractError);
}

TEST_CASE("q table csv round-trips") {
  Eigen::MatrixXd table(3, 2);
  table << 1.5, -2.25, 0.0, 1e-17, 3.0, -4.5;
  std::stringstream io;
  write_q_csv(table, io);
  const Eigen::MatrixXd back = read_q_csv(io);
  CHECK((back - table).cwiseAbs().maxCoeff() == 0.0);
}
