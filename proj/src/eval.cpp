#include "sqil/eval.hpp"

namespace sqil {
namespace {

// Recover the cell id from the one-hot block of an observation; lets tabular Q
// functions act as policies without threading state ids through PolicyFn.
int cell_from_obs(const Observation& obs, int cell_count) {
  int best = 0;
  for (int i = 1; i < cell_count; ++i)
    if (obs[i] > obs[best]) best = i;
  return best;
}

}  // namespace

PolicyFn argmax_policy(const SoftQFunction& q, const GridNav& env) {
  const int cells = env.cell_count();
  return [&q, cells](const Observation& obs) {
    const Eigen::VectorXd vals = q.values(obs, cell_from_obs(obs, cells));
    int best = 0;
    for (int a = 1; a < vals.size(); ++a)
      if (vals[a] > vals[best]) best = a;  // ties keep the lowest index
    ActionDistribution dist = ActionDistribution::Zero(vals.size());
    dist[best] = 1.0;
    return dist;
  };
}

PolicyFn stochastic_policy(const SoftQFunction& q, const GridNav& env) {
  const int cells = env.cell_count();
  return [&q, cells](const Observation& obs) {
    return boltzmann_policy(q.values(obs, cell_from_obs(obs, cells)));
  };
}

PolicyFn uniform_random_policy(int action_count) {
  return [action_count](const Observation&) {
    return ActionDistribution::Constant(action_count, 1.0 / action_count);
  };
}

Metrics evaluate_policy(const PolicyFn& policy, const GridNav& env, const InitDist& init,
                        int episodes, RandomStream& rng) {
  if (episodes < 1) throw ContractError("evaluate: episodes must be >= 1");
  Metrics m;
  m.episodes = episodes;
  double total_return = 0.0;
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    const Rollout r = env.rollout(policy, init, rng);
    if (r.terminated_by == TerminationKind::Goal) ++successes;
    for (const Transition& t : r.transitions)
      total_return += env.realized_reward(t.state, t.action, t.next_state);
  }
  m.success_rate = static_cast<double>(successes) / episodes;
  m.avg_return = total_return / episodes;
  return m;
}

Metrics evaluate(const SoftQFunction& q, const GridNav& env, const InitDist& init, int episodes,
                 RandomStream& rng) {
  return evaluate_policy(argmax_policy(q, env), env, init, episodes, rng);
}

}  // namespace sqil
