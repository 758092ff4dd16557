#pragma once

#include "sqil/common.hpp"
#include "sqil/gridnav.hpp"
#include "sqil/softq.hpp"

namespace sqil {

struct Metrics {
  double success_rate = 0.0;  // fraction of episodes ending at a goal cell
  double avg_return = 0.0;    // mean undiscounted sum of true rewards
  int episodes = 0;
};

// Deterministic evaluation policy: argmax of Q with lowest-index tie-breaking,
// expressed as a point-mass distribution.
PolicyFn argmax_policy(const SoftQFunction& q, const GridNav& env);

// Stochastic policy pi(a|s) proportional to exp(Q(s,a)).
PolicyFn stochastic_policy(const SoftQFunction& q, const GridNav& env);

PolicyFn uniform_random_policy(int action_count);

Metrics evaluate_policy(const PolicyFn& policy, const GridNav& env, const InitDist& init,
                        int episodes, RandomStream& rng);

// Runs the argmax policy of q for the given number of episodes.
Metrics evaluate(const SoftQFunction& q, const GridNav& env, const InitDist& init,
                 int episodes, RandomStream& rng);

}  // namespace sqil
