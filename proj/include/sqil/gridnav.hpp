#pragma once

#include <Eigen/Dense>

#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sqil/common.hpp"

namespace sqil {

// Grid actions. Perpendicular slip maps Up/Down <-> Left/Right; Stay never slips.
enum class Action : int { Up = 0, Right = 1, Down = 2, Left = 3, Stay = 4 };
inline constexpr int kActionCount = 5;

// Distribution over starting cells.
struct InitDist {
  std::vector<std::pair<int, double>> support;  // (cell, probability)
};

struct GridNavConfig {
  int width = 5;
  int height = 5;
  std::set<int> goal_cells;
  std::set<int> hazard_cells;
  std::set<int> walls;
  double slip_prob = 0.0;  // chance a move deviates 90 degrees (split evenly left/right)
  int step_limit = 50;
  // True rewards; visible only to the expert solver and evaluation metrics.
  double goal_reward = 100.0;
  double step_reward = -1.0;
  double hazard_reward = -100.0;
  InitDist demo_init;
  InitDist train_init;
};

struct State {
  int cell = 0;
  int steps_elapsed = 0;
};

struct Transition {
  Observation obs;
  int action = 0;
  Observation next_obs;
  bool absorbing = false;
  int state = 0;       // cell ids, for tabular mode
  int next_state = 0;
};

enum class TerminationKind { Goal, Hazard, StepLimit };

struct Rollout {
  std::vector<Transition> transitions;
  TerminationKind terminated_by = TerminationKind::StepLimit;
};

// Dense view of the MDP for exact solving: rewards (S x A), one row-stochastic
// kernel per action (S x S), and the absorbing mask.
struct TabularMdp {
  Eigen::MatrixXd rewards;
  std::vector<Eigen::MatrixXd> kernels;
  std::vector<bool> absorbing;

  int state_count() const { return static_cast<int>(rewards.rows()); }
  int action_count() const { return static_cast<int>(rewards.cols()); }
};

// Policies map an observation to a distribution over actions.
using PolicyFn = std::function<ActionDistribution(const Observation&)>;

// Stochastic gridworld with absorbing goal/hazard cells and separately
// configurable demo/train initial-state distributions. Immutable after
// construction; stepping is pure given (state, rng).
class GridNav {
 public:
  explicit GridNav(GridNavConfig config);

  const GridNavConfig& config() const { return config_; }
  int width() const { return config_.width; }
  int height() const { return config_.height; }
  int cell_count() const { return config_.width * config_.height; }
  int state_count() const { return cell_count(); }
  static constexpr int action_count() { return kActionCount; }
  int obs_dim() const { return cell_count() + 2; }

  int cell_at(int x, int y) const { return y * config_.width + x; }
  int cell_x(int cell) const { return cell % config_.width; }
  int cell_y(int cell) const { return cell / config_.width; }

  bool is_wall(int cell) const;
  bool is_goal(int cell) const;
  bool is_hazard(int cell) const;
  bool is_absorbing(int cell) const { return is_goal(cell) || is_hazard(cell); }

  // P(next | cell, action) as a dense row over cells.
  const Eigen::VectorXd& transition_row(int cell, int action) const;

  // Expert-training reward R(s, a): step cost plus the expected entry bonus of
  // goal/hazard cells under the transition kernel. Zero at absorbing cells.
  double expected_reward(int cell, int action) const;

  // Realized reward of one observed transition; used for evaluation returns.
  double realized_reward(int cell, int action, int next_cell) const;

  Observation observe(const State& s) const;
  Observation observe_cell(int cell) const;

  // Samples the next state. Errors if s is absorbing or past the step limit.
  std::pair<State, bool> step(const State& s, int action, RandomStream& rng) const;

  int sample_init(const InitDist& init, RandomStream& rng) const;

  // Runs the policy from a sampled start until an absorbing transition.
  // Step-limit truncation marks the final transition absorbing.
  Rollout rollout(const PolicyFn& policy, const InitDist& init, RandomStream& rng) const;

  TabularMdp tabular_mdp() const;

 private:
  void validate() const;
  void build_oracle();

  GridNavConfig config_;
  std::vector<Eigen::VectorXd> rows_;  // cell * kActionCount + action -> row over cells
};

inline GridNav make_gridnav(GridNavConfig config) { return GridNav(std::move(config)); }

const char* to_string(TerminationKind kind);

}  // namespace sqil
