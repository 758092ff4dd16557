#include "sqil/gridnav.hpp"

#include <algorithm>
#include <cmath>

namespace sqil {
namespace {

constexpr int kDx[kActionCount] = {0, 1, 0, -1, 0};
constexpr int kDy[kActionCount] = {1, 0, -1, 0, 0};

// 90-degree deviations of a move; Stay has none.
const int kPerp[4][2] = {
    {static_cast<int>(Action::Left), static_cast<int>(Action::Right)},   // Up
    {static_cast<int>(Action::Up), static_cast<int>(Action::Down)},      // Right
    {static_cast<int>(Action::Left), static_cast<int>(Action::Right)},   // Down
    {static_cast<int>(Action::Up), static_cast<int>(Action::Down)},      // Left
};

void check_init_dist(const InitDist& init, const GridNavConfig& cfg, const char* name) {
  if (init.support.empty())
    throw ConfigError(std::string(name) + ": empty initial-state support");
  double sum = 0.0;
  for (const auto& [cell, prob] : init.support) {
    if (cell < 0 || cell >= cfg.width * cfg.height)
      throw ConfigError(std::string(name) + ": cell " + std::to_string(cell) + " out of bounds");
    if (cfg.walls.count(cell))
      throw ConfigError(std::string(name) + ": cell " + std::to_string(cell) + " is a wall");
    if (cfg.goal_cells.count(cell) || cfg.hazard_cells.count(cell))
      throw ConfigError(std::string(name) + ": cell " + std::to_string(cell) + " is absorbing");
    if (prob < 0.0)
      throw ConfigError(std::string(name) + ": negative probability");
    sum += prob;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw ConfigError(std::string(name) + ": probabilities sum to " + std::to_string(sum));
}

}  // namespace

const char* to_string(TerminationKind kind) {
  switch (kind) {
    case TerminationKind::Goal: return "goal";
    case TerminationKind::Hazard: return "hazard";
    case TerminationKind::StepLimit: return "step_limit";
  }
  return "?";
}

GridNav::GridNav(GridNavConfig config) : config_(std::move(config)) {
  validate();
  build_oracle();
}

void GridNav::validate() const {
  const auto& c = config_;
  if (c.width <= 0 || c.height <= 0) throw ConfigError("grid dimensions must be positive");
  if (c.step_limit <= 0) throw ConfigError("step_limit must be positive");
  if (c.slip_prob < 0.0 || c.slip_prob > 1.0) throw ConfigError("slip_prob must lie in [0, 1]");
  const int n = c.width * c.height;
  for (const auto* cells : {&c.goal_cells, &c.hazard_cells, &c.walls}) {
    for (int cell : *cells) {
      if (cell < 0 || cell >= n)
        throw ConfigError("cell " + std::to_string(cell) + " out of bounds");
    }
  }
  for (int cell : c.goal_cells) {
    if (c.hazard_cells.count(cell) || c.walls.count(cell))
      throw ConfigError("cell sets overlap at " + std::to_string(cell));
  }
  for (int cell : c.hazard_cells) {
    if (c.walls.count(cell)) throw ConfigError("cell sets overlap at " + std::to_string(cell));
  }
  check_init_dist(c.demo_init, c, "demo_init");
  check_init_dist(c.train_init, c, "train_init");
}

bool GridNav::is_wall(int cell) const { return config_.walls.count(cell) > 0; }
bool GridNav::is_goal(int cell) const { return config_.goal_cells.count(cell) > 0; }
bool GridNav::is_hazard(int cell) const { return config_.hazard_cells.count(cell) > 0; }

void GridNav::build_oracle() {
  const int n = cell_count();
  rows_.assign(static_cast<std::size_t>(n) * kActionCount, Eigen::VectorXd::Zero(n));

  auto move_target = [&](int cell, int dir) {
    const int x = cell_x(cell) + kDx[dir];
    const int y = cell_y(cell) + kDy[dir];
    if (x < 0 || x >= config_.width || y < 0 || y >= config_.height) return cell;
    const int target = cell_at(x, y);
    return is_wall(target) ? cell : target;  // blocked moves are no-ops
  };

  for (int cell = 0; cell < n; ++cell) {
    for (int a = 0; a < kActionCount; ++a) {
      Eigen::VectorXd& row = rows_[static_cast<std::size_t>(cell) * kActionCount + a];
      if (is_absorbing(cell) || is_wall(cell)) {
        row[cell] = 1.0;  // self-loop; never stepped from in practice
        continue;
      }
      if (a == static_cast<int>(Action::Stay)) {
        row[cell] = 1.0;
        continue;
      }
      row[move_target(cell, a)] += 1.0 - config_.slip_prob;
      row[move_target(cell, kPerp[a][0])] += config_.slip_prob / 2.0;
      row[move_target(cell, kPerp[a][1])] += config_.slip_prob / 2.0;
    }
  }
}

const Eigen::VectorXd& GridNav::transition_row(int cell, int action) const {
  return rows_[static_cast<std::size_t>(cell) * kActionCount + action];
}

double GridNav::realized_reward(int cell, int action, int next_cell) const {
  (void)cell;
  (void)action;
  double r = config_.step_reward;
  if (is_goal(next_cell)) r += config_.goal_reward;
  if (is_hazard(next_cell)) r += config_.hazard_reward;
  return r;
}

double GridNav::expected_reward(int cell, int action) const {
  if (is_absorbing(cell) || is_wall(cell)) return 0.0;
  const Eigen::VectorXd& row = transition_row(cell, action);
  double r = config_.step_reward;
  for (int goal : config_.goal_cells) r += row[goal] * config_.goal_reward;
  for (int hazard : config_.hazard_cells) r += row[hazard] * config_.hazard_reward;
  return r;
}

Observation GridNav::observe_cell(int cell) const {
  if (cell < 0 || cell >= cell_count() || is_wall(cell))
    throw ContractError("observe: invalid cell " + std::to_string(cell));
  Observation obs = Observation::Zero(obs_dim());
  obs[cell] = 1.0;
  obs[cell_count()] = static_cast<double>(cell_x(cell)) / std::max(1, config_.width - 1);
  obs[cell_count() + 1] = static_cast<double>(cell_y(cell)) / std::max(1, config_.height - 1);
  return obs;
}

Observation GridNav::observe(const State& s) const { return observe_cell(s.cell); }

std::pair<State, bool> GridNav::step(const State& s, int action, RandomStream& rng) const {
  if (action < 0 || action >= kActionCount)
    throw ContractError("step: action index out of range");
  if (is_absorbing(s.cell))
    throw ContractError("step: cannot step from absorbing cell " + std::to_string(s.cell));
  if (s.steps_elapsed >= config_.step_limit)
    throw ContractError("step: state is past the step limit");
  const int next_cell = rng.sample(transition_row(s.cell, action));
  State next{next_cell, s.steps_elapsed + 1};
  const bool absorbing = is_absorbing(next_cell) || next.steps_elapsed >= config_.step_limit;
  return {next, absorbing};
}

int GridNav::sample_init(const InitDist& init, RandomStream& rng) const {
  check_init_dist(init, config_, "init");
  double u = rng.uniform01();
  for (const auto& [cell, prob] : init.support) {
    if (u < prob) return cell;
    u -= prob;
  }
  return init.support.back().first;
}

Rollout GridNav::rollout(const PolicyFn& policy, const InitDist& init, RandomStream& rng) const {
  Rollout out;
  State s{sample_init(init, rng), 0};
  while (true) {
    const Observation obs = observe(s);
    const ActionDistribution dist = policy(obs);
    if (dist.size() != kActionCount || !dist.allFinite() || dist.minCoeff() < -1e-12 ||
        std::abs(dist.sum() - 1.0) > 1e-6)
      throw ContractError("rollout: policy returned an invalid action distribution");
    const int action = rng.sample(dist);
    auto [next, absorbing] = step(s, action, rng);
    out.transitions.push_back(Transition{obs, action, observe_cell(next.cell), absorbing,
                                         s.cell, next.cell});
    if (absorbing) {
      out.terminated_by = is_goal(next.cell)     ? TerminationKind::Goal
                          : is_hazard(next.cell) ? TerminationKind::Hazard
                                                 : TerminationKind::StepLimit;
      break;
    }
    s = next;
  }
  return out;
}

TabularMdp GridNav::tabular_mdp() const {
  const int n = cell_count();
  TabularMdp mdp;
  mdp.rewards.resize(n, kActionCount);
  mdp.kernels.assign(kActionCount, Eigen::MatrixXd::Zero(n, n));
  mdp.absorbing.resize(n);
  for (int cell = 0; cell < n; ++cell) {
    mdp.absorbing[cell] = is_absorbing(cell);
    for (int a = 0; a < kActionCount; ++a) {
      mdp.rewards(cell, a) = expected_reward(cell, a);
      mdp.kernels[a].row(cell) = transition_row(cell, a).transpose();
    }
  }
  return mdp;
}

}  // namespace sqil
