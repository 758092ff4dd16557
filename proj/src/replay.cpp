#include "sqil/replay.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace sqil {

ReplayBuffer::ReplayBuffer(std::span<const Rollout> demos, std::size_t samp_capacity) {
  if (demos.empty()) throw ConfigError("replay buffer needs at least one demonstration");
  if (samp_capacity == 0) throw ConfigError("sample capacity must be positive");
  for (const Rollout& r : demos)
    demo_.insert(demo_.end(), r.transitions.begin(), r.transitions.end());
  if (demo_.empty()) throw ConfigError("demonstrations contain no transitions");
  ring_.resize(samp_capacity);
}

const Transition& ReplayBuffer::samp_at(std::size_t i) const {
  if (i >= samp_count_) throw ContractError("samp_at: index out of range");
  return ring_[(head_ + i) % ring_.size()];
}

void ReplayBuffer::append(Transition t) {
  if (samp_count_ < ring_.size()) {
    ring_[(head_ + samp_count_) % ring_.size()] = std::move(t);
    ++samp_count_;
  } else {
    ring_[head_] = std::move(t);  // overwrite the oldest
    head_ = (head_ + 1) % ring_.size();
  }
}

std::pair<std::vector<Transition>, std::vector<Transition>> ReplayBuffer::sample_balanced(
    int batch_size, RandomStream& rng) const {
  if (batch_size < 2 || batch_size % 2 != 0)
    throw ConfigError("sample_balanced: batch size must be even and >= 2");
  const int half = batch_size / 2;
  std::vector<Transition> demo_batch;
  demo_batch.reserve(half);
  for (int i = 0; i < half; ++i)
    demo_batch.push_back(demo_[static_cast<std::size_t>(rng.index(demo_.size()))]);
  std::vector<Transition> samp_batch;
  if (samp_count_ > 0) {
    samp_batch.reserve(half);
    for (int i = 0; i < half; ++i)
      samp_batch.push_back(samp_at(static_cast<std::size_t>(rng.index(samp_count_))));
  }
  return {std::move(demo_batch), std::move(samp_batch)};
}

std::vector<Transition> ReplayBuffer::sample_demo(int n, RandomStream& rng) const {
  if (n <= 0) throw ConfigError("sample_demo: n must be positive");
  std::vector<Transition> batch;
  batch.reserve(n);
  for (int i = 0; i < n; ++i)
    batch.push_back(demo_[static_cast<std::size_t>(rng.index(demo_.size()))]);
  return batch;
}

void save_demonstrations(std::span<const Rollout> rollouts, int obs_dim, int action_count,
                         std::ostream& out) {
  out << "# sqil-demos v1 obs_dim=" << obs_dim << " actions=" << action_count << '\n';
  out << std::setprecision(17);
  for (std::size_t r = 0; r < rollouts.size(); ++r) {
    for (const Transition& t : rollouts[r].transitions) {
      if (t.obs.size() != obs_dim || t.next_obs.size() != obs_dim)
        throw ContractError("save_demonstrations: observation length mismatch");
      out << r << ' ' << t.state << ' ' << t.action << ' ' << t.next_state << ' '
          << (t.absorbing ? 1 : 0);
      for (Eigen::Index i = 0; i < t.obs.size(); ++i) out << ' ' << t.obs[i];
      for (Eigen::Index i = 0; i < t.next_obs.size(); ++i) out << ' ' << t.next_obs[i];
      out << '\n';
    }
  }
}

void save_demonstrations(std::span<const Rollout> rollouts, int obs_dim, int action_count,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open demonstration file for writing: " + path);
  save_demonstrations(rollouts, obs_dim, action_count, out);
}

std::vector<Rollout> load_demonstrations(std::istream& in, const GridNav& env) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("# sqil-demos v1 ", 0) != 0)
    throw ConfigError("unrecognized demonstration file header");
  int obs_dim = 0, actions = 0;
  if (std::sscanf(header.c_str(), "# sqil-demos v1 obs_dim=%d actions=%d", &obs_dim,
                  &actions) != 2)
    throw ConfigError("malformed demonstration header: " + header);
  if (obs_dim != env.obs_dim() || actions != env.action_count())
    throw ConfigError("demonstration file does not match the environment (obs_dim=" +
                      std::to_string(obs_dim) + ", actions=" + std::to_string(actions) + ")");

  std::vector<Rollout> rollouts;
  std::string line;
  long last_rollout = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    long rollout_idx;
    Transition t;
    int absorbing;
    if (!(ls >> rollout_idx >> t.state >> t.action >> t.next_state >> absorbing))
      throw ConfigError("malformed demonstration line: " + line);
    t.absorbing = absorbing != 0;
    t.obs.resize(obs_dim);
    t.next_obs.resize(obs_dim);
    for (int i = 0; i < obs_dim; ++i)
      if (!(ls >> t.obs[i])) throw ConfigError("truncated demonstration line");
    for (int i = 0; i < obs_dim; ++i)
      if (!(ls >> t.next_obs[i])) throw ConfigError("truncated demonstration line");
    if (rollout_idx != last_rollout) {
      if (rollout_idx != last_rollout + 1)
        throw ConfigError("demonstration rollout indices must be contiguous");
      rollouts.emplace_back();
      last_rollout = rollout_idx;
    }
    rollouts.back().transitions.push_back(std::move(t));
  }
  if (rollouts.empty()) throw ConfigError("demonstration file holds no transitions");
  for (Rollout& r : rollouts) {
    const Transition& last = r.transitions.back();
    if (!last.absorbing)
      throw ConfigError("demonstration rollout does not end on an absorbing transition");
    r.terminated_by = env.is_goal(last.next_state)     ? TerminationKind::Goal
                      : env.is_hazard(last.next_state) ? TerminationKind::Hazard
                                                       : TerminationKind::StepLimit;
  }
  return rollouts;
}

std::vector<Rollout> load_demonstrations(const std::string& path, const GridNav& env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open demonstration file: " + path);
  return load_demonstrations(in, env);
}

}  // namespace sqil
