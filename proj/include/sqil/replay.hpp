#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sqil/common.hpp"
#include "sqil/gridnav.hpp"

namespace sqil {

// Replay buffer with two partitions: demonstrations, pinned for the lifetime
// of the buffer, and agent samples in a FIFO ring that evicts the oldest
// entry at capacity. Single writer; concurrent reads only between writes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::span<const Rollout> demos, std::size_t samp_capacity = 50000);

  const std::vector<Transition>& demo() const { return demo_; }
  std::size_t demo_size() const { return demo_.size(); }
  std::size_t samp_size() const { return samp_count_; }
  std::size_t samp_capacity() const { return ring_.size(); }

  // Agent samples ordered oldest to newest.
  const Transition& samp_at(std::size_t i) const;

  void append(Transition t);

  // Exactly batch_size/2 uniform draws with replacement from each partition.
  // While the agent partition is still empty the second batch comes back
  // empty and the caller drops the corresponding loss term.
  std::pair<std::vector<Transition>, std::vector<Transition>> sample_balanced(
      int batch_size, RandomStream& rng) const;

  // Uniform draws with replacement from the demonstration partition.
  std::vector<Transition> sample_demo(int n, RandomStream& rng) const;

 private:
  std::vector<Transition> demo_;
  std::vector<Transition> ring_;
  std::size_t head_ = 0;        // index of the oldest entry
  std::size_t samp_count_ = 0;
};

inline ReplayBuffer init_with_demos(std::span<const Rollout> demos,
                                    std::size_t samp_capacity = 50000) {
  return ReplayBuffer(demos, samp_capacity);
}

// Demonstration files: line-delimited text, one transition per line.
//   header:  "# sqil-demos v1 obs_dim=<d> actions=<k>"
//   line:    rollout state action next_state absorbing obs[0..d) next_obs[0..d)
// Fields are space-separated; absorbing is 0/1. Rollout indices are contiguous
// and increasing.
void save_demonstrations(std::span<const Rollout> rollouts, int obs_dim, int action_count,
                         std::ostream& out);
void save_demonstrations(std::span<const Rollout> rollouts, int obs_dim, int action_count,
                         const std::string& path);

// Loads rollouts and recomputes each termination kind from the environment's
// goal/hazard sets.
std::vector<Rollout> load_demonstrations(std::istream& in, const GridNav& env);
std::vector<Rollout> load_demonstrations(const std::string& path, const GridNav& env);

}  // namespace sqil
