#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqil/common.hpp"
#include "sqil/eval.hpp"
#include "sqil/gridnav.hpp"
#include "sqil/softq.hpp"
#include "sqil/trainers.hpp"

namespace sqil {

// Expert construction: exact soft value iteration on the true reward, then
// stochastic Boltzmann rollouts from the demo start distribution.
struct DemoSet {
  std::vector<Rollout> rollouts;
  SoftQFunction expert_q;
  Metrics demo_metrics;  // of the stochastic expert rollouts themselves
};
DemoSet generate_demonstrations(const GridNav& env, double gamma, int n, RandomStream& rng);

// One grid of runs: algorithms x seeds on a single scenario, trained on a
// shared demonstration set, evaluated from both start distributions.
struct ExperimentSpec {
  std::string scenario = "shifted-start";  // preset name or scenario file
  std::vector<std::string> algorithms = {"sqil", "bc"};
  int demo_count = 100;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int eval_episodes = 100;
  std::string output_dir = "out";
  std::uint64_t demo_seed = 9001;
  TrainConfig base_config;
};

// Algorithm names accepted in ExperimentSpec::algorithms.
std::vector<std::string> experiment_algorithm_names();

struct CellResult {
  std::string algorithm;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  // Best success over evaluation checkpoints, per start distribution, plus
  // the average return at that checkpoint.
  double best_success_train_init = 0.0;
  double best_success_demo_init = 0.0;
  double return_train_init = 0.0;
  double return_demo_init = 0.0;
  std::string halt_reason;
  int steps_run = 0;
};

struct SummaryRow {
  std::string algorithm;
  std::string column;  // "train_init" or "demo_init"
  int seeds = 0;
  double mean_success = 0.0;
  double stderr_success = 0.0;
  double mean_return = 0.0;
  double stderr_return = 0.0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;    // trained algorithms plus the random baseline
  std::vector<SummaryRow> summary;  // includes expert and random rows
  std::string output_dir;
};

ExperimentResult run_experiment(const ExperimentSpec& spec);

// Recomputes the summary table from the per-run CSVs on disk.
std::vector<SummaryRow> recompute_summary(const std::string& output_dir);
std::vector<SummaryRow> load_summary_csv(const std::string& path);

// Numerical check of the telescoping relation between the regularized-BC
// gradient and its Bellman-error form. Built on random instances with all
// rollouts sharing one initial observation, absorbing terminal transitions,
// gamma = 1, and unnormalized (sum-form) Bellman penalties, differentiated
// through the bootstrap targets.
struct IdentityCheckConfig {
  int obs_dim = 3;
  std::vector<int> hidden;  // empty = linear net; keep the parameter count tiny
  int action_count = 2;
  int rollout_count = 2;
  int max_rollout_len = 3;
  int samp_count = 3;
  double lambda_demo = 0.5;  // makes the completed-square reward constant 1
  double lambda_samp = 1.0;
};

struct IdentityReport {
  std::uint64_t seed = 0;
  int parameter_count = 0;
  double max_rel_analytic = 0.0;  // direct gradient vs telescoped form
  double max_rel_fd = 0.0;        // analytic vs central differences
  bool passed(double analytic_tol = 1e-6, double fd_tol = 1e-4) const {
    return max_rel_analytic <= analytic_tol && max_rel_fd <= fd_tol;
  }
};

IdentityReport verify_gradient_identity(std::uint64_t seed,
                                        const IdentityCheckConfig& cfg = {});
std::vector<IdentityReport> verify_gradient_identity_campaign(
    std::uint64_t base_seed, int instances, const IdentityCheckConfig& cfg = {});

// TrainConfig JSON files (all fields optional; missing ones keep defaults).
TrainConfig load_train_config_file(const std::string& path);
void save_train_config_file(const TrainConfig& cfg, const std::string& path);

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace sqil
