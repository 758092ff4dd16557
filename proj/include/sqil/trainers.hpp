#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqil/common.hpp"
#include "sqil/eval.hpp"
#include "sqil/gridnav.hpp"
#include "sqil/replay.hpp"
#include "sqil/softq.hpp"

namespace sqil {

enum class Algorithm { Sqil, Bc, Rbc };
enum class SamplingPolicy { Imitation, Uniform };

Algorithm algorithm_from_string(const std::string& name);
const char* to_string(Algorithm a);

struct TrainConfig {
  Algorithm algorithm = Algorithm::Sqil;
  double gamma = 0.9;
  double lambda_samp = 1.0;   // weight of the agent-sample Bellman term
  double lambda_demo = 0.5;   // RBC only; 1/(2*lambda_demo) = 1 matches the demo reward
  double demo_reward = 1.0;
  double samp_reward = 0.0;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int max_gradient_steps = 4000;
  int env_steps_per_gradient_step = 1;
  SamplingPolicy sampling_policy = SamplingPolicy::Imitation;
  int eval_every = 400;
  int eval_episodes = 100;
  int convergence_window = 200;
  double convergence_tolerance = 1e-3;  // window max-min <= tol * (1 + mean)
  std::uint64_t seed = 0;
  std::vector<int> hidden_sizes = {64, 64};
  std::size_t samp_capacity = 50000;
  int target_update_every = 0;  // 0 = bootstrap from the live network
};

void validate(const TrainConfig& cfg);

enum class HaltReason { Converged, StepCap };
const char* to_string(HaltReason r);

struct TrainReport {
  std::vector<double> losses;  // one entry per gradient step
  struct EvalPoint {
    int step = 0;
    Metrics on_demo_init;
    Metrics on_train_init;
  };
  std::vector<EvalPoint> evals;
  std::optional<SoftQFunction> final_q;
  HaltReason halt_reason = HaltReason::StepCap;
  int steps_run = 0;

  double best_success(bool on_train_init) const;
};

// delta^2(demo, r_demo) + lambda_samp * delta^2(samp, r_samp); the sample term
// is dropped while the sample batch is empty.
double sqil_loss(const SoftQFunction& q, std::span<const Transition> demo_batch,
                 std::span<const Transition> samp_batch, const TrainConfig& cfg);

// Negative log-likelihood of demonstrated actions under the Boltzmann policy,
// summed over the batch: sum of soft_value(Q(s,.)) - Q(s,a). Nonnegative.
double bc_loss(const SoftQFunction& q, std::span<const Transition> demo_batch);

// bc_loss plus Bellman-error penalties with separate demo/sample weights:
// lambda_demo * delta^2(demo, 0) + lambda_samp * delta^2(samp, 0).
double rbc_loss(const SoftQFunction& q, std::span<const Transition> demo_batch,
                std::span<const Transition> samp_batch, const TrainConfig& cfg);

// The batched form of each loss as the trainer differentiates it: Bellman
// targets are computed once from target_net and held fixed (semi-gradient),
// while the cloning term is differentiated in full. The returned closure owns
// copies of the batches. With target_net equal to the evaluated network, the
// closure's value matches the corresponding *_loss above.
struct PreparedLoss {
  Eigen::MatrixXd inputs;  // observation columns
  BatchLossFn loss_fn;
};
PreparedLoss prepare_sqil_loss(const Network& target_net, std::span<const Transition> demo,
                               std::span<const Transition> samp, const TrainConfig& cfg);
PreparedLoss prepare_bc_loss(std::span<const Transition> demo);
PreparedLoss prepare_rbc_loss(const Network& target_net, std::span<const Transition> demo,
                              std::span<const Transition> samp, const TrainConfig& cfg);

// Algorithm 1 loop: gradient step on the configured loss, then one (or
// env_steps_per_gradient_step) environment transitions sampled with the
// imitation policy and appended to the buffer. BC trains purely supervised
// and never touches the environment. Halts when the trailing loss window
// stops moving or at the step cap.
TrainReport train(const GridNav& env, const std::vector<Rollout>& demos,
                  const TrainConfig& cfg, RandomStream& rng);

enum class AblationVariant { Lambda0, Gamma0, Uniform, Rbc };
AblationVariant ablation_from_string(const std::string& name);

// Returns base with exactly one field changed: lambda_samp=0, gamma=0,
// sampling_policy=uniform, or algorithm=rbc.
TrainConfig make_ablation_config(const TrainConfig& base, AblationVariant variant);

// CSV curve: one row per gradient step; evaluation columns are filled on
// checkpoint rows and empty elsewhere.
void write_train_report_csv(const TrainReport& report, std::ostream& out);
void write_train_report_csv(const TrainReport& report, const std::string& path);

}  // namespace sqil
