#include "sqil/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>

#include "sqil/network.hpp"

namespace sqil {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "sqil") return Algorithm::Sqil;
  if (name == "bc") return Algorithm::Bc;
  if (name == "rbc") return Algorithm::Rbc;
  throw ConfigError("unknown algorithm: " + name);
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Sqil: return "sqil";
    case Algorithm::Bc: return "bc";
    case Algorithm::Rbc: return "rbc";
  }
  return "?";
}

const char* to_string(HaltReason r) {
  return r == HaltReason::Converged ? "converged" : "step-cap";
}

void validate(const TrainConfig& cfg) {
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
  if (cfg.lambda_samp < 0.0 || cfg.lambda_demo < 0.0)
    throw ConfigError("loss weights must be nonnegative");
  if (cfg.batch_size < 2 || cfg.batch_size % 2 != 0)
    throw ConfigError("batch_size must be even and >= 2");
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (cfg.max_gradient_steps < 1) throw ConfigError("max_gradient_steps must be >= 1");
  if (cfg.env_steps_per_gradient_step < 0)
    throw ConfigError("env_steps_per_gradient_step must be >= 0");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (cfg.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (cfg.convergence_window < 2) throw ConfigError("convergence_window must be >= 2");
  if (cfg.convergence_tolerance < 0.0)
    throw ConfigError("convergence_tolerance must be nonnegative");
  if (cfg.samp_capacity == 0) throw ConfigError("samp_capacity must be positive");
  for (int h : cfg.hidden_sizes)
    if (h <= 0) throw ConfigError("hidden sizes must be positive");
  if (!std::isfinite(cfg.demo_reward) || !std::isfinite(cfg.samp_reward))
    throw ConfigError("reward constants must be finite");
}

double TrainReport::best_success(bool on_train_init) const {
  double best = 0.0;
  for (const EvalPoint& p : evals) {
    const Metrics& m = on_train_init ? p.on_train_init : p.on_demo_init;
    best = std::max(best, m.success_rate);
  }
  return best;
}

double sqil_loss(const SoftQFunction& q, std::span<const Transition> demo_batch,
                 std::span<const Transition> samp_batch, const TrainConfig& cfg) {
  if (demo_batch.empty()) throw ContractError("sqil_loss: empty demonstration batch");
  double loss = squared_soft_bellman_error(q, demo_batch, cfg.demo_reward, cfg.gamma);
  if (!samp_batch.empty())
    loss += cfg.lambda_samp *
            squared_soft_bellman_error(q, samp_batch, cfg.samp_reward, cfg.gamma);
  return loss;
}

double bc_loss(const SoftQFunction& q, std::span<const Transition> demo_batch) {
  if (demo_batch.empty()) throw ContractError("bc_loss: empty demonstration batch");
  double loss = 0.0;
  for (const Transition& t : demo_batch) {
    const Eigen::VectorXd vals = q.values_at(t);
    loss += soft_value(vals) - vals[t.action];
  }
  return loss;
}

double rbc_loss(const SoftQFunction& q, std::span<const Transition> demo_batch,
                std::span<const Transition> samp_batch, const TrainConfig& cfg) {
  double loss = bc_loss(q, demo_batch);
  if (cfg.lambda_demo > 0.0)
    loss += cfg.lambda_demo * squared_soft_bellman_error(q, demo_batch, 0.0, cfg.gamma);
  if (!samp_batch.empty() && cfg.lambda_samp > 0.0)
    loss += cfg.lambda_samp * squared_soft_bellman_error(q, samp_batch, 0.0, cfg.gamma);
  return loss;
}

namespace {

Eigen::MatrixXd stack_obs(std::span<const Transition> demo, std::span<const Transition> samp,
                          bool next) {
  const Eigen::Index dim = (demo.empty() ? samp : demo)[0].obs.size();
  Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(demo.size() + samp.size()));
  Eigen::Index col = 0;
  for (const Transition& t : demo) out.col(col++) = next ? t.next_obs : t.obs;
  for (const Transition& t : samp) out.col(col++) = next ? t.next_obs : t.obs;
  return out;
}

// One-step targets r + gamma * soft_value(Q(s',.)), held constant during the
// gradient step (semi-gradient); absorbing transitions bootstrap zero.
Eigen::VectorXd bellman_targets(const Network& net, std::span<const Transition> batch,
                                double reward, double gamma) {
  Eigen::VectorXd targets(static_cast<Eigen::Index>(batch.size()));
  if (batch.empty()) return targets;
  const Eigen::MatrixXd next_q =
      net.forward_batch(stack_obs(batch, {}, /*next=*/true));
  for (Eigen::Index i = 0; i < targets.size(); ++i)
    targets[i] =
        reward + (batch[i].absorbing ? 0.0 : gamma * soft_value(next_q.col(i)));
  return targets;
}

// Shared state owned by a prepared loss closure.
struct LossBatches {
  std::vector<Transition> demo;
  std::vector<Transition> samp;
  Eigen::VectorXd demo_targets;
  Eigen::VectorXd samp_targets;
};

// Squared-error value/grads for one batch segment of columns, normalized by
// the segment size.
void accumulate_bellman(const Eigen::MatrixXd& outputs,
                        const std::vector<Transition>& batch,
                        const Eigen::VectorXd& targets, Eigen::Index col0, double weight,
                        BatchLoss& acc) {
  if (batch.empty()) return;
  const double scale = weight / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::Index col = col0 + static_cast<Eigen::Index>(i);
    const double err = outputs(batch[i].action, col) - targets[static_cast<Eigen::Index>(i)];
    acc.value += scale * err * err;
    acc.output_grads(batch[i].action, col) += 2.0 * scale * err;
  }
}

void accumulate_cloning(const Eigen::MatrixXd& outputs, const std::vector<Transition>& batch,
                        BatchLoss& acc) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::Index col = static_cast<Eigen::Index>(i);
    acc.value += soft_value(outputs.col(col)) - outputs(batch[i].action, col);
    acc.output_grads.col(col) += boltzmann_policy(outputs.col(col));
    acc.output_grads(batch[i].action, col) -= 1.0;
  }
}

bool window_converged(const std::vector<double>& losses, int window, double tol) {
  if (static_cast<int>(losses.size()) < window) return false;
  const auto tail = std::span(losses).last(static_cast<std::size_t>(window));
  const auto [lo, hi] = std::minmax_element(tail.begin(), tail.end());
  const double mean =
      std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(window);
  return *hi - *lo <= tol * (1.0 + std::abs(mean));
}

}  // namespace

PreparedLoss prepare_sqil_loss(const Network& target_net, std::span<const Transition> demo,
                               std::span<const Transition> samp, const TrainConfig& cfg) {
  if (demo.empty()) throw ContractError("prepare_sqil_loss: empty demonstration batch");
  auto data = std::make_shared<LossBatches>();
  data->demo.assign(demo.begin(), demo.end());
  data->samp.assign(samp.begin(), samp.end());
  data->demo_targets = bellman_targets(target_net, demo, cfg.demo_reward, cfg.gamma);
  data->samp_targets = bellman_targets(target_net, samp, cfg.samp_reward, cfg.gamma);
  const double lambda_samp = cfg.lambda_samp;
  PreparedLoss prep;
  prep.inputs = stack_obs(demo, samp, /*next=*/false);
  prep.loss_fn = [data, lambda_samp](const Eigen::MatrixXd& outputs) {
    BatchLoss acc{0.0, Eigen::MatrixXd::Zero(outputs.rows(), outputs.cols())};
    accumulate_bellman(outputs, data->demo, data->demo_targets, 0, 1.0, acc);
    accumulate_bellman(outputs, data->samp, data->samp_targets,
                       static_cast<Eigen::Index>(data->demo.size()), lambda_samp, acc);
    return acc;
  };
  return prep;
}

PreparedLoss prepare_bc_loss(std::span<const Transition> demo) {
  if (demo.empty()) throw ContractError("prepare_bc_loss: empty demonstration batch");
  auto data = std::make_shared<LossBatches>();
  data->demo.assign(demo.begin(), demo.end());
  PreparedLoss prep;
  prep.inputs = stack_obs(demo, {}, /*next=*/false);
  prep.loss_fn = [data](const Eigen::MatrixXd& outputs) {
    BatchLoss acc{0.0, Eigen::MatrixXd::Zero(outputs.rows(), outputs.cols())};
    accumulate_cloning(outputs, data->demo, acc);
    return acc;
  };
  return prep;
}

PreparedLoss prepare_rbc_loss(const Network& target_net, std::span<const Transition> demo,
                              std::span<const Transition> samp, const TrainConfig& cfg) {
  if (demo.empty()) throw ContractError("prepare_rbc_loss: empty demonstration batch");
  auto data = std::make_shared<LossBatches>();
  data->demo.assign(demo.begin(), demo.end());
  data->samp.assign(samp.begin(), samp.end());
  data->demo_targets = bellman_targets(target_net, demo, 0.0, cfg.gamma);
  data->samp_targets = bellman_targets(target_net, samp, 0.0, cfg.gamma);
  const double lambda_demo = cfg.lambda_demo;
  const double lambda_samp = cfg.lambda_samp;
  PreparedLoss prep;
  prep.inputs = stack_obs(demo, samp, /*next=*/false);
  prep.loss_fn = [data, lambda_demo, lambda_samp](const Eigen::MatrixXd& outputs) {
    BatchLoss acc{0.0, Eigen::MatrixXd::Zero(outputs.rows(), outputs.cols())};
    accumulate_cloning(outputs, data->demo, acc);
    accumulate_bellman(outputs, data->demo, data->demo_targets, 0, lambda_demo, acc);
    accumulate_bellman(outputs, data->samp, data->samp_targets,
                       static_cast<Eigen::Index>(data->demo.size()), lambda_samp, acc);
    return acc;
  };
  return prep;
}

TrainReport train(const GridNav& env, const std::vector<Rollout>& demos,
                  const TrainConfig& cfg, RandomStream& rng) {
  validate(cfg);
  if (demos.empty()) throw ConfigError("train: no demonstrations");

  RandomStream init_rng = rng.child(1);
  RandomStream batch_rng = rng.child(2);
  RandomStream env_rng = rng.child(3);

  std::vector<int> sizes;
  sizes.push_back(env.obs_dim());
  sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  sizes.push_back(env.action_count());
  Network net(sizes, init_rng.bits());
  Network target_net = net;
  AdamState adam;
  adam.learning_rate = cfg.learning_rate;

  ReplayBuffer buffer(demos, cfg.samp_capacity);
  State agent{env.sample_init(env.config().train_init, env_rng), 0};
  const ActionDistribution uniform =
      ActionDistribution::Constant(env.action_count(), 1.0 / env.action_count());

  TrainReport report;
  report.halt_reason = HaltReason::StepCap;

  auto run_eval = [&](int step) {
    RandomStream eval_rng = rng.child(0x45564100ull + static_cast<std::uint64_t>(step));
    const SoftQFunction q = SoftQFunction::approx(net);
    TrainReport::EvalPoint point;
    point.step = step;
    point.on_demo_init =
        evaluate(q, env, env.config().demo_init, cfg.eval_episodes, eval_rng);
    point.on_train_init =
        evaluate(q, env, env.config().train_init, cfg.eval_episodes, eval_rng);
    report.evals.push_back(point);
  };

  for (int step = 1; step <= cfg.max_gradient_steps; ++step) {
    double loss = 0.0;
    try {
      if (cfg.algorithm == Algorithm::Bc) {
        const std::vector<Transition> batch = buffer.sample_demo(cfg.batch_size, batch_rng);
        const PreparedLoss prep = prepare_bc_loss(batch);
        const Eigen::VectorXd grad = loss_gradient(net, prep.inputs, prep.loss_fn, &loss);
        adam_step(adam, net, grad);
      } else {
        const bool frozen = cfg.target_update_every > 0;
        if (frozen && (step - 1) % cfg.target_update_every == 0) target_net = net;
        const auto [demo_b, samp_b] = buffer.sample_balanced(cfg.batch_size, batch_rng);
        const PreparedLoss prep =
            cfg.algorithm == Algorithm::Sqil
                ? prepare_sqil_loss(frozen ? target_net : net, demo_b, samp_b, cfg)
                : prepare_rbc_loss(frozen ? target_net : net, demo_b, samp_b, cfg);
        const Eigen::VectorXd grad = loss_gradient(net, prep.inputs, prep.loss_fn, &loss);
        adam_step(adam, net, grad);
        for (int k = 0; k < cfg.env_steps_per_gradient_step; ++k) {
          const Observation obs = env.observe(agent);
          const ActionDistribution dist = cfg.sampling_policy == SamplingPolicy::Uniform
                                              ? uniform
                                              : boltzmann_policy(net.forward(obs));
          const int action = env_rng.sample(dist);
          auto [next, absorbing] = env.step(agent, action, env_rng);
          buffer.append(Transition{obs, action, env.observe_cell(next.cell), absorbing,
                                   agent.cell, next.cell});
          agent = absorbing ? State{env.sample_init(env.config().train_init, env_rng), 0}
                            : next;
        }
      }
    } catch (const NumericalError& e) {
      throw TrainingError(std::string("training diverged: ") + e.what(), step);
    }
    if (!std::isfinite(loss)) throw TrainingError("training loss diverged", step);
    report.losses.push_back(loss);
    report.steps_run = step;

    const bool last = step == cfg.max_gradient_steps;
    if (step % cfg.eval_every == 0 && !last) run_eval(step);
    if (window_converged(report.losses, cfg.convergence_window, cfg.convergence_tolerance)) {
      report.halt_reason = HaltReason::Converged;
      break;
    }
    if (last) break;
  }
  if (report.evals.empty() || report.evals.back().step != report.steps_run)
    run_eval(report.steps_run);
  report.final_q = SoftQFunction::approx(std::move(net));
  return report;
}

AblationVariant ablation_from_string(const std::string& name) {
  if (name == "lambda0") return AblationVariant::Lambda0;
  if (name == "gamma0") return AblationVariant::Gamma0;
  if (name == "uniform") return AblationVariant::Uniform;
  if (name == "rbc") return AblationVariant::Rbc;
  throw ConfigError("unknown ablation variant: " + name);
}

TrainConfig make_ablation_config(const TrainConfig& base, AblationVariant variant) {
  if (base.algorithm != Algorithm::Sqil)
    throw ConfigError("ablation variants start from a SQIL configuration");
  TrainConfig out = base;
  switch (variant) {
    case AblationVariant::Lambda0: out.lambda_samp = 0.0; break;
    case AblationVariant::Gamma0: out.gamma = 0.0; break;
    case AblationVariant::Uniform: out.sampling_policy = SamplingPolicy::Uniform; break;
    case AblationVariant::Rbc: out.algorithm = Algorithm::Rbc; break;
  }
  return out;
}

void write_train_report_csv(const TrainReport& report, std::ostream& out) {
  out << "step,loss,success_demo_init,return_demo_init,success_train_init,return_train_init\n";
  out << std::setprecision(17);
  std::size_t next_eval = 0;
  for (std::size_t i = 0; i < report.losses.size(); ++i) {
    const int step = static_cast<int>(i) + 1;
    out << step << ',' << report.losses[i];
    while (next_eval < report.evals.size() && report.evals[next_eval].step < step)
      ++next_eval;  // defensive; eval steps always align with recorded steps
    if (next_eval < report.evals.size() && report.evals[next_eval].step == step) {
      const auto& p = report.evals[next_eval];
      out << ',' << p.on_demo_init.success_rate << ',' << p.on_demo_init.avg_return << ','
          << p.on_train_init.success_rate << ',' << p.on_train_init.avg_return;
      ++next_eval;
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

void write_train_report_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open report CSV for writing: " + path);
  write_train_report_csv(report, out);
}

}  // namespace sqil
