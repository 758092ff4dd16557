#include "sqil/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sqil/network.hpp"
#include "sqil/replay.hpp"
#include "sqil/scenario.hpp"

namespace sqil {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

DemoSet generate_demonstrations(const GridNav& env, double gamma, int n, RandomStream& rng) {
  if (n < 1) throw ContractError("generate_demonstrations: n must be >= 1");
  SoftQFunction expert = soft_value_iteration(env, gamma);
  const PolicyFn policy = stochastic_policy(expert, env);
  std::vector<Rollout> rollouts;
  rollouts.reserve(n);
  Metrics metrics;
  metrics.episodes = n;
  int successes = 0;
  double total_return = 0.0;
  for (int i = 0; i < n; ++i) {
    rollouts.push_back(env.rollout(policy, env.config().demo_init, rng));
    const Rollout& r = rollouts.back();
    if (r.terminated_by == TerminationKind::Goal) ++successes;
    for (const Transition& t : r.transitions)
      total_return += env.realized_reward(t.state, t.action, t.next_state);
  }
  metrics.success_rate = static_cast<double>(successes) / n;
  metrics.avg_return = total_return / n;
  return DemoSet{std::move(rollouts), std::move(expert), metrics};
}

// ---------------------------------------------------------------------------
// TrainConfig JSON

namespace {

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["algorithm"] = to_string(cfg.algorithm);
  j["gamma"] = cfg.gamma;
  j["lambda_samp"] = cfg.lambda_samp;
  j["lambda_demo"] = cfg.lambda_demo;
  j["demo_reward"] = cfg.demo_reward;
  j["samp_reward"] = cfg.samp_reward;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["max_gradient_steps"] = cfg.max_gradient_steps;
  j["env_steps_per_gradient_step"] = cfg.env_steps_per_gradient_step;
  j["sampling_policy"] =
      cfg.sampling_policy == SamplingPolicy::Uniform ? "uniform" : "imitation";
  j["eval_every"] = cfg.eval_every;
  j["eval_episodes"] = cfg.eval_episodes;
  j["convergence_window"] = cfg.convergence_window;
  j["convergence_tolerance"] = cfg.convergence_tolerance;
  j["seed"] = cfg.seed;
  j["hidden_sizes"] = cfg.hidden_sizes;
  j["samp_capacity"] = cfg.samp_capacity;
  j["target_update_every"] = cfg.target_update_every;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  if (j.contains("algorithm")) cfg.algorithm = algorithm_from_string(j["algorithm"]);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.lambda_samp = j.value("lambda_samp", cfg.lambda_samp);
  cfg.lambda_demo = j.value("lambda_demo", cfg.lambda_demo);
  cfg.demo_reward = j.value("demo_reward", cfg.demo_reward);
  cfg.samp_reward = j.value("samp_reward", cfg.samp_reward);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.max_gradient_steps = j.value("max_gradient_steps", cfg.max_gradient_steps);
  cfg.env_steps_per_gradient_step =
      j.value("env_steps_per_gradient_step", cfg.env_steps_per_gradient_step);
  if (j.contains("sampling_policy")) {
    const std::string s = j["sampling_policy"];
    if (s == "uniform") cfg.sampling_policy = SamplingPolicy::Uniform;
    else if (s == "imitation") cfg.sampling_policy = SamplingPolicy::Imitation;
    else throw ConfigError("unknown sampling_policy: " + s);
  }
  cfg.eval_every = j.value("eval_every", cfg.eval_every);
  cfg.eval_episodes = j.value("eval_episodes", cfg.eval_episodes);
  cfg.convergence_window = j.value("convergence_window", cfg.convergence_window);
  cfg.convergence_tolerance = j.value("convergence_tolerance", cfg.convergence_tolerance);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.hidden_sizes = j.value("hidden_sizes", cfg.hidden_sizes);
  cfg.samp_capacity = j.value("samp_capacity", cfg.samp_capacity);
  cfg.target_update_every = j.value("target_update_every", cfg.target_update_every);
  validate(cfg);
  return cfg;
}

}  // namespace

TrainConfig load_train_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
    return train_config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("invalid config file " + path + ": " + e.what());
  }
}

void save_train_config_file(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << train_config_to_json(cfg).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Gradient-identity verification

namespace {

struct IdentityInstance {
  Network net;
  std::vector<Rollout> rollouts;   // chained, shared first observation, absorbing tails
  std::vector<Transition> samp;
  Eigen::MatrixXd inputs;          // [demo cur | demo next | samp cur | samp next]
  std::vector<Transition> demo;    // rollouts flattened, in input-column order
  std::vector<Eigen::Index> rollout_starts;  // column of each rollout's first transition
};

Observation random_obs(int dim, RandomStream& rng) {
  Observation o(dim);
  for (int i = 0; i < dim; ++i) o[i] = rng.uniform(-1.0, 1.0);
  return o;
}

IdentityInstance build_identity_instance(std::uint64_t seed, const IdentityCheckConfig& cfg) {
  if (cfg.obs_dim < 1 || cfg.action_count < 1 || cfg.rollout_count < 1 ||
      cfg.max_rollout_len < 1 || cfg.samp_count < 0)
    throw ConfigError("identity check: sizes must be positive");
  if (cfg.lambda_demo <= 0.0 || cfg.lambda_samp < 0.0)
    throw ConfigError("identity check: lambda_demo must be positive");

  RandomStream rng = RandomStream(seed).child(7);
  std::vector<int> sizes;
  sizes.push_back(cfg.obs_dim);
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(cfg.action_count);
  IdentityInstance inst{Network(sizes, rng.bits()), {}, {}, {}, {}, {}};

  const Observation shared_start = random_obs(cfg.obs_dim, rng);
  for (int r = 0; r < cfg.rollout_count; ++r) {
    const int len = 1 + static_cast<int>(rng.index(cfg.max_rollout_len));
    Rollout rollout;
    Observation cur = shared_start;
    for (int t = 0; t < len; ++t) {
      Transition tr;
      tr.obs = cur;
      tr.action = static_cast<int>(rng.index(cfg.action_count));
      tr.next_obs = random_obs(cfg.obs_dim, rng);
      tr.absorbing = (t == len - 1);  // terminal state's soft value is identically zero
      cur = tr.next_obs;
      rollout.transitions.push_back(std::move(tr));
    }
    rollout.terminated_by = TerminationKind::Goal;
    inst.rollouts.push_back(std::move(rollout));
  }
  for (int i = 0; i < cfg.samp_count; ++i) {
    Transition tr;
    tr.obs = random_obs(cfg.obs_dim, rng);
    tr.action = static_cast<int>(rng.index(cfg.action_count));
    tr.next_obs = random_obs(cfg.obs_dim, rng);
    tr.absorbing = rng.uniform01() < 0.3;
    inst.samp.push_back(std::move(tr));
  }

  for (const Rollout& r : inst.rollouts) {
    inst.rollout_starts.push_back(static_cast<Eigen::Index>(inst.demo.size()));
    inst.demo.insert(inst.demo.end(), r.transitions.begin(), r.transitions.end());
  }
  const Eigen::Index nd = static_cast<Eigen::Index>(inst.demo.size());
  const Eigen::Index ns = static_cast<Eigen::Index>(inst.samp.size());
  inst.inputs.resize(cfg.obs_dim, 2 * nd + 2 * ns);
  for (Eigen::Index i = 0; i < nd; ++i) {
    inst.inputs.col(i) = inst.demo[i].obs;
    inst.inputs.col(nd + i) = inst.demo[i].next_obs;
  }
  for (Eigen::Index i = 0; i < ns; ++i) {
    inst.inputs.col(2 * nd + i) = inst.samp[i].obs;
    inst.inputs.col(2 * nd + ns + i) = inst.samp[i].next_obs;
  }
  return inst;
}

// Sum-form squared Bellman error with full gradients through the bootstrap
// soft values; shared by both sides of the identity.
void accumulate_full_bellman(const Eigen::MatrixXd& outputs,
                             const std::vector<Transition>& batch, Eigen::Index cur0,
                             Eigen::Index next0, double weight, double reward_constant,
                             BatchLoss& acc) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::Index cur = cur0 + static_cast<Eigen::Index>(i);
    const Eigen::Index nxt = next0 + static_cast<Eigen::Index>(i);
    const double next_v = batch[i].absorbing ? 0.0 : soft_value(outputs.col(nxt));
    const double err = outputs(batch[i].action, cur) - reward_constant - next_v;  // gamma = 1
    acc.value += weight * err * err;
    acc.output_grads(batch[i].action, cur) += 2.0 * weight * err;
    if (!batch[i].absorbing)
      acc.output_grads.col(nxt) -= 2.0 * weight * err * boltzmann_policy(outputs.col(nxt));
  }
}

}  // namespace

IdentityReport verify_gradient_identity(std::uint64_t seed, const IdentityCheckConfig& cfg) {
  const IdentityInstance inst = build_identity_instance(seed, cfg);
  const Eigen::Index nd = static_cast<Eigen::Index>(inst.demo.size());
  const Eigen::Index ns = static_cast<Eigen::Index>(inst.samp.size());

  // Direct form: sum-BC plus Bellman penalties toward reward 0.
  BatchLossFn direct = [&](const Eigen::MatrixXd& out) {
    BatchLoss acc{0.0, Eigen::MatrixXd::Zero(out.rows(), out.cols())};
    for (Eigen::Index i = 0; i < nd; ++i) {
      acc.value += soft_value(out.col(i)) - out(inst.demo[i].action, i);
      acc.output_grads.col(i) += boltzmann_policy(out.col(i));
      acc.output_grads(inst.demo[i].action, i) -= 1.0;
    }
    accumulate_full_bellman(out, inst.demo, 0, nd, cfg.lambda_demo, 0.0, acc);
    accumulate_full_bellman(out, inst.samp, 2 * nd, 2 * nd + ns, cfg.lambda_samp, 0.0, acc);
    return acc;
  };

  // Telescoped form: soft value of the shared initial state once per rollout,
  // plus Bellman penalties toward the constant 1/(2*lambda_demo).
  const double reward_constant = 1.0 / (2.0 * cfg.lambda_demo);
  BatchLossFn telescoped = [&](const Eigen::MatrixXd& out) {
    BatchLoss acc{0.0, Eigen::MatrixXd::Zero(out.rows(), out.cols())};
    for (Eigen::Index start : inst.rollout_starts) {
      acc.value += soft_value(out.col(start));
      acc.output_grads.col(start) += boltzmann_policy(out.col(start));
    }
    accumulate_full_bellman(out, inst.demo, 0, nd, cfg.lambda_demo, reward_constant, acc);
    accumulate_full_bellman(out, inst.samp, 2 * nd, 2 * nd + ns, cfg.lambda_samp, 0.0, acc);
    return acc;
  };

  const Eigen::VectorXd direct_grad = loss_gradient(inst.net, inst.inputs, direct);
  const Eigen::VectorXd telescoped_grad = loss_gradient(inst.net, inst.inputs, telescoped);
  const Eigen::VectorXd fd_direct = finite_diff_gradient(inst.net, inst.inputs, direct);
  const Eigen::VectorXd fd_telescoped =
      finite_diff_gradient(inst.net, inst.inputs, telescoped);

  IdentityReport report;
  report.seed = seed;
  report.parameter_count = inst.net.parameter_count();
  for (Eigen::Index i = 0; i < direct_grad.size(); ++i) {
    const double scale = std::max(1.0, std::abs(direct_grad[i]));
    report.max_rel_analytic = std::max(
        report.max_rel_analytic, std::abs(direct_grad[i] - telescoped_grad[i]) / scale);
    report.max_rel_fd =
        std::max(report.max_rel_fd, std::abs(direct_grad[i] - fd_direct[i]) / scale);
    report.max_rel_fd = std::max(
        report.max_rel_fd, std::abs(telescoped_grad[i] - fd_telescoped[i]) /
                               std::max(1.0, std::abs(telescoped_grad[i])));
  }
  return report;
}

std::vector<IdentityReport> verify_gradient_identity_campaign(std::uint64_t base_seed,
                                                              int instances,
                                                              const IdentityCheckConfig& cfg) {
  if (instances < 1) throw ContractError("identity campaign: instances must be >= 1");
  std::vector<IdentityReport> reports;
  reports.reserve(instances);
  for (int i = 0; i < instances; ++i)
    reports.push_back(verify_gradient_identity(splitmix64(base_seed + i), cfg));
  return reports;
}

// ---------------------------------------------------------------------------
// Experiment grid

std::vector<std::string> experiment_algorithm_names() {
  return {"sqil", "bc", "rbc", "sqil-lambda0", "sqil-gamma0", "sqil-uniform", "random"};
}

namespace {

TrainConfig config_for_algorithm(const std::string& name, TrainConfig base) {
  base.algorithm = Algorithm::Sqil;
  if (name == "sqil") return base;
  if (name == "bc") {
    base.algorithm = Algorithm::Bc;
    return base;
  }
  if (name == "rbc") return make_ablation_config(base, AblationVariant::Rbc);
  if (name == "sqil-lambda0") return make_ablation_config(base, AblationVariant::Lambda0);
  if (name == "sqil-gamma0") return make_ablation_config(base, AblationVariant::Gamma0);
  if (name == "sqil-uniform") return make_ablation_config(base, AblationVariant::Uniform);
  throw ConfigError("unknown algorithm name: " + name);
}

std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (xs.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(xs.size()))};
}

struct BestPoint {
  double success_train = 0.0, return_train = 0.0;
  double success_demo = 0.0, return_demo = 0.0;
};

BestPoint best_of_report(const TrainReport& report) {
  BestPoint best;
  for (const auto& p : report.evals) {
    if (p.on_train_init.success_rate >= best.success_train) {
      best.success_train = p.on_train_init.success_rate;
      best.return_train = p.on_train_init.avg_return;
    }
    if (p.on_demo_init.success_rate >= best.success_demo) {
      best.success_demo = p.on_demo_init.success_rate;
      best.return_demo = p.on_demo_init.avg_return;
    }
  }
  return best;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write summary: " + path);
  out << "algorithm,column,seeds,mean_success,stderr_success,mean_return,stderr_return\n";
  out << std::setprecision(17);
  for (const SummaryRow& r : rows)
    out << r.algorithm << ',' << r.column << ',' << r.seeds << ',' << r.mean_success << ','
        << r.stderr_success << ',' << r.mean_return << ',' << r.stderr_return << '\n';
}

void write_summary_text(const std::vector<SummaryRow>& rows, const ExperimentSpec& spec,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write summary: " + path);
  out << "scenario: " << spec.scenario << "   seeds: " << spec.seeds.size()
      << "   demos: " << spec.demo_count << "   eval episodes: " << spec.eval_episodes
      << "\n\n";
  std::map<std::string, std::map<std::string, const SummaryRow*>> by_alg;
  std::vector<std::string> order;
  for (const SummaryRow& r : rows) {
    if (!by_alg.count(r.algorithm)) order.push_back(r.algorithm);
    by_alg[r.algorithm][r.column] = &r;
  }
  out << std::left << std::setw(16) << "algorithm" << std::setw(26)
      << "success (train_init)" << std::setw(26) << "success (demo_init)" << "\n";
  out << std::string(68, '-') << "\n";
  out << std::fixed << std::setprecision(3);
  for (const std::string& alg : order) {
    out << std::setw(16) << alg;
    for (const char* col : {"train_init", "demo_init"}) {
      const SummaryRow* r = by_alg[alg].count(col) ? by_alg[alg][col] : nullptr;
      if (!r) {
        out << std::setw(26) << "-";
        continue;
      }
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << r->mean_success << " +/- "
           << r->stderr_success;
      out << std::setw(26) << cell.str();
    }
    out << "\n";
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.seeds.empty()) throw ConfigError("experiment needs at least one seed");
  if (spec.demo_count < 1) throw ConfigError("demo_count must be >= 1");
  if (spec.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (spec.algorithms.empty()) throw ConfigError("experiment needs at least one algorithm");

  const GridNavConfig scenario_cfg = resolve_scenario(spec.scenario);
  const GridNav env(scenario_cfg);

  TrainConfig base = spec.base_config;
  base.eval_episodes = spec.eval_episodes;

  const fs::path out_dir(spec.output_dir);
  fs::create_directories(out_dir / "runs");
  save_scenario_file(scenario_cfg, spec.scenario, (out_dir / "scenario.json").string());

  RandomStream demo_rng(spec.demo_seed);
  const DemoSet demos = generate_demonstrations(env, base.gamma, spec.demo_count, demo_rng);
  save_demonstrations(demos.rollouts, env.obs_dim(), env.action_count(),
                      (out_dir / "demos.txt").string());
  write_q_csv(demos.expert_q.table(), (out_dir / "expert_q.csv").string());

  // Expert and random baselines, evaluated per seed with the same protocol.
  struct BaselineCell {
    std::string algorithm;
    std::uint64_t seed;
    Metrics train_init, demo_init;
  };
  std::vector<BaselineCell> baselines;
  const PolicyFn random_policy = uniform_random_policy(env.action_count());
  for (std::uint64_t seed : spec.seeds) {
    RandomStream rng = RandomStream(seed).child(0xBA5E);
    BaselineCell expert{"expert", seed, {}, {}};
    expert.train_init =
        evaluate(demos.expert_q, env, env.config().train_init, spec.eval_episodes, rng);
    expert.demo_init =
        evaluate(demos.expert_q, env, env.config().demo_init, spec.eval_episodes, rng);
    baselines.push_back(expert);
    BaselineCell rnd{"random", seed, {}, {}};
    rnd.train_init = evaluate_policy(random_policy, env, env.config().train_init,
                                     spec.eval_episodes, rng);
    rnd.demo_init = evaluate_policy(random_policy, env, env.config().demo_init,
                                    spec.eval_episodes, rng);
    baselines.push_back(rnd);
  }
  {
    std::ofstream out(out_dir / "baselines.csv");
    out << "algorithm,seed,column,success,avg_return\n";
    out << std::setprecision(17);
    for (const BaselineCell& b : baselines) {
      out << b.algorithm << ',' << b.seed << ",train_init," << b.train_init.success_rate
          << ',' << b.train_init.avg_return << '\n';
      out << b.algorithm << ',' << b.seed << ",demo_init," << b.demo_init.success_rate
          << ',' << b.demo_init.avg_return << '\n';
    }
  }

  ExperimentResult result;
  result.output_dir = spec.output_dir;

  for (const std::string& alg : spec.algorithms) {
    for (std::uint64_t seed : spec.seeds) {
      CellResult cell;
      cell.algorithm = alg;
      cell.seed = seed;
      if (alg == "random") {
        for (const BaselineCell& b : baselines) {
          if (b.algorithm != "random" || b.seed != seed) continue;
          cell.ok = true;
          cell.best_success_train_init = b.train_init.success_rate;
          cell.return_train_init = b.train_init.avg_return;
          cell.best_success_demo_init = b.demo_init.success_rate;
          cell.return_demo_init = b.demo_init.avg_return;
        }
        result.cells.push_back(cell);
        continue;
      }
      const fs::path run_dir = out_dir / "runs" / alg / ("seed" + std::to_string(seed));
      fs::create_directories(run_dir);
      try {
        TrainConfig cfg = config_for_algorithm(alg, base);
        cfg.seed = seed;
        RandomStream rng(seed);
        const TrainReport report = train(env, demos.rollouts, cfg, rng);
        const BestPoint best = best_of_report(report);
        cell.ok = true;
        cell.best_success_train_init = best.success_train;
        cell.return_train_init = best.return_train;
        cell.best_success_demo_init = best.success_demo;
        cell.return_demo_init = best.return_demo;
        cell.halt_reason = to_string(report.halt_reason);
        cell.steps_run = report.steps_run;
        write_train_report_csv(report, (run_dir / "curve.csv").string());
        save_network(report.final_q->network(), (run_dir / "checkpoint.net").string());
        json run_summary;
        run_summary["algorithm"] = alg;
        run_summary["seed"] = seed;
        run_summary["halt_reason"] = cell.halt_reason;
        run_summary["steps_run"] = cell.steps_run;
        run_summary["best_success_train_init"] = cell.best_success_train_init;
        run_summary["best_success_demo_init"] = cell.best_success_demo_init;
        run_summary["return_train_init"] = cell.return_train_init;
        run_summary["return_demo_init"] = cell.return_demo_init;
        std::ofstream(run_dir / "summary.json") << run_summary.dump(2) << '\n';
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
        std::ofstream(run_dir / "error.txt") << e.what() << '\n';
      }
      result.cells.push_back(cell);
    }
  }

  // Summary rows: listed algorithms in order, expert last.
  auto add_rows = [&](const std::string& alg, const std::vector<double>& s_train,
                      const std::vector<double>& r_train, const std::vector<double>& s_demo,
                      const std::vector<double>& r_demo) {
    const auto [ms_t, se_t] = mean_stderr(s_train);
    const auto [mr_t, re_t] = mean_stderr(r_train);
    result.summary.push_back(SummaryRow{alg, "train_init", static_cast<int>(s_train.size()),
                                        ms_t, se_t, mr_t, re_t});
    const auto [ms_d, se_d] = mean_stderr(s_demo);
    const auto [mr_d, re_d] = mean_stderr(r_demo);
    result.summary.push_back(SummaryRow{alg, "demo_init", static_cast<int>(s_demo.size()),
                                        ms_d, se_d, mr_d, re_d});
  };
  for (const std::string& alg : spec.algorithms) {
    std::vector<double> s_train, r_train, s_demo, r_demo;
    for (const CellResult& cell : result.cells) {
      if (cell.algorithm != alg || !cell.ok) continue;
      s_train.push_back(cell.best_success_train_init);
      r_train.push_back(cell.return_train_init);
      s_demo.push_back(cell.best_success_demo_init);
      r_demo.push_back(cell.return_demo_init);
    }
    add_rows(alg, s_train, r_train, s_demo, r_demo);
  }
  {
    std::vector<double> s_train, r_train, s_demo, r_demo;
    for (const BaselineCell& b : baselines) {
      if (b.algorithm != "expert") continue;
      s_train.push_back(b.train_init.success_rate);
      r_train.push_back(b.train_init.avg_return);
      s_demo.push_back(b.demo_init.success_rate);
      r_demo.push_back(b.demo_init.avg_return);
    }
    add_rows("expert", s_train, r_train, s_demo, r_demo);
  }

  write_summary_csv(result.summary, (out_dir / "summary.csv").string());
  write_summary_text(result.summary, spec, (out_dir / "summary.txt").string());

  json manifest;
  manifest["scenario"] = spec.scenario;
  manifest["algorithms"] = spec.algorithms;
  manifest["seeds"] = spec.seeds;
  manifest["demo_count"] = spec.demo_count;
  manifest["demo_seed"] = spec.demo_seed;
  manifest["eval_episodes"] = spec.eval_episodes;
  manifest["train_config"] = train_config_to_json(base);
  manifest["expert_demo_metrics"] = {{"success_rate", demos.demo_metrics.success_rate},
                                     {"avg_return", demos.demo_metrics.avg_return},
                                     {"episodes", demos.demo_metrics.episodes}};
  {
    std::ostringstream hash_src;
    hash_src << train_config_to_json(base).dump();
    std::ifstream scenario_in(out_dir / "scenario.json");
    hash_src << scenario_in.rdbuf();
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0')
        << fnv1a_hash(hash_src.str());
    manifest["config_hash"] = hex.str();
  }
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << '\n';

  return result;
}

// ---------------------------------------------------------------------------
// Summary recomputation from per-run files

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

BestPoint best_from_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open curve: " + path);
  std::string line;
  std::getline(in, line);  // header
  BestPoint best;
  while (std::getline(in, line)) {
    const auto fields = split_csv_line(line);
    if (fields.size() < 6 || fields[2].empty()) continue;
    const double s_demo = std::stod(fields[2]);
    const double r_demo = std::stod(fields[3]);
    const double s_train = std::stod(fields[4]);
    const double r_train = std::stod(fields[5]);
    if (s_train >= best.success_train) {
      best.success_train = s_train;
      best.return_train = r_train;
    }
    if (s_demo >= best.success_demo) {
      best.success_demo = s_demo;
      best.return_demo = r_demo;
    }
  }
  return best;
}

}  // namespace

std::vector<SummaryRow> recompute_summary(const std::string& output_dir) {
  const fs::path out_dir(output_dir);
  std::vector<SummaryRow> rows;

  const fs::path runs = out_dir / "runs";
  if (fs::exists(runs)) {
    std::vector<std::string> algorithms;
    for (const auto& entry : fs::directory_iterator(runs))
      if (entry.is_directory()) algorithms.push_back(entry.path().filename().string());
    std::sort(algorithms.begin(), algorithms.end());
    for (const std::string& alg : algorithms) {
      std::vector<double> s_train, r_train, s_demo, r_demo;
      std::vector<fs::path> run_dirs;
      for (const auto& entry : fs::directory_iterator(runs / alg))
        if (entry.is_directory()) run_dirs.push_back(entry.path());
      std::sort(run_dirs.begin(), run_dirs.end());
      for (const fs::path& run_dir : run_dirs) {
        if (!fs::exists(run_dir / "curve.csv")) continue;  // failed cell
        const BestPoint best = best_from_curve_csv((run_dir / "curve.csv").string());
        s_train.push_back(best.success_train);
        r_train.push_back(best.return_train);
        s_demo.push_back(best.success_demo);
        r_demo.push_back(best.return_demo);
      }
      const auto [ms_t, se_t] = mean_stderr(s_train);
      const auto [mr_t, re_t] = mean_stderr(r_train);
      rows.push_back(SummaryRow{alg, "train_init", static_cast<int>(s_train.size()), ms_t,
                                se_t, mr_t, re_t});
      const auto [ms_d, se_d] = mean_stderr(s_demo);
      const auto [mr_d, re_d] = mean_stderr(r_demo);
      rows.push_back(SummaryRow{alg, "demo_init", static_cast<int>(s_demo.size()), ms_d,
                                se_d, mr_d, re_d});
    }
  }

  const fs::path baselines = out_dir / "baselines.csv";
  if (fs::exists(baselines)) {
    std::ifstream in(baselines);
    std::string line;
    std::getline(in, line);
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>,
                                                            std::vector<double>>>
        grouped;
    while (std::getline(in, line)) {
      const auto fields = split_csv_line(line);
      if (fields.size() < 5) continue;
      auto& [succ, ret] = grouped[{fields[0], fields[2]}];
      succ.push_back(std::stod(fields[3]));
      ret.push_back(std::stod(fields[4]));
    }
    for (const auto& [key, data] : grouped) {
      const auto [ms, se] = mean_stderr(data.first);
      const auto [mr, re] = mean_stderr(data.second);
      rows.push_back(SummaryRow{key.first, key.second,
                                static_cast<int>(data.first.size()), ms, se, mr, re});
    }
  }
  return rows;
}

std::vector<SummaryRow> load_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open summary: " + path);
  std::string line;
  std::getline(in, line);
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    const auto fields = split_csv_line(line);
    if (fields.size() < 7) continue;
    rows.push_back(SummaryRow{fields[0], fields[1], std::stoi(fields[2]),
                              std::stod(fields[3]), std::stod(fields[4]),
                              std::stod(fields[5]), std::stod(fields[6])});
  }
  return rows;
}

}  // namespace sqil
