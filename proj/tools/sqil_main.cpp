#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "sqil/harness.hpp"
#include "sqil/network.hpp"
#include "sqil/replay.hpp"
#include "sqil/scenario.hpp"

namespace {

using namespace sqil;

int cmd_gen_demos(const std::string& scenario, int count, double gamma, std::uint64_t seed,
                  const std::string& out_path, const std::string& expert_q_path) {
  const GridNav env(resolve_scenario(scenario));
  RandomStream rng(seed);
  const DemoSet demos = generate_demonstrations(env, gamma, count, rng);
  save_demonstrations(demos.rollouts, env.obs_dim(), env.action_count(), out_path);
  if (!expert_q_path.empty()) write_q_csv(demos.expert_q.table(), expert_q_path);
  std::cout << "wrote " << count << " rollouts to " << out_path
            << "  (expert success " << demos.demo_metrics.success_rate << ", avg return "
            << demos.demo_metrics.avg_return << ")\n";
  return 0;
}

int cmd_train(const std::string& scenario, const std::string& demos_path,
              const std::string& algorithm, const std::string& config_path,
              std::uint64_t seed, const std::string& out_dir) {
  const GridNav env(resolve_scenario(scenario));
  const std::vector<Rollout> demos = load_demonstrations(demos_path, env);
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_train_config_file(config_path);
  cfg.algorithm = algorithm_from_string(algorithm);
  cfg.seed = seed;
  RandomStream rng(seed);
  const TrainReport report = train(env, demos, cfg, rng);

  std::filesystem::create_directories(out_dir);
  write_train_report_csv(report, out_dir + "/curve.csv");
  save_network(report.final_q->network(), out_dir + "/checkpoint.net");
  save_train_config_file(cfg, out_dir + "/config.json");
  std::cout << "halt: " << to_string(report.halt_reason) << " after " << report.steps_run
            << " steps\n"
            << "best success (train_init): " << report.best_success(true) << "\n"
            << "best success (demo_init):  " << report.best_success(false) << "\n"
            << "outputs in " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& scenario, const std::string& checkpoint,
             const std::string& qtable, const std::string& init, int episodes,
             std::uint64_t seed) {
  const GridNav env(resolve_scenario(scenario));
  if (checkpoint.empty() == qtable.empty())
    throw ConfigError("eval: pass exactly one of --checkpoint or --qtable");
  const SoftQFunction q = checkpoint.empty()
                              ? SoftQFunction::tabular(read_q_csv(qtable))
                              : SoftQFunction::approx(load_network(checkpoint));
  const InitDist& dist =
      init == "demo" ? env.config().demo_init : env.config().train_init;
  if (init != "demo" && init != "train")
    throw ConfigError("eval: --init must be 'demo' or 'train'");
  RandomStream rng(seed);
  const Metrics m = evaluate(q, env, dist, episodes, rng);
  std::cout << "episodes: " << m.episodes << "\nsuccess_rate: " << m.success_rate
            << "\navg_return: " << m.avg_return << "\n";
  return 0;
}

int cmd_ablate(const std::string& scenario, std::vector<std::string> algorithms,
               int seed_count, std::uint64_t first_seed, int demo_count, int eval_episodes,
               const std::string& config_path, const std::string& out_dir) {
  ExperimentSpec spec;
  spec.scenario = scenario;
  if (!algorithms.empty()) spec.algorithms = std::move(algorithms);
  else spec.algorithms = experiment_algorithm_names();
  spec.seeds.clear();
  for (int i = 0; i < seed_count; ++i) spec.seeds.push_back(first_seed + i);
  spec.demo_count = demo_count;
  spec.eval_episodes = eval_episodes;
  spec.output_dir = out_dir;
  if (!config_path.empty()) spec.base_config = load_train_config_file(config_path);
  const ExperimentResult result = run_experiment(spec);

  int failures = 0;
  for (const CellResult& cell : result.cells) {
    if (!cell.ok) {
      ++failures;
      std::cerr << "cell " << cell.algorithm << "/seed" << cell.seed
                << " failed: " << cell.error << "\n";
    }
  }
  std::ifstream summary(out_dir + "/summary.txt");
  std::cout << summary.rdbuf();
  std::cout << "full outputs in " << out_dir << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_verify_identity(int instances, std::uint64_t base_seed) {
  const auto reports = verify_gradient_identity_campaign(base_seed, instances);
  bool all_passed = true;
  std::cout << std::scientific << std::setprecision(3);
  for (const IdentityReport& r : reports) {
    const bool ok = r.passed();
    all_passed = all_passed && ok;
    std::cout << (ok ? "pass" : "FAIL") << "  seed=" << r.seed
              << "  params=" << r.parameter_count << "  analytic=" << r.max_rel_analytic
              << "  fd=" << r.max_rel_fd << "\n";
  }
  std::cout << (all_passed ? "identity verified on " : "identity FAILED on ") << instances
            << " instances\n";
  return all_passed ? 0 : 1;
}

int cmd_report(const std::string& dir, bool check) {
  const std::vector<SummaryRow> recomputed = recompute_summary(dir);
  std::cout << "algorithm,column,seeds,mean_success,stderr_success,mean_return,stderr_return\n";
  std::cout << std::setprecision(17);
  for (const SummaryRow& r : recomputed)
    std::cout << r.algorithm << ',' << r.column << ',' << r.seeds << ',' << r.mean_success
              << ',' << r.stderr_success << ',' << r.mean_return << ',' << r.stderr_return
              << '\n';
  if (!check) return 0;
  const std::vector<SummaryRow> stored = load_summary_csv(dir + "/summary.csv");
  int mismatches = 0;
  for (const SummaryRow& s : stored) {
    bool found = false;
    for (const SummaryRow& r : recomputed) {
      if (r.algorithm != s.algorithm || r.column != s.column) continue;
      found = true;
      const double d = std::max({std::abs(r.mean_success - s.mean_success),
                                 std::abs(r.stderr_success - s.stderr_success),
                                 std::abs(r.mean_return - s.mean_return),
                                 std::abs(r.stderr_return - s.stderr_return)});
      if (r.seeds != s.seeds || d > 1e-9) {
        ++mismatches;
        std::cerr << "mismatch for " << s.algorithm << "/" << s.column << " (delta " << d
                  << ")\n";
      }
    }
    if (!found) {
      ++mismatches;
      std::cerr << "row " << s.algorithm << "/" << s.column << " not recomputable\n";
    }
  }
  if (mismatches == 0) {
    std::cout << "summary matches recomputation\n";
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Imitation-learning lab: soft Q imitation, behavioral cloning, and "
               "regularized cloning on gridworld scenarios"};
  app.require_subcommand(1);

  std::string scenario = "shifted-start";
  std::string demos_path, config_path, checkpoint, qtable, expert_q_path;
  std::string out = "out";
  std::string init = "train";
  std::string algorithm = "sqil";
  std::vector<std::string> algorithms;
  int count = 100, episodes = 100, seed_count = 5, demo_count = 100;
  double gamma = 0.9;
  std::uint64_t seed = 1;
  bool check = false;

  auto* gen = app.add_subcommand("gen-demos", "Solve the expert and write demonstrations");
  gen->add_option("--scenario", scenario, "Preset name or scenario file")->required();
  gen->add_option("-n,--count", count, "Number of rollouts");
  gen->add_option("--gamma", gamma, "Discount for the expert solve");
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", demos_path, "Output demonstrations file")->required();
  gen->add_option("--expert-q", expert_q_path, "Also export the expert Q table (CSV)");

  auto* tr = app.add_subcommand("train", "Train one algorithm on saved demonstrations");
  tr->add_option("--scenario", scenario, "Preset name or scenario file")->required();
  tr->add_option("--demos", demos_path, "Demonstrations file")->required();
  tr->add_option("--algorithm", algorithm, "sqil | bc | rbc");
  tr->add_option("--config", config_path, "TrainConfig JSON file");
  tr->add_option("--seed", seed, "RNG seed");
  tr->add_option("--out", out, "Output directory");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint with the argmax policy");
  ev->add_option("--scenario", scenario, "Preset name or scenario file")->required();
  ev->add_option("--checkpoint", checkpoint, "Network checkpoint file");
  ev->add_option("--qtable", qtable, "Tabular Q CSV (e.g. the exported expert)");
  ev->add_option("--init", init, "Start distribution: demo | train");
  ev->add_option("--episodes", episodes, "Evaluation episodes");
  ev->add_option("--seed", seed, "RNG seed");

  auto* ab = app.add_subcommand("ablate", "Run the algorithm x seed grid with baselines");
  ab->add_option("--scenario", scenario, "Preset name or scenario file")->required();
  ab->add_option("--algorithms", algorithms,
                 "Subset of: sqil bc rbc sqil-lambda0 sqil-gamma0 sqil-uniform random");
  ab->add_option("--seeds", seed_count, "Number of seeds");
  ab->add_option("--first-seed", seed, "First seed value");
  ab->add_option("--demo-count", demo_count, "Demonstration rollouts");
  ab->add_option("--eval-episodes", episodes, "Episodes per evaluation");
  ab->add_option("--config", config_path, "Base TrainConfig JSON file");
  ab->add_option("--out", out, "Output directory")->required();

  auto* vi = app.add_subcommand("verify-identity",
                                "Check the regularized-cloning gradient identity");
  vi->add_option("--seeds", seed_count, "Number of random instances");
  vi->add_option("--seed", seed, "Base seed");

  auto* rp = app.add_subcommand("report", "Recompute a summary table from per-run CSVs");
  rp->add_option("--dir", out, "Experiment output directory")->required();
  rp->add_flag("--check", check, "Fail if the stored summary does not match");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  try {
    if (gen->parsed())
      return cmd_gen_demos(scenario, count, gamma, seed, demos_path, expert_q_path);
    if (tr->parsed())
      return cmd_train(scenario, demos_path, algorithm, config_path, seed, out);
    if (ev->parsed()) return cmd_eval(scenario, checkpoint, qtable, init, episodes, seed);
    if (ab->parsed())
      return cmd_ablate(scenario, algorithms, seed_count, seed, demo_count, episodes,
                        config_path, out);
    if (vi->parsed()) return cmd_verify_identity(seed_count, seed);
    if (rp->parsed()) return cmd_report(out, check);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
