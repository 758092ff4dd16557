#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sqil/harness.hpp"
#include "sqil/replay.hpp"
#include "sqil/scenario.hpp"

using namespace sqil;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sqil_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("demonstrations start from the demo distribution and reproduce byte-for-byte") {
  const GridNav env(preset_scenario("shifted-start"));
  auto generate = [&] {
    RandomStream rng(2025);
    return generate_demonstrations(env, 0.9, 100, rng);
  };
  const DemoSet demos = generate();
  CHECK(demos.rollouts.size() == 100);
  for (const Rollout& r : demos.rollouts) {
    bool in_support = false;
    for (const auto& [cell, prob] : env.config().demo_init.support)
      in_support = in_support || (r.transitions.front().state == cell && prob > 0.0);
    CHECK(in_support);
  }
  CHECK(demos.demo_metrics.episodes == 100);
  CHECK(demos.demo_metrics.success_rate > 0.5);

  const DemoSet again = generate();
  std::ostringstream a, b;
  save_demonstrations(demos.rollouts, env.obs_dim(), env.action_count(), a);
  save_demonstrations(again.rollouts, env.obs_dim(), env.action_count(), b);
  CHECK(a.str() == b.str());
}

TEST_CASE("near-greedy expert reaches the goal on a deterministic grid") {
  GridNavConfig cfg = preset_scenario("matched-start");
  cfg.slip_prob = 0.0;
  const GridNav env(cfg);
  RandomStream rng(7);
  const DemoSet demos = generate_demonstrations(env, 0.9, 1, rng);
  REQUIRE(demos.rollouts.size() == 1);
  CHECK(demos.rollouts[0].terminated_by == TerminationKind::Goal);
  CHECK_THROWS_AS(generate_demonstrations(env, 0.9, 0, rng), ContractError);
}

TEST_CASE("evaluation separates the expert from degenerate policies") {
  const GridNav env(preset_scenario("matched-start"));
  RandomStream rng(8);
  const SoftQFunction expert = soft_value_iteration(env, 0.9);
  const Metrics expert_m =
      evaluate(expert, env, env.config().demo_init, 200, rng);
  CHECK(expert_m.success_rate > 0.8);

  const SoftQFunction zero =
      SoftQFunction::tabular(Eigen::MatrixXd::Zero(env.state_count(), env.action_count()));
  const Metrics zero_m = evaluate(zero, env, env.config().demo_init, 200, rng);
  CHECK(zero_m.success_rate < expert_m.success_rate);

  GridNavConfig det = preset_scenario("matched-start");
  det.slip_prob = 0.0;
  const GridNav det_env(det);
  const Metrics one_shot =
      evaluate(soft_value_iteration(det_env, 0.9), det_env, det_env.config().demo_init, 1, rng);
  CHECK((one_shot.success_rate == 0.0 || one_shot.success_rate == 1.0));
}

TEST_CASE("gradient identity holds on the default instance family") {
  const IdentityReport r = verify_gradient_identity(4242);
  CHECK(r.parameter_count <= 20);
  CHECK(r.max_rel_analytic <= 1e-6);
  CHECK(r.max_rel_fd <= 1e-4);
  CHECK(r.passed());
}

TEST_CASE("gradient identity: single rollout of length one") {
  IdentityCheckConfig cfg;
  cfg.rollout_count = 1;
  cfg.max_rollout_len = 1;
  cfg.samp_count = 0;
  const IdentityReport r = verify_gradient_identity(99, cfg);
  CHECK(r.passed());
}

TEST_CASE("gradient identity campaign across twenty seeds") {
  const auto reports = verify_gradient_identity_campaign(1000, 20);
  CHECK(reports.size() == 20);
  for (const IdentityReport& r : reports) {
    CHECK(r.parameter_count <= 20);
    CHECK(r.passed());
  }
}

TEST_CASE("gradient identity respects a hidden layer too") {
  IdentityCheckConfig cfg;
  cfg.hidden = {2};
  cfg.rollout_count = 2;
  cfg.max_rollout_len = 4;
  const IdentityReport r = verify_gradient_identity(5, cfg);
  CHECK(r.parameter_count <= 20);
  CHECK(r.passed());
}

TEST_CASE("train config json round-trips") {
  const fs::path dir = fresh_dir("config_roundtrip");
  TrainConfig cfg;
  cfg.algorithm = Algorithm::Rbc;
  cfg.gamma = 0.75;
  cfg.lambda_samp = 2.5;
  cfg.hidden_sizes = {10, 20};
  cfg.sampling_policy = SamplingPolicy::Uniform;
  cfg.batch_size = 16;
  save_train_config_file(cfg, (dir / "cfg.json").string());
  const TrainConfig back = load_train_config_file((dir / "cfg.json").string());
  CHECK(back.algorithm == Algorithm::Rbc);
  CHECK(back.gamma == 0.75);
  CHECK(back.lambda_samp == 2.5);
  CHECK(back.hidden_sizes == std::vector<int>{10, 20});
  CHECK(back.sampling_policy == SamplingPolicy::Uniform);
  CHECK(back.batch_size == 16);
  CHECK_THROWS_AS(load_train_config_file((dir / "missing.json").string()), ConfigError);
}

TEST_CASE("scenario resolution falls back from presets to files") {
  CHECK(resolve_scenario("matched-start").demo_init.support ==
        resolve_scenario("matched-start").train_init.support);
  try {
    resolve_scenario("no/such/scenario.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("no/such/scenario.json") != std::string::npos);
  }

  const fs::path dir = fresh_dir("scenario_files");
  const GridNavConfig cfg = preset_scenario("shifted-start");
  save_scenario_file(cfg, "copy", (dir / "copy.json").string());
  const GridNavConfig back = resolve_scenario((dir / "copy.json").string());
  CHECK(back.width == cfg.width);
  CHECK(back.goal_cells == cfg.goal_cells);
  CHECK(back.hazard_cells == cfg.hazard_cells);
  CHECK(back.slip_prob == cfg.slip_prob);
  CHECK(back.train_init.support == cfg.train_init.support);
}

TEST_CASE("experiment grid writes runs, summaries, and recomputable statistics") {
  const fs::path dir = fresh_dir("experiment_grid");
  ExperimentSpec spec;
  spec.scenario = "matched-start";
  spec.algorithms = {"sqil", "bc", "random"};
  spec.seeds = {1, 2, 3};
  spec.demo_count = 5;
  spec.eval_episodes = 5;
  spec.output_dir = (dir / "run").string();
  spec.base_config.max_gradient_steps = 60;
  spec.base_config.eval_every = 30;
  spec.base_config.hidden_sizes = {8};
  spec.base_config.batch_size = 8;

  const ExperimentResult result = run_experiment(spec);
  CHECK(result.cells.size() == 9);
  for (const CellResult& cell : result.cells) CHECK(cell.ok);
  for (const std::string& alg : {"sqil", "bc"})
    for (int seed : {1, 2, 3}) {
      const fs::path run = dir / "run" / "runs" / alg / ("seed" + std::to_string(seed));
      CHECK(fs::exists(run / "curve.csv"));
      CHECK(fs::exists(run / "checkpoint.net"));
      CHECK(fs::exists(run / "summary.json"));
    }
  CHECK(fs::exists(dir / "run" / "demos.txt"));
  CHECK(fs::exists(dir / "run" / "expert_q.csv"));
  CHECK(fs::exists(dir / "run" / "manifest.json"));

  // Summary rows: 3 listed algorithms + expert, both columns each.
  CHECK(result.summary.size() == 8);

  // Hand-recompute the sqil train_init row from the per-cell bests.
  std::vector<double> bests;
  for (const CellResult& cell : result.cells)
    if (cell.algorithm == "sqil") bests.push_back(cell.best_success_train_init);
  const double mean = (bests[0] + bests[1] + bests[2]) / 3.0;
  double ss = 0.0;
  for (double b : bests) ss += (b - mean) * (b - mean);
  const double stderr_hand = std::sqrt(ss / 2.0) / std::sqrt(3.0);
  for (const SummaryRow& row : result.summary) {
    if (row.algorithm == "sqil" && row.column == "train_init") {
      CHECK(row.seeds == 3);
      CHECK(row.mean_success == doctest::Approx(mean).epsilon(1e-12));
      CHECK(row.stderr_success == doctest::Approx(stderr_hand).epsilon(1e-12));
    }
  }

  // Recomputation from per-run CSVs reproduces every stored row.
  const std::vector<SummaryRow> stored =
      load_summary_csv((dir / "run" / "summary.csv").string());
  const std::vector<SummaryRow> recomputed = recompute_summary((dir / "run").string());
  CHECK(stored.size() == recomputed.size());
  for (const SummaryRow& s : stored) {
    bool matched = false;
    for (const SummaryRow& r : recomputed) {
      if (r.algorithm != s.algorithm || r.column != s.column) continue;
      matched = true;
      CHECK(r.seeds == s.seeds);
      CHECK(r.mean_success == doctest::Approx(s.mean_success).epsilon(1e-12));
      CHECK(r.stderr_success == doctest::Approx(s.stderr_success).epsilon(1e-12));
      CHECK(r.mean_return == doctest::Approx(s.mean_return).epsilon(1e-12));
    }
    CHECK(matched);
  }
}

TEST_CASE("identical specs produce byte-identical outputs") {
  auto run_to = [](const fs::path& dir) {
    ExperimentSpec spec;
    spec.scenario = "matched-start";
    spec.algorithms = {"sqil"};
    spec.seeds = {11, 12};
    spec.demo_count = 4;
    spec.eval_episodes = 4;
    spec.output_dir = dir.string();
    spec.base_config.max_gradient_steps = 40;
    spec.base_config.eval_every = 20;
    spec.base_config.hidden_sizes = {8};
    spec.base_config.batch_size = 8;
    run_experiment(spec);
  };
  const fs::path a = fresh_dir("determinism_a");
  const fs::path b = fresh_dir("determinism_b");
  run_to(a);
  run_to(b);
  for (const char* rel :
       {"summary.csv", "baselines.csv", "demos.txt", "expert_q.csv",
        "runs/sqil/seed11/curve.csv", "runs/sqil/seed12/curve.csv"})
    CHECK(slurp(a / rel) == slurp(b / rel));
}

TEST_CASE("failed cells are recorded without stopping the grid") {
  const fs::path dir = fresh_dir("failing_cell");
  ExperimentSpec spec;
  spec.scenario = "matched-start";
  spec.algorithms = {"sqil", "bc"};
  spec.seeds = {1};
  spec.demo_count = 3;
  spec.eval_episodes = 2;
  spec.output_dir = (dir / "run").string();
  spec.base_config.max_gradient_steps = 20;
  spec.base_config.eval_every = 10;
  spec.base_config.hidden_sizes = {4};
  spec.base_config.batch_size = 4;
  spec.base_config.demo_reward = 1e200;  // sqil diverges; bc ignores rewards

  const ExperimentResult result = run_experiment(spec);
  REQUIRE(result.cells.size() == 2);
  CHECK_FALSE(result.cells[0].ok);
  CHECK(!result.cells[0].error.empty());
  CHECK(result.cells[1].ok);
  CHECK(fs::exists(dir / "run" / "runs" / "sqil" / "seed1" / "error.txt"));
}
