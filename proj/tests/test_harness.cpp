#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mcg/envs.hpp"
#include "mcg/harness.hpp"

using namespace mcg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mcg_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config defaults follow the environment") {
  const auto pd = ExperimentConfig::defaults("pd");
  CHECK(pd.trainer.batch_size == 128);
  CHECK(pd.trainer.temperature.start == 10.0);
  CHECK(pd.seeds.size() == 10);
  const auto grid = ExperimentConfig::defaults("grid");
  CHECK(grid.trainer.batch_size == 512);
  CHECK(grid.trainer.updates_per_iteration == 30);
  CHECK(grid.trainer.entropy.min == 0.001);
  const auto pg = ExperimentConfig::defaults("public-goods");
  CHECK(pg.trainer.batch_size == 256);
  CHECK(pg.seeds.size() == 5);
  CHECK_THROWS_AS(ExperimentConfig::defaults("chess"), ConfigError);
}

TEST_CASE("config parsing, overrides and round trip") {
  const auto c = parse_config_text(
      "# comment\n"
      "env.name = grid\n"
      "algorithm = dcl-decentralized-ic\n"
      "train.iterations = 7   # trailing comment\n"
      "train.lr_policy = 0.125\n"
      "train.optimizer = sgd\n"
      "run.seeds = 3, 4,9\n");
  CHECK(c.env.name == "grid");
  CHECK(c.algorithm == Algorithm::dcl_decentralized_ic);
  CHECK(c.trainer.iterations == 7);
  CHECK(c.trainer.lr_policy == 0.125);
  CHECK(c.trainer.optimizer == OptimizerKind::sgd);
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 4, 9});
  CHECK(c.trainer.batch_size == 512);
  CHECK(c.effective_trainer().mode == TrainMode::decentralized);
  CHECK(c.effective_trainer().ic_enabled);
  CHECK(parse_config_text(serialize_config(c)) == c);
  ExperimentConfig odd = c;
  odd.trainer.lr_value = 1.0 / 3.0;
  CHECK(parse_config_text(serialize_config(odd)) == odd);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config_text("env.name = pd\nnot.a.key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("env.name = pd\ntrain.iterations = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("env.name = pd\nalgorithm = magic\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("env.name = rpc\nenv.mega_step = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("env.name = pd\nrun.seeds = \n"), ConfigError);
  CHECK_THROWS_AS(parse_config_file("/nonexistent/config.txt"), ConfigError);
  for (auto a : {Algorithm::dcl, Algorithm::dcl_ic, Algorithm::dcl_decentralized,
                 Algorithm::dcl_decentralized_ic, Algorithm::independent_pg}) {
    CHECK(parse_algorithm(to_string(a)) == a);
  }
}

TEST_CASE("environment metadata round trip") {
  EnvConfig e;
  e.name = "public-goods";
  e.n_agents = 3;
  e.benefit_factor = 2.25;
  const EnvConfig back = env_from_meta(env_meta(e));
  CHECK(back.name == e.name);
  CHECK(back.n_agents == 3);
  CHECK(back.benefit_factor == 2.25);
  CHECK(make_env(back).n_agents() == 3);
}

TEST_CASE("metrics csv round trip and aggregation") {
  const GameSpec pd = envs::prisoners_dilemma();
  auto row = [](int it, std::uint64_t seed, double w) {
    MetricsRow r;
    r.iteration = it;
    r.seed = seed;
    r.returns = {w / 2, w / 2};
    r.discounted_returns = {w / 2, w / 2};
    r.welfare = w;
    r.agreement_rate = 0.1 * it;
    r.proposal_freq = {{0.25, 0.75}, {0.5, 0.5}};
    r.entropy_coef = 1.0 / 3.0;
    r.temperature = 1.0;
    return r;
  };
  std::stringstream a, b;
  write_metrics_csv(a, pd, {row(0, 1, -4.0), row(1, 1, -2.0)});
  write_metrics_csv(b, pd, {row(0, 2, -3.0), row(1, 2, -3.0), row(2, 2, -1.0)});
  CHECK(a.str().rfind("iteration,seed,return_a0,return_a1,disc_return_a0", 0) == 0);
  CHECK(a.str().find("proposal_freq_a1_D") != std::string::npos);
  const MetricsTable ta = read_metrics_csv(a);
  const MetricsTable tb = read_metrics_csv(b);
  REQUIRE(ta.rows.size() == 2);
  CHECK(ta.rows[0][ta.column("entropy_coef")] == 1.0 / 3.0);
  const MetricsTable agg = aggregate_metrics({ta, tb});
  REQUIRE(agg.rows.size() == 2);  // iteration 2 is missing from seed 1
  const int wm = agg.column("welfare_mean");
  const int ws = agg.column("welfare_stderr");
  CHECK(agg.rows[0][wm] == doctest::Approx(-3.5));
  CHECK(agg.rows[0][ws] == doctest::Approx(0.5));  // sd 0.7071 / sqrt(2)
  CHECK(agg.rows[1][wm] == doctest::Approx(-2.5));
  CHECK(agg.column("seed_mean") == -1);
  CHECK(agg.rows[0][agg.column("n_seeds")] == 2);
}

TEST_CASE("malformed metrics rows are skipped with a warning") {
  std::stringstream in("iteration,seed,welfare\n0,1,-2\n1,1\n2,1,abc\n3,1,-1\n");
  std::ostringstream warn;
  const MetricsTable t = read_metrics_csv(in, &warn);
  CHECK(t.rows.size() == 2);
  CHECK(warn.str().find("row 3") != std::string::npos);
  CHECK(warn.str().find("row 4") != std::string::npos);
}

TEST_CASE("run_experiment writes per-seed files and honors the output override") {
  const fs::path dir = scratch_dir("run");
  ExperimentConfig c = parse_config_text(
      "env.name = pd\ntrain.iterations = 12\ntrain.batch_size = 8\nrun.seeds = 1,2\n"
      "run.output_dir = /nonexistent/never\nrun.workers = 2\n");
  ::setenv(kOutputDirEnv, dir.c_str(), 1);
  const RunSummary s = run_experiment(c, 10);
  ::unsetenv(kOutputDirEnv);
  CHECK(s.output_dir == dir.string());
  CHECK(fs::exists(dir / "metrics_seed11.csv"));
  CHECK(fs::exists(dir / "metrics_seed12.csv"));
  CHECK(fs::exists(dir / "checkpoint_seed11.txt"));
  CHECK(fs::exists(dir / "metrics_aggregate.csv"));
  CHECK(parse_config_file((dir / "config.txt").string()) == c);

  std::ifstream m(dir / "metrics_seed11.csv");
  const MetricsTable t = read_metrics_csv(m);
  CHECK(t.rows.size() == 12);
  CHECK(t.rows[0][t.column("seed")] == 11);

  // Same seed and offset: identical bytes.
  const fs::path again = scratch_dir("run_again");
  c.output_dir = again.string();
  run_experiment(c, 10);
  CHECK(slurp(dir / "metrics_seed12.csv") == slurp(again / "metrics_seed12.csv"));

  const EvaluationReport r = evaluate_checkpoint((dir / "checkpoint_seed11.txt").string(), 50, 3, true);
  CHECK(r.episodes == 50);
  CHECK(r.returns.size() == 2);
  CHECK(r.probes.size() == 2);
  std::ostringstream out;
  write_evaluation(out, r);
  CHECK(out.str().find("welfare") != std::string::npos);
  CHECK(evaluate_checkpoint((dir / "checkpoint_seed11.txt").string(), 0, 3, false).returns.empty());
}

TEST_CASE("the defect proposer never proposes or plays C and never commits") {
  const GameSpec pd = envs::prisoners_dilemma();
  PolicyParams p = zero_policies(pd);
  p[0] = defect_proposer(pd, 0);
  const EvaluationReport r = evaluate(pd, p, 200, 1, true, false);
  CHECK(r.agreement_rate == 0.0);
  CHECK(r.returns[1] <= -2.0);
  CHECK_THROWS_AS(evaluate(envs::grid_game(4, 2), zero_policies(envs::grid_game(4, 2)), 5, 1, true, true),
                  ConfigError);
}

TEST_CASE("plots from per-seed metrics, and the empty case") {
  const fs::path dir = scratch_dir("plot");
  const GameSpec pd = envs::prisoners_dilemma();
  for (std::uint64_t seed : {1, 2}) {
    std::vector<MetricsRow> rows;
    for (int it = 0; it < 5; ++it) {
      MetricsRow r;
      r.iteration = it;
      r.seed = seed;
      r.returns = r.discounted_returns = {-1.0 * it, -1.0};
      r.welfare = -1.0 - it + static_cast<double>(seed);
      r.proposal_freq = {{0.5, 0.5}, {0.5, 0.5}};
      rows.push_back(r);
    }
    std::ofstream out(dir / ("metrics_seed" + std::to_string(seed) + ".csv"));
    write_metrics_csv(out, pd, rows);
  }
  std::ofstream(dir / "metrics_aggregate.csv") << "iteration,n_seeds,welfare_mean\n0,2,1\n";
  std::ostringstream warn;
  const auto files = plot_metrics((dir / "metrics_*.csv").string(), (dir / "plots").string(), {}, &warn);
  CHECK(files.size() == 3);  // disc_return_a0, disc_return_a1, welfare
  CHECK(warn.str().find("metrics_aggregate.csv") != std::string::npos);
  const std::string svg = slurp(files.back());
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("<polygon") != std::string::npos);

  const auto empty = plot_metrics((dir / "nothing_*.csv").string(), (dir / "empty").string(), {});
  REQUIRE(empty.size() == 1);
  CHECK(slurp(empty[0]).find("<svg") != std::string::npos);

  std::ostringstream w2;
  const auto missing = plot_metrics((dir / "metrics_seed*.csv").string(), (dir / "p2").string(), {"no_such"}, &w2);
  CHECK(missing.empty());
  CHECK(w2.str().find("no_such") != std::string::npos);
}
