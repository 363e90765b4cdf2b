#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "mcg/envs.hpp"
#include "mcg/harness.hpp"
#include "mcg/oracle.hpp"

namespace {

int cmd_train(const std::string& config_path, std::uint64_t seed_offset) {
  const mcg::ExperimentConfig config = mcg::parse_config_file(config_path);
  const mcg::RunSummary summary = mcg::run_experiment(config, seed_offset);
  std::cout << "output_dir: " << summary.output_dir << '\n';
  for (const auto& f : summary.metrics_files) std::cout << "metrics: " << f << '\n';
  for (const auto& f : summary.checkpoint_files) std::cout << "checkpoint: " << f << '\n';
  std::cout << "aggregate: " << summary.aggregate_file << '\n';
  return 0;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed, const std::string& probe) {
  if (!probe.empty() && probe != "defect-proposer") {
    throw mcg::ConfigError("unknown probe '" + probe + "' (expected defect-proposer)");
  }
  const auto report = mcg::evaluate_checkpoint(checkpoint, episodes, seed, !probe.empty());
  mcg::write_evaluation(std::cout, report);
  return 0;
}

int cmd_verify(const std::string& env, const std::string& which) {
  if (env != "pd") throw mcg::ConfigError("verify-equilibrium supports --env pd only");
  const mcg::GameSpec spec = mcg::envs::prisoners_dilemma();
  std::vector<std::pair<std::string, std::vector<mcg::DeterministicStrategy>>> tuples;
  if (which == "starred" || which == "all") {
    tuples.emplace_back("starred (commit on (D,D) = 0)", mcg::pd::starred_tuple(spec, 0));
    tuples.emplace_back("starred (commit on (D,D) = 1)", mcg::pd::starred_tuple(spec, 1));
  }
  if (which == "mutual-defect" || which == "all") {
    tuples.emplace_back("mutual-defect", mcg::pd::mutual_defection_tuple(spec));
  }
  if (tuples.empty()) {
    throw mcg::ConfigError("unknown tuple '" + which + "' (expected starred, mutual-defect or all)");
  }
  for (std::size_t k = 0; k < tuples.size(); ++k) {
    auto report = mcg::verify_equilibrium(spec, tuples[k].second);
    report.name = tuples[k].first;
    if (k) std::cout << '\n';
    mcg::write_report(std::cout, spec, report);
  }
  return 0;
}

int cmd_plot(const std::string& pattern, const std::string& out_dir,
             const std::vector<std::string>& metrics) {
  const auto files = mcg::plot_metrics(pattern, mcg::resolve_output_dir(out_dir), metrics, &std::cerr);
  for (const auto& f : files) std::cout << "chart: " << f << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov commitment game experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_offset = 0;
  auto* train = app.add_subcommand("train", "train every configured seed");
  train->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--seed-offset", seed_offset, "added to every configured seed");

  std::string checkpoint;
  int episodes = 0;
  std::uint64_t eval_seed = 12345;
  std::string probe;
  auto* eval = app.add_subcommand("eval", "evaluate a frozen checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "number of episodes")->required()->check(CLI::NonNegativeNumber);
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--probe", probe, "behavioral probe (defect-proposer)");

  std::string env = "pd";
  std::string tuple = "all";
  auto* verify = app.add_subcommand("verify-equilibrium", "exhaustive equilibrium check");
  verify->add_option("--env", env, "environment")->required();
  verify->add_option("--tuple", tuple, "starred, mutual-defect or all");

  std::string pattern;
  std::string out_dir;
  std::vector<std::string> metrics;
  auto* plot = app.add_subcommand("plot", "draw learning curves from metrics files");
  plot->add_option("--metrics", pattern, "glob of per-seed metrics files")->required();
  plot->add_option("--out", out_dir, "output directory")->required();
  plot->add_option("--metric", metrics, "column to draw (repeatable)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(config_path, seed_offset);
    if (*eval) return cmd_eval(checkpoint, episodes, eval_seed, probe);
    if (*verify) return cmd_verify(env, tuple);
    if (*plot) return cmd_plot(pattern, out_dir, metrics);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
