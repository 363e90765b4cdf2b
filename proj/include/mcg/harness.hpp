#pragma once

// Experiment orchestration: flat key = value configs, multi-seed runs with
// CSV metrics and checkpoints, frozen-policy evaluation, and SVG plots.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mcg/dcl.hpp"
#include "mcg/game.hpp"

namespace mcg {

// Overrides run.output_dir when set and non-empty.
inline constexpr const char* kOutputDirEnv = "MCG_OUTPUT_DIR";

enum class Algorithm { dcl, dcl_ic, dcl_decentralized, dcl_decentralized_ic, independent_pg };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct EnvConfig {
  std::string name = "pd";  // pd | grid | rpc | public-goods
  int grid_size = 4;
  int horizon = 16;
  int mega_step = 2;
  int n_agents = 2;
  double benefit_factor = 1.5;
  double gamma = 0.99;
};

struct ExperimentConfig {
  EnvConfig env;
  Algorithm algorithm = Algorithm::dcl_ic;
  TrainerConfig trainer;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "runs";
  int workers = 1;

  // Hyperparameter-table defaults for an environment.
  static ExperimentConfig defaults(const std::string& env_name);
  // The trainer settings with the algorithm's mode and IC switch applied.
  TrainerConfig effective_trainer() const;
  void validate() const;
};

/// Reads `key = value` lines ('#' starts a comment). `env.name` selects the
/// defaults; every other key then overrides them. Unknown keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
// Writes every key; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

GameSpec make_env(const EnvConfig& env);
// env.* keys as checkpoint metadata, and back.
std::map<std::string, std::string> env_meta(const EnvConfig& env);
EnvConfig env_from_meta(const std::map<std::string, std::string>& meta);

// Trains one seed with the configured algorithm.
TrainResult train_seed(const ExperimentConfig& config, const GameSpec& spec, std::uint64_t seed);

// ---- metrics files ----

std::vector<std::string> metrics_header(const GameSpec& spec);
std::string metrics_csv_row(const MetricsRow& row);
void write_metrics_csv(std::ostream& out, const GameSpec& spec, const std::vector<MetricsRow>& rows);

/// A parsed metrics table: header plus numeric rows.
struct MetricsTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

// Malformed rows are skipped with a warning on `warnings`.
MetricsTable read_metrics_csv(std::istream& in, std::ostream* warnings = nullptr);

/// Mean and standard error across seed tables of every column except
/// iteration and seed, for iterations present in all tables. Columns:
/// iteration, n_seeds, <col>_mean, <col>_stderr.
MetricsTable aggregate_metrics(const std::vector<MetricsTable>& per_seed);
void write_table_csv(std::ostream& out, const MetricsTable& table);

struct RunSummary {
  std::string output_dir;
  std::vector<std::string> metrics_files;
  std::vector<std::string> checkpoint_files;
  std::string aggregate_file;
};

/// Trains every seed (seed + seed_offset), writing metrics_seed<S>.csv,
/// checkpoint_seed<S>.txt, metrics_aggregate.csv and config.txt.
RunSummary run_experiment(const ExperimentConfig& config, std::uint64_t seed_offset = 0);
std::string resolve_output_dir(const std::string& configured);

// ---- evaluation ----

struct ProbeReport {
  int learner = 0;
  double commit_rate = 0.0;
  double defect_rate = 0.0;   // action-policy samples choosing D
  double proposal_defect_rate = 0.0;
  double learner_return = 0.0;
};

struct EvaluationReport {
  int episodes = 0;
  std::vector<double> returns;
  std::vector<double> discounted_returns;
  double welfare = 0.0;
  double agreement_rate = 0.0;
  std::vector<ProbeReport> probes;
};

/// Frozen-policy rollouts at temperature 1. With `defect_probe`, each PD
/// agent is also paired with an opponent that always proposes D, never
/// commits and acts D.
EvaluationReport evaluate(const GameSpec& spec, const PolicyParams& policies, int episodes,
                          std::uint64_t seed, bool commitments_enabled, bool defect_probe);
EvaluationReport evaluate_checkpoint(const std::string& path, int episodes, std::uint64_t seed,
                                     bool defect_probe);
void write_evaluation(std::ostream& out, const EvaluationReport& report);

// The fixed defector used by the robustness probe.
AgentPolicy defect_proposer(const GameSpec& spec, int agent);

// ---- plotting ----

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> stderr_;
};

/// Line chart with +-1 standard-error bands as a standalone SVG document.
std::string render_svg(const std::string& title, const std::string& y_label,
                       const std::vector<Series>& series);

/// Reads every per-seed metrics file matched by `pattern` (glob syntax),
/// writes one SVG per metric into `out_dir` and returns their paths. With an
/// empty `metrics` list the per-agent discounted returns and welfare are drawn.
std::vector<std::string> plot_metrics(const std::string& pattern, const std::string& out_dir,
                                      const std::vector<std::string>& metrics,
                                      std::ostream* warnings = nullptr);

}  // namespace mcg
