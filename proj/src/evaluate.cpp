#include <fstream>
#include <iomanip>
#include <ostream>

#include "mcg/envs.hpp"
#include "mcg/harness.hpp"
#include "mcg/rollout.hpp"

namespace mcg {

AgentPolicy defect_proposer(const GameSpec& spec, int agent) {
  AgentPolicy p = AgentPolicy::zeros(spec, agent);
  p.proposal.col(envs::kCooperate).setConstant(-1e3);
  p.commit.col(1).setConstant(-1e3);
  p.action.col(envs::kCooperate).setConstant(-1e3);
  return p;
}

EvaluationReport evaluate(const GameSpec& spec, const PolicyParams& policies, int episodes,
                          std::uint64_t seed, bool commitments_enabled, bool defect_probe) {
  if (episodes < 0) throw ConfigError("episode count must be nonnegative");
  if (static_cast<int>(policies.size()) != spec.n_agents()) {
    throw ConfigError("checkpoint has a different number of agents than the environment");
  }
  const int n = spec.n_agents();
  EvaluationReport report;
  report.episodes = episodes;
  if (episodes == 0) return report;
  const RolloutOptions options{1.0, commitments_enabled};
  const Batch batch = collect_batch(spec, policies, options, episodes, seed, 0);
  const MetricsRow row = batch_metrics(spec, batch, 0, seed, 0.0, 1.0);
  report.returns = row.returns;
  report.discounted_returns = row.discounted_returns;
  report.welfare = row.welfare;
  report.agreement_rate = row.agreement_rate;
  if (!defect_probe) return report;
  if (spec.name != "pd") throw ConfigError("the defect-proposer probe is defined for pd only");
  for (int learner = 0; learner < n; ++learner) {
    PolicyParams mixed = policies;
    mixed[1 - learner] = defect_proposer(spec, 1 - learner);
    const Batch probe = collect_batch(spec, mixed, {1.0, true}, episodes, seed, 1 + learner);
    ProbeReport p;
    p.learner = learner;
    double steps = 0.0;
    for (const auto& traj : probe) {
      p.learner_return += traj.rewards.col(learner).sum();
      for (int t = 0; t < traj.length(); ++t) {
        steps += 1.0;
        p.commit_rate += traj.commits(t, learner);
        p.defect_rate += traj.counterfactual(t, learner) == envs::kDefect;
        p.proposal_defect_rate += traj.proposals(t, learner) == envs::kDefect;
      }
    }
    p.commit_rate /= steps;
    p.defect_rate /= steps;
    p.proposal_defect_rate /= steps;
    p.learner_return /= static_cast<double>(probe.size());
    report.probes.push_back(p);
  }
  return report;
}

EvaluationReport evaluate_checkpoint(const std::string& path, int episodes, std::uint64_t seed,
                                     bool defect_probe) {
  std::ifstream meta_in(path);
  if (!meta_in) throw ConfigError("cannot open checkpoint " + path);
  const auto meta = read_checkpoint_meta(meta_in);
  const GameSpec spec = make_env(env_from_meta(meta));
  std::ifstream in(path);
  const PolicyParams policies = read_checkpoint(in, spec);
  bool commitments = true;
  if (auto it = meta.find("algorithm"); it != meta.end()) {
    commitments = parse_algorithm(it->second) != Algorithm::independent_pg;
  }
  return evaluate(spec, policies, episodes, seed, commitments, defect_probe);
}

void write_evaluation(std::ostream& out, const EvaluationReport& report) {
  out << std::setprecision(6);
  out << "episodes: " << report.episodes << '\n';
  if (report.episodes == 0) return;
  out << "returns:";
  for (double r : report.returns) out << ' ' << r;
  out << "\ndiscounted_returns:";
  for (double r : report.discounted_returns) out << ' ' << r;
  out << "\nwelfare: " << report.welfare << '\n';
  out << "agreement_rate: " << report.agreement_rate << '\n';
  for (const auto& p : report.probes) {
    out << "probe defect-proposer learner=agent" << p.learner << " commit_rate=" << p.commit_rate
        << " defect_rate=" << p.defect_rate << " proposal_defect_rate=" << p.proposal_defect_rate
        << " learner_return=" << p.learner_return << '\n';
  }
}

}  // namespace mcg
