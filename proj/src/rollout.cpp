#include "mcg/rollout.hpp"

#include <random>

#include "mcg/tabular.hpp"

namespace mcg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t iteration, std::uint64_t episode) {
  return splitmix64(splitmix64(splitmix64(run_seed) ^ iteration) ^ (episode * 0x2545f4914f6cdd1dULL));
}

Trajectory rollout(const GameSpec& spec, const PolicyParams& policies,
                   const RolloutOptions& options, std::uint64_t seed) {
  const int n = spec.n_agents();
  const int horizon = spec.horizon;
  if (static_cast<int>(policies.size()) != n) throw ContractViolation("one policy per agent");
  if (!(options.temperature > 0.0)) throw ContractViolation("temperature must be positive");

  std::mt19937_64 rng(seed);
  const std::vector<int> offsets = noise_offsets(spec);

  Trajectory traj;
  traj.states.resize(horizon);
  traj.proposals.resize(horizon, n);
  traj.commits.resize(horizon, n);
  traj.counterfactual.resize(horizon, n);
  traj.executed.resize(horizon, n);
  traj.proposal_joint.resize(horizon);
  traj.counterfactual_joint.resize(horizon);
  traj.executed_joint.resize(horizon);
  traj.rewards.resize(horizon, n);
  traj.proposal_noise = RowMatrixXd::Zero(horizon, offsets.back());
  traj.commit_noise = RowMatrixXd::Zero(horizon, 2 * n);
  traj.temperatures = Eigen::VectorXd::Constant(horizon, options.temperature);

  int state = 0;
  if (spec.initial.maxCoeff() < 1.0) {
    const double u = open_unit(rng);
    double acc = 0.0;
    for (int s = 0; s < spec.n_states(); ++s) {
      acc += spec.initial[s];
      state = s;
      if (u < acc) break;
    }
  } else {
    spec.initial.maxCoeff(&state);
  }

  const int js = spec.joint.joint_size();
  for (int t = 0; t < horizon; ++t) {
    traj.states[t] = state;
    int proposal_joint = 0;
    bool all_commit = options.commitments_enabled;
    if (options.commitments_enabled) {
      for (int i = 0; i < n; ++i) {
        const int m = static_cast<int>(gumbel_argmax(policies[i].proposal.row(state), rng,
                                                     &traj.proposal_noise(t, offsets[i])));
        traj.proposals(t, i) = m;
        proposal_joint += m * spec.joint.stride(i);
      }
      const int commit_row = state * js + proposal_joint;
      for (int i = 0; i < n; ++i) {
        const int c = static_cast<int>(
            gumbel_argmax(policies[i].commit.row(commit_row), rng, &traj.commit_noise(t, 2 * i)));
        traj.commits(t, i) = c;
        all_commit = all_commit && c == 1;
      }
    }
    int action_joint = 0;
    for (int i = 0; i < n; ++i) {
      const int a = static_cast<int>(gumbel_argmax(policies[i].action.row(state), rng));
      traj.counterfactual(t, i) = a;
      action_joint += a * spec.joint.stride(i);
    }
    if (!options.commitments_enabled) {
      traj.proposals.row(t) = traj.counterfactual.row(t);
      traj.commits.row(t).setZero();
      proposal_joint = action_joint;
    }
    const int executed = all_commit ? proposal_joint : action_joint;
    traj.proposal_joint[t] = proposal_joint;
    traj.counterfactual_joint[t] = action_joint;
    traj.executed_joint[t] = executed;
    traj.executed.row(t) = all_commit ? traj.proposals.row(t) : traj.counterfactual.row(t);
    traj.rewards.row(t) = spec.rewards.row(spec.row(state, executed));
    state = sample_next_state(spec, state, executed, rng);
  }
  traj.returns = compute_returns(traj.rewards, spec.gamma);
  return traj;
}

Batch collect_batch(const GameSpec& spec, const PolicyParams& policies,
                    const RolloutOptions& options, int episodes, std::uint64_t run_seed,
                    std::uint64_t iteration) {
  Batch batch;
  batch.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    batch.push_back(rollout(spec, policies, options, episode_seed(run_seed, iteration, e)));
  }
  return batch;
}

}  // namespace mcg
