#pragma once

// Sampled policy-gradient estimators for the action, commitment and proposal
// policies, and the incentive-compatibility (IC) hinge gradient.
//
// Per timestep, with Q^i the learner's critic of agent i, m the hard joint
// proposal, a the counterfactual joint action, c the commitment bits and
// coef = 1(c=1) Q^i(x,m) + (1 - 1(c=1)) Q^i(x,a):
//
//   theta^i: (1 - 1(c=1)) Q^i(x,a) grad log pi^i(a^i|x)
//   zeta^i : coef grad log psi^i(c^i|x,m)
//            + [Q^i(x,m) - Q^i(x,a)] prod_{k!=i} 1(c^k=1) grad c^i_soft
//   eta^i  : coef (grad log phi^i(m^i|x) + sum_j grad log psi^j(c^j|x,m))
//            + sum_j prod_{l!=j} 1(c^l=1) [Q^i(x,m) - Q^i(x,a)] grad c^j_soft
//   IC     : sum_j grad min{0, Q^j(x,m) - Q^j(x,a)}
//
// Indicator gradients are straight-through: values come from the hard
// samples, derivatives from the Gumbel-Softmax relaxation replayed with the
// recorded noise. Derivatives with respect to eta^i flow through agent i's
// relaxed proposal m^i_soft into the multilinear extension of the commitment
// logit tables (and of the critic tables for IC), evaluated at the hard
// proposals of the other agents. Critic values are constants throughout.

#include <vector>

#include "mcg/game.hpp"
#include "mcg/policy.hpp"

namespace mcg {

/// Gradient tables aligned with one agent's logit tables.
struct AgentGradient {
  RowMatrixXd proposal;
  RowMatrixXd commit;
  RowMatrixXd action;

  static AgentGradient zeros_like(const AgentPolicy& policy);
  AgentGradient& operator+=(const AgentGradient& other);
  AgentGradient& operator*=(double scale);
};

/// What one learner uses for every agent's policy and critic. In the
/// centralized trainer these are the true tables; in the decentralized one a
/// learner's own tables plus its models of everybody else.
struct Perspective {
  std::vector<const AgentPolicy*> policies;
  std::vector<const CriticTable*> critics;
};

Perspective make_perspective(const PolicyParams& policies, const std::vector<CriticTable>& critics);

struct EstimatorOptions {
  // Weight step t by gamma^t (occupancy-measure weighting) instead of uniformly.
  bool discounted_state_weighting = false;
  double gamma = 1.0;
};

// Per-step contributions, accumulated into `out` with weight `w`.
void add_action_step(const GameSpec& spec, const Trajectory& traj, int t, const Perspective& view,
                     int agent, double w, RowMatrixXd& out);
void add_commitment_reinforce_step(const GameSpec& spec, const Trajectory& traj, int t,
                                   const Perspective& view, int agent, double w, RowMatrixXd& out);
void add_commitment_pathwise_step(const GameSpec& spec, const Trajectory& traj, int t,
                                  const Perspective& view, int agent, double w, RowMatrixXd& out);
// coef * grad log phi^i(m^i|x).
void add_proposal_reinforce_step(const GameSpec& spec, const Trajectory& traj, int t,
                                 const Perspective& view, int agent, double w, RowMatrixXd& out);
// coef * sum_j grad log psi^j(c^j|x,m) through m^i_soft.
void add_proposal_commit_logprob_step(const GameSpec& spec, const Trajectory& traj, int t,
                                      const Perspective& view, int agent, double w,
                                      RowMatrixXd& out);
// sum_j prod_{l!=j} 1(c^l=1) [Q^i(x,m) - Q^i(x,a)] grad c^j_soft through m^i_soft.
void add_proposal_pathwise_step(const GameSpec& spec, const Trajectory& traj, int t,
                                const Perspective& view, int agent, double w, RowMatrixXd& out);
void add_ic_step(const GameSpec& spec, const Trajectory& traj, int t, const Perspective& view,
                 int agent, double w, RowMatrixXd& out);

// Batch estimators: sum over episodes and timesteps, divided by |D|.
RowMatrixXd estimate_action_grad(const GameSpec& spec, const Batch& batch, const Perspective& view,
                                 int agent, const EstimatorOptions& options = {});
RowMatrixXd estimate_commitment_grad(const GameSpec& spec, const Batch& batch,
                                     const Perspective& view, int agent,
                                     const EstimatorOptions& options = {});
RowMatrixXd estimate_proposal_grad(const GameSpec& spec, const Batch& batch,
                                   const Perspective& view, int agent,
                                   const EstimatorOptions& options = {});
RowMatrixXd estimate_ic_grad(const GameSpec& spec, const Batch& batch, const Perspective& view,
                             int agent, const EstimatorOptions& options = {});

/// Which policies receive the entropy bonus.
struct EntropyTargets {
  bool proposal = true;
  bool commit = true;
  bool action = true;
};

/// Batch-mean gradient of the summed entropies of the visited rows of
/// phi^i(.|x), psi^i(.|x,m) and pi^i(.|x).
AgentGradient estimate_entropy_grad(const GameSpec& spec, const Batch& batch,
                                    const AgentPolicy& policy, const EntropyTargets& targets,
                                    const EstimatorOptions& options = {});

/// All four estimators for one agent in one pass. `ic` holds the IC gradient
/// separately so callers can apply the multiplier.
struct DclGradients {
  AgentGradient value;
  RowMatrixXd ic;
};

DclGradients estimate_dcl_gradients(const GameSpec& spec, const Batch& batch,
                                    const Perspective& view, int agent, bool with_ic,
                                    const EstimatorOptions& options = {});

}  // namespace mcg
