#pragma once

// Tabular softmax policies (proposal, commitment, action), the joint-action
// critic, and the relaxed evaluation of tables at soft joint proposals.

#include <Eigen/Core>

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mcg/game.hpp"

namespace mcg {

/// Logit tables for one agent.
///   proposal: n_states x |A_i|
///   commit:   (n_states * joint_size) x 2, columns (reject, commit)
///   action:   n_states x |A_i|
struct AgentPolicy {
  RowMatrixXd proposal;
  RowMatrixXd commit;
  RowMatrixXd action;

  static AgentPolicy zeros(const GameSpec& spec, int agent);

  // Probability of committing at (state, joint proposal).
  double commit_probability(int commit_row) const;
  // Pins every commit row to reject; used by learners that never commit.
  void never_commit();
  bool all_finite() const {
    return proposal.allFinite() && commit.allFinite() && action.allFinite();
  }
};

using PolicyParams = std::vector<AgentPolicy>;

PolicyParams zero_policies(const GameSpec& spec);

/// Q^i over (state, joint action).
struct CriticTable {
  Eigen::MatrixXd values;

  static CriticTable zeros(const GameSpec& spec) {
    return {Eigen::MatrixXd::Zero(spec.n_states(), spec.joint.joint_size())};
  }
  double operator()(int state, int joint) const { return values(state, joint); }
};

struct LogProb {
  double log_prob = 0.0;
  RowMatrixXd gradient;  // same shape as the logit table; nonzero only on `row`
};

/// log softmax(table.row(row))[chosen] and its gradient w.r.t. the whole table.
LogProb log_prob_and_grad(const RowMatrixXd& logits, int row, int chosen);

/// Value and per-agent partial derivatives of a multilinear contraction.
struct Contraction {
  double value = 0.0;
  std::vector<Eigen::VectorXd> partials;  // partials[i][k] = d value / d soft_i[k]
};

/// sum_j entries[j] * prod_i soft_i[digit_i(j)]. Equals entries[j] when every
/// soft vector is one-hot at j's digits.
Contraction multilinear_contract(const JointSpace& joint, const Eigen::Ref<const Eigen::VectorXd>& entries,
                                 std::span<const Eigen::VectorXd> soft);

/// The (reject, commit) logit pair of agent's commitment table at `state`,
/// evaluated at relaxed per-agent proposal vectors.
struct RelaxedCommitLogit {
  Contraction reject;
  Contraction commit;
};

RelaxedCommitLogit commit_logit_relaxed(const AgentPolicy& policy, const GameSpec& spec, int state,
                                        std::span<const Eigen::VectorXd> relaxed_proposals);

/// Critic-cell statistics of one agent's returns over a batch.
struct CriticTargets {
  Eigen::MatrixXd counts;  // visits per (state, joint action)
  Eigen::MatrixXd sums;    // summed returns per cell
  double samples = 0.0;    // |D| * T
};

CriticTargets critic_targets(const GameSpec& spec, const Batch& batch, int agent);

/// Gradient descent on (1/|D|T) sum (Q(s_t, a_t) - G_t)^2, `updates` steps,
/// Q evaluated at the executed joint action. Unvisited cells are untouched.
void fit_critic(CriticTable& critic, const CriticTargets& targets, double learning_rate,
                int updates);
void fit_critic(CriticTable& critic, const GameSpec& spec, const Batch& batch, int agent,
                double learning_rate, int updates);

// Label of commitment row `state * joint_size + joint`, e.g. "s|C,D".
std::string commit_row_label(const GameSpec& spec, int row);

/// Text checkpoint: one line per table row,
///   <agentK.proposal|commit|action> TAB <row label> TAB <space-separated logits>
/// with %.17g values for exact round-trip. Lines starting with "meta" carry
/// free-form key/value pairs (the environment description).
void write_checkpoint(std::ostream& out, const GameSpec& spec, const PolicyParams& policies,
                      const std::map<std::string, std::string>& meta);
std::map<std::string, std::string> read_checkpoint_meta(std::istream& in);
PolicyParams read_checkpoint(std::istream& in, const GameSpec& spec);

}  // namespace mcg
