#include "mcg/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace mcg {

namespace {

constexpr int kMaxActions = 64;

void softmax_into(const double* logits, int n, double* out) {
  double max = logits[0];
  for (int k = 1; k < n; ++k) max = std::max(max, logits[k]);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    out[k] = std::exp(logits[k] - max);
    sum += out[k];
  }
  for (int k = 0; k < n; ++k) out[k] /= sum;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out += w * (onehot(chosen) - softmax(logits))
void add_log_prob_grad(const double* logits, int n, int chosen, double w, double* out) {
  double p[kMaxActions];
  softmax_into(logits, n, p);
  for (int k = 0; k < n; ++k) out[k] -= w * p[k];
  out[chosen] += w;
}

struct StepContext {
  int state;
  int js;
  int proposal;
  int counterfactual;
  int commit_row;
  bool all_commit;
  double tau;
};

StepContext context(const GameSpec& spec, const Trajectory& traj, int t) {
  StepContext c;
  c.state = traj.states[t];
  c.js = spec.joint.joint_size();
  c.proposal = traj.proposal_joint[t];
  c.counterfactual = traj.counterfactual_joint[t];
  c.commit_row = c.state * c.js + c.proposal;
  c.all_commit = traj.all_commit(t);
  c.tau = traj.temperatures[t];
  return c;
}

// Straight-through soft commitment value of agent j at the hard proposal.
double commit_soft(const Trajectory& traj, int t, const AgentPolicy& policy, int row, int j,
                   double tau) {
  const double diff = policy.commit(row, 1) + traj.commit_noise(t, 2 * j + 1) - policy.commit(row, 0) -
                      traj.commit_noise(t, 2 * j);
  return sigmoid(diff / tau);
}

bool others_commit(const Trajectory& traj, int t, int j) {
  for (int l = 0; l < traj.commits.cols(); ++l) {
    if (l != j && traj.commits(t, l) != 1) return false;
  }
  return true;
}

// out.row(state) += w * J^T v, J the Jacobian of agent's relaxed proposal
// softmax((eta_s + g) / tau) with respect to eta_s.
void add_through_relaxed_proposal(const GameSpec& spec, const Trajectory& traj, int t,
                                  const AgentPolicy& policy, int agent, int offset,
                                  const double* v, double w, double tau, RowMatrixXd& out) {
  const int n = spec.n_actions(agent);
  const int s = traj.states[t];
  double z[kMaxActions] = {};
  double y[kMaxActions];
  for (int k = 0; k < n; ++k) z[k] = (policy.proposal(s, k) + traj.proposal_noise(t, offset + k)) / tau;
  softmax_into(z, n, y);
  double yv = 0.0;
  for (int k = 0; k < n; ++k) yv += y[k] * v[k];
  for (int k = 0; k < n; ++k) out(s, k) += w * y[k] * (v[k] - yv) / tau;
}

int proposal_offset(const GameSpec& spec, int agent) {
  int offset = 0;
  for (int i = 0; i < agent; ++i) offset += spec.n_actions(i);
  return offset;
}

void check_view(const GameSpec& spec, const Perspective& view, int agent) {
  if (static_cast<int>(view.policies.size()) != spec.n_agents() ||
      static_cast<int>(view.critics.size()) != spec.n_agents()) {
    throw ContractViolation("perspective must cover every agent");
  }
  if (agent < 0 || agent >= spec.n_agents()) throw ContractViolation("agent index out of range");
  if (spec.joint.size(agent) > kMaxActions) throw ContractViolation("action space too large");
}

// Accumulates the proposal vector v_k for one step:
//   kind 0: coef * sum_j (c^j - sigma(D^j_r)) D^j(s, m with m^i = k)
//   kind 1: sum_j prod_{l!=j} 1(c^l=1) (Qm - Qa) c^j_soft (1 - c^j_soft) / tau * D^j(...)
// D^j is agent j's commit-minus-reject logit.
void proposal_vector(const GameSpec& spec, const Trajectory& traj, int t, const Perspective& view,
                     int agent, const StepContext& c, double qm, double qa, bool logprob,
                     bool pathwise, double* v) {
  const int n = spec.n_actions(agent);
  const double coef = c.all_commit ? qm : qa;
  for (int k = 0; k < n; ++k) v[k] = 0.0;
  const int base = c.state * c.js;
  for (int j = 0; j < spec.n_agents(); ++j) {
    const AgentPolicy& pj = *view.policies[j];
    double scale = 0.0;
    if (logprob) {
      const double p = pj.commit_probability(c.commit_row);
      scale += coef * (traj.commits(t, j) - p);
    }
    if (pathwise && others_commit(traj, t, j)) {
      const double cs = commit_soft(traj, t, pj, c.commit_row, j, c.tau);
      scale += (qm - qa) * cs * (1.0 - cs) / c.tau;
    }
    if (scale == 0.0) continue;
    for (int k = 0; k < n; ++k) {
      const int row = base + spec.joint.replace(c.proposal, agent, k);
      v[k] += scale * (pj.commit(row, 1) - pj.commit(row, 0));
    }
  }
}

double step_weight(const EstimatorOptions& options, int t) {
  return options.discounted_state_weighting ? std::pow(options.gamma, t) : 1.0;
}

}  // namespace

AgentGradient AgentGradient::zeros_like(const AgentPolicy& policy) {
  return {RowMatrixXd::Zero(policy.proposal.rows(), policy.proposal.cols()),
          RowMatrixXd::Zero(policy.commit.rows(), policy.commit.cols()),
          RowMatrixXd::Zero(policy.action.rows(), policy.action.cols())};
}

AgentGradient& AgentGradient::operator+=(const AgentGradient& other) {
  proposal += other.proposal;
  commit += other.commit;
  action += other.action;
  return *this;
}

AgentGradient& AgentGradient::operator*=(double scale) {
  proposal *= scale;
  commit *= scale;
  action *= scale;
  return *this;
}

Perspective make_perspective(const PolicyParams& policies, const std::vector<CriticTable>& critics) {
  Perspective view;
  for (const auto& p : policies) view.policies.push_back(&p);
  for (const auto& q : critics) view.critics.push_back(&q);
  return view;
}

void add_action_step(const GameSpec& spec, const Trajectory& traj, int t, const Perspective& view,
                     int agent, double w, RowMatrixXd& out) {
  const StepContext c = context(spec, traj, t);
  if (c.all_commit) return;
  const double qa = (*view.critics[agent])(c.state, c.counterfactual);
  const AgentPolicy& p = *view.policies[agent];
  add_log_prob_grad(&p.action(c.state, 0), spec.n_actions(agent), traj.counterfactual(t, agent),
                    w * qa, &out(c.state, 0));
}

void add_commitment_reinforce_step(const GameSpec& spec, const Trajectory& traj, int t,
                                   const Perspective& view, int agent, double w, RowMatrixXd& out) {
  const StepContext c = context(spec, traj, t);
  const CriticTable& q = *view.critics[agent];
  const double coef = c.all_commit ? q(c.state, c.proposal) : q(c.state, c.counterfactual);
  const double p = view.policies[agent]->commit_probability(c.commit_row);
  const double g = w * coef * (traj.commits(t, agent) - p);
  out(c.commit_row, 1) += g;
  out(c.commit_row, 0) -= g;
}

void add_commitment_pathwise_step(const GameSpec& spec, const Trajectory& traj, int t,
                                  const Perspective& view, int agent, double w, RowMatrixXd& out) {
  if (!others_commit(traj, t, agent)) return;
  const StepContext c = context(spec, traj, t);
  const CriticTable& q = *view.critics[agent];
  const double gap = q(c.state, c.proposal) - q(c.state, c.counterfactual);
  const double cs = commit_soft(traj, t, *view.policies[agent], c.commit_row, agent, c.tau);
  const double g = w * gap * cs * (1.0 - cs) / c.tau;
  out(c.commit_row, 1) += g;
  out(c.commit_row, 0) -= g;
}

void add_proposal_reinforce_step(const GameSpec& spec, const Trajectory& traj, int t,
                                 const Perspective& view, int agent, double w, RowMatrixXd& out) {
  const StepContext c = context(spec, traj, t);
  const CriticTable& q = *view.critics[agent];
  const double coef = c.all_commit ? q(c.state, c.proposal) : q(c.state, c.counterfactual);
  const AgentPolicy& p = *view.policies[agent];
  add_log_prob_grad(&p.proposal(c.state, 0), spec.n_actions(agent), traj.proposals(t, agent),
                    w * coef, &out(c.state, 0));
}

void add_proposal_commit_logprob_step(const GameSpec& spec, const Trajectory& traj, int t,
                                      const Perspective& view, int agent, double w,
                                      RowMatrixXd& out) {
  const StepContext c = context(spec, traj, t);
  const CriticTable& q = *view.critics[agent];
  double v[kMaxActions];
  proposal_vector(spec, traj, t, view, agent, c, q(c.state, c.proposal), q(c.state, c.counterfactual),
                  true, false, v);
  add_through_relaxed_proposal(spec, traj, t, *view.policies[agent], agent,
                               proposal_offset(spec, agent), v, w, c.tau, out);
}

void add_proposal_pathwise_step(const GameSpec& spec, const Trajectory& traj, int t,
                                const Perspective& view, int agent, double w, RowMatrixXd& out) {
  const StepContext c = context(spec, traj, t);
  const CriticTable& q = *view.critics[agent];
  double v[kMaxActions];
  proposal_vector(spec, traj, t, view, agent, c, q(c.state, c.proposal), q(c.state, c.counterfactual),
                  false, true, v);
  add_through_relaxed_proposal(spec, traj, t, *view.policies[agent], agent,
                               proposal_offset(spec, agent), v, w, c.tau, out);
}

void add_ic_step(const GameSpec& spec, const Trajectory& traj, int t, const Perspective& view,
                 int agent, double w, RowMatrixXd& out) {
  const StepContext c = context(spec, traj, t);
  const int n = spec.n_actions(agent);
  double v[kMaxActions];
  std::fill(v, v + n, 0.0);
  bool any = false;
  for (int j = 0; j < spec.n_agents(); ++j) {
    const CriticTable& q = *view.critics[j];
    if (!(q(c.state, c.proposal) < q(c.state, c.counterfactual))) continue;
    any = true;
    for (int k = 0; k < n; ++k) v[k] += q(c.state, spec.joint.replace(c.proposal, agent, k));
  }
  if (!any) return;
  add_through_relaxed_proposal(spec, traj, t, *view.policies[agent], agent,
                               proposal_offset(spec, agent), v, w, c.tau, out);
}

namespace {

template <typename StepFn>
RowMatrixXd batch_estimate(const GameSpec& spec, const Batch& batch, const Perspective& view,
                           int agent, const EstimatorOptions& options, const RowMatrixXd& shape,
                           StepFn fn) {
  check_view(spec, view, agent);
  if (batch.empty()) throw ContractViolation("estimator batch is empty");
  RowMatrixXd out = RowMatrixXd::Zero(shape.rows(), shape.cols());
  for (const auto& traj : batch) {
    for (int t = 0; t < traj.length(); ++t) fn(traj, t, step_weight(options, t), out);
  }
  out /= static_cast<double>(batch.size());
  return out;
}

}  // namespace

RowMatrixXd estimate_action_grad(const GameSpec& spec, const Batch& batch, const Perspective& view,
                                 int agent, const EstimatorOptions& options) {
  return batch_estimate(spec, batch, view, agent, options, view.policies.at(agent)->action,
                        [&](const Trajectory& traj, int t, double w, RowMatrixXd& out) {
                          add_action_step(spec, traj, t, view, agent, w, out);
                        });
}

RowMatrixXd estimate_commitment_grad(const GameSpec& spec, const Batch& batch,
                                     const Perspective& view, int agent,
                                     const EstimatorOptions& options) {
  return batch_estimate(spec, batch, view, agent, options, view.policies.at(agent)->commit,
                        [&](const Trajectory& traj, int t, double w, RowMatrixXd& out) {
                          add_commitment_reinforce_step(spec, traj, t, view, agent, w, out);
                          add_commitment_pathwise_step(spec, traj, t, view, agent, w, out);
                        });
}

RowMatrixXd estimate_proposal_grad(const GameSpec& spec, const Batch& batch,
                                   const Perspective& view, int agent,
                                   const EstimatorOptions& options) {
  return batch_estimate(spec, batch, view, agent, options, view.policies.at(agent)->proposal,
                        [&](const Trajectory& traj, int t, double w, RowMatrixXd& out) {
                          add_proposal_reinforce_step(spec, traj, t, view, agent, w, out);
                          add_proposal_commit_logprob_step(spec, traj, t, view, agent, w, out);
                          add_proposal_pathwise_step(spec, traj, t, view, agent, w, out);
                        });
}

RowMatrixXd estimate_ic_grad(const GameSpec& spec, const Batch& batch, const Perspective& view,
                             int agent, const EstimatorOptions& options) {
  return batch_estimate(spec, batch, view, agent, options, view.policies.at(agent)->proposal,
                        [&](const Trajectory& traj, int t, double w, RowMatrixXd& out) {
                          add_ic_step(spec, traj, t, view, agent, w, out);
                        });
}

AgentGradient estimate_entropy_grad(const GameSpec& spec, const Batch& batch,
                                    const AgentPolicy& policy, const EntropyTargets& targets,
                                    const EstimatorOptions& options) {
  if (batch.empty()) throw ContractViolation("estimator batch is empty");
  AgentGradient g = AgentGradient::zeros_like(policy);
  const int js = spec.joint.joint_size();
  auto add_row = [](const RowMatrixXd& logits, int row, double w, RowMatrixXd& out) {
    const int n = static_cast<int>(logits.cols());
    double p[kMaxActions];
    softmax_into(&logits(row, 0), n, p);
    double h = 0.0;
    for (int k = 0; k < n; ++k) h -= p[k] > 0.0 ? p[k] * std::log(p[k]) : 0.0;
    for (int k = 0; k < n; ++k) {
      const double lp = p[k] > 0.0 ? std::log(p[k]) : 0.0;
      out(row, k) -= w * p[k] * (lp + h);
    }
  };
  for (const auto& traj : batch) {
    for (int t = 0; t < traj.length(); ++t) {
      const double w = step_weight(options, t);
      const int s = traj.states[t];
      if (targets.proposal) add_row(policy.proposal, s, w, g.proposal);
      if (targets.commit) add_row(policy.commit, s * js + traj.proposal_joint[t], w, g.commit);
      if (targets.action) add_row(policy.action, s, w, g.action);
    }
  }
  g *= 1.0 / static_cast<double>(batch.size());
  return g;
}

DclGradients estimate_dcl_gradients(const GameSpec& spec, const Batch& batch,
                                    const Perspective& view, int agent, bool with_ic,
                                    const EstimatorOptions& options) {
  check_view(spec, view, agent);
  if (batch.empty()) throw ContractViolation("estimator batch is empty");
  const AgentPolicy& policy = *view.policies[agent];
  const CriticTable& q = *view.critics[agent];
  const int n = spec.n_actions(agent);
  const int offset = proposal_offset(spec, agent);
  DclGradients out{AgentGradient::zeros_like(policy),
                   RowMatrixXd::Zero(policy.proposal.rows(), policy.proposal.cols())};
  double v[kMaxActions];
  for (const auto& traj : batch) {
    for (int t = 0; t < traj.length(); ++t) {
      const double w = step_weight(options, t);
      const StepContext c = context(spec, traj, t);
      const double qm = q(c.state, c.proposal);
      const double qa = q(c.state, c.counterfactual);
      const double coef = c.all_commit ? qm : qa;

      if (!c.all_commit) {
        add_log_prob_grad(&policy.action(c.state, 0), n, traj.counterfactual(t, agent), w * qa,
                          &out.value.action(c.state, 0));
      }

      double gc = coef * (traj.commits(t, agent) - policy.commit_probability(c.commit_row));
      if (others_commit(traj, t, agent)) {
        const double cs = commit_soft(traj, t, policy, c.commit_row, agent, c.tau);
        gc += (qm - qa) * cs * (1.0 - cs) / c.tau;
      }
      out.value.commit(c.commit_row, 1) += w * gc;
      out.value.commit(c.commit_row, 0) -= w * gc;

      add_log_prob_grad(&policy.proposal(c.state, 0), n, traj.proposals(t, agent), w * coef,
                        &out.value.proposal(c.state, 0));
      proposal_vector(spec, traj, t, view, agent, c, qm, qa, true, true, v);
      add_through_relaxed_proposal(spec, traj, t, policy, agent, offset, v, w, c.tau,
                                   out.value.proposal);

      if (with_ic) add_ic_step(spec, traj, t, view, agent, w, out.ic);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.value *= inv;
  out.ic *= inv;
  return out;
}

}  // namespace mcg
