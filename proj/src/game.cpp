#include "mcg/game.hpp"

#include <cmath>
#include <string>

#include "mcg/tabular.hpp"

namespace mcg {

JointSpace::JointSpace(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  strides_.assign(sizes_.size(), 1);
  joint_size_ = 1;
  for (int i = static_cast<int>(sizes_.size()) - 1; i >= 0; --i) {
    if (sizes_[i] <= 0) throw ConfigError("every agent needs a nonempty action space");
    strides_[i] = joint_size_;
    joint_size_ *= sizes_[i];
  }
}

int JointSpace::encode(std::span<const int> joint) const {
  if (static_cast<int>(joint.size()) != n_agents()) {
    throw ContractViolation("joint index arity " + std::to_string(joint.size()) +
                            " != agent count " + std::to_string(n_agents()));
  }
  int index = 0;
  for (int i = 0; i < n_agents(); ++i) {
    if (joint[i] < 0 || joint[i] >= sizes_[i]) {
      throw ContractViolation("agent " + std::to_string(i) + " index " +
                              std::to_string(joint[i]) + " out of range");
    }
    index += joint[i] * strides_[i];
  }
  return index;
}

std::vector<int> JointSpace::decode(int index) const {
  if (index < 0 || index >= joint_size_) throw ContractViolation("joint index out of range");
  std::vector<int> out(sizes_.size());
  for (int i = 0; i < n_agents(); ++i) out[i] = digit(index, i);
  return out;
}

void GameSpec::validate() const {
  const int n = n_agents();
  if (n < 1) throw ConfigError(name + ": no agents");
  if (static_cast<int>(action_labels.size()) != n) throw ConfigError(name + ": label arity");
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(action_labels[i].size()) != joint.size(i)) {
      throw ConfigError(name + ": action labels do not match action space of agent " +
                        std::to_string(i));
    }
  }
  if (n_states() < 1) throw ConfigError(name + ": empty state space");
  if (horizon < 1) throw ConfigError(name + ": horizon must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError(name + ": gamma outside [0,1]");
  const int rows = n_states() * joint.joint_size();
  if (rewards.rows() != rows || rewards.cols() != n) throw ConfigError(name + ": reward shape");
  if (!rewards.allFinite()) throw ConfigError(name + ": non-finite reward");
  if (static_cast<int>(transitions.size()) != rows) throw ConfigError(name + ": transition shape");
  for (const auto& dist : transitions) {
    double total = 0.0;
    for (const auto& [next, p] : dist) {
      if (next < 0 || next >= n_states() || p < 0.0) {
        throw ConfigError(name + ": invalid transition entry");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError(name + ": transition mass != 1");
  }
  if (initial.size() != n_states() || std::abs(initial.sum() - 1.0) > 1e-9 ||
      initial.minCoeff() < 0.0) {
    throw ConfigError(name + ": invalid initial distribution");
  }
  if (substeps < 1) throw ConfigError(name + ": substeps must be positive");
}

GameSpec GameSpec::tabulate(std::string name, std::vector<std::string> state_labels,
                            std::vector<std::vector<std::string>> action_labels,
                            const RewardFn& reward, const TransitionFn& transition,
                            int initial_state, double gamma, int horizon) {
  GameSpec spec;
  spec.name = std::move(name);
  std::vector<int> sizes;
  for (const auto& labels : action_labels) sizes.push_back(static_cast<int>(labels.size()));
  spec.joint = JointSpace(std::move(sizes));
  spec.state_labels = std::move(state_labels);
  spec.action_labels = std::move(action_labels);
  spec.gamma = gamma;
  spec.horizon = horizon;
  const int n = spec.n_agents();
  const int joint_size = spec.joint.joint_size();
  spec.rewards.resize(spec.n_states() * joint_size, n);
  spec.transitions.resize(spec.n_states() * joint_size);
  for (int s = 0; s < spec.n_states(); ++s) {
    for (int j = 0; j < joint_size; ++j) {
      const std::vector<int> joint = spec.joint.decode(j);
      const Eigen::VectorXd r = reward(s, joint);
      if (r.size() != n) throw ConfigError(spec.name + ": reward arity");
      spec.rewards.row(spec.row(s, j)) = r.transpose();
      spec.transitions[spec.row(s, j)] = transition(s, joint);
    }
  }
  if (initial_state < 0 || initial_state >= spec.n_states()) {
    throw ConfigError(spec.name + ": initial state out of range");
  }
  spec.initial = Eigen::VectorXd::Zero(spec.n_states());
  spec.initial[initial_state] = 1.0;
  spec.validate();
  return spec;
}

StepRecord Trajectory::step(int t) const {
  StepRecord r;
  const int n = n_agents();
  r.state = states[t];
  r.proposal.resize(n);
  r.commit.resize(n);
  r.counterfactual.resize(n);
  r.executed.resize(n);
  for (int i = 0; i < n; ++i) {
    r.proposal[i] = proposals(t, i);
    r.commit[i] = commits(t, i);
    r.counterfactual[i] = counterfactual(t, i);
    r.executed[i] = executed(t, i);
  }
  r.rewards = rewards.row(t).transpose();
  r.proposal_noise = proposal_noise.row(t).transpose();
  r.commit_noise = commit_noise.row(t).transpose();
  r.temperature = temperatures[t];
  return r;
}

std::vector<int> noise_offsets(const GameSpec& spec) {
  std::vector<int> offsets(spec.n_agents() + 1, 0);
  for (int i = 0; i < spec.n_agents(); ++i) offsets[i + 1] = offsets[i] + spec.n_actions(i);
  return offsets;
}

int sample_next_state(const GameSpec& spec, int state, int executed_joint, std::mt19937_64& rng) {
  const auto& dist = spec.transitions[spec.row(state, executed_joint)];
  if (dist.size() == 1) return dist.front().first;
  const double u = open_unit(rng);
  double acc = 0.0;
  for (const auto& [next, p] : dist) {
    acc += p;
    if (u < acc) return next;
  }
  return dist.back().first;
}

StepOutcome step(const GameSpec& spec, int state, std::span<const int> joint_proposal,
                 std::span<const int> joint_commit, std::span<const int> counterfactual_action,
                 std::mt19937_64& rng) {
  if (state < 0 || state >= spec.n_states()) throw ContractViolation("state out of range");
  const int proposal_index = spec.joint.encode(joint_proposal);
  const int action_index = spec.joint.encode(counterfactual_action);
  if (static_cast<int>(joint_commit.size()) != spec.n_agents()) {
    throw ContractViolation("commit arity mismatch");
  }
  bool all_commit = true;
  for (int c : joint_commit) {
    if (c != 0 && c != 1) throw ContractViolation("commit decisions are bits");
    all_commit = all_commit && c == 1;
  }
  StepOutcome out;
  const int executed = all_commit ? proposal_index : action_index;
  out.executed = spec.joint.decode(executed);
  out.rewards = spec.rewards.row(spec.row(state, executed)).transpose();
  out.next_state = sample_next_state(spec, state, executed, rng);
  return out;
}

Eigen::MatrixXd compute_returns(const Eigen::MatrixXd& rewards, double gamma) {
  if (rewards.rows() == 0) throw ContractViolation("cannot compute returns of an empty trajectory");
  Eigen::MatrixXd g(rewards.rows(), rewards.cols());
  g.row(rewards.rows() - 1) = rewards.row(rewards.rows() - 1);
  for (Eigen::Index t = rewards.rows() - 2; t >= 0; --t) {
    g.row(t) = rewards.row(t) + gamma * g.row(t + 1);
  }
  return g;
}

Eigen::MatrixXd compute_returns(const Trajectory& trajectory, double gamma) {
  return compute_returns(trajectory.rewards, gamma);
}

}  // namespace mcg
