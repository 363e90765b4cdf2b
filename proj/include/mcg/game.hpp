#pragma once

// Markov commitment game protocol: the finite game tuple, the three-stage
// propose / commit / act step, and discounted Monte-Carlo returns.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcg {

/// Raised when an index or argument falls outside its declared space.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for unusable environment or trainer configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mixed-radix encoding of per-agent indices into one joint index. Agent 0
/// is the most significant digit, so a two-player table reads row = agent 0.
class JointSpace {
 public:
  JointSpace() = default;
  explicit JointSpace(std::vector<int> sizes);

  int n_agents() const { return static_cast<int>(sizes_.size()); }
  int size(int agent) const { return sizes_[agent]; }
  int joint_size() const { return joint_size_; }
  int stride(int agent) const { return strides_[agent]; }
  const std::vector<int>& sizes() const { return sizes_; }

  int encode(std::span<const int> joint) const;
  std::vector<int> decode(int index) const;
  int digit(int index, int agent) const { return (index / strides_[agent]) % sizes_[agent]; }
  // Joint index with `agent`'s digit replaced by `value`.
  int replace(int index, int agent, int value) const {
    return index + (value - digit(index, agent)) * strides_[agent];
  }

 private:
  std::vector<int> sizes_;
  std::vector<int> strides_;
  int joint_size_ = 1;
};

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXi = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RewardFn = std::function<Eigen::VectorXd(int state, std::span<const int> joint)>;
using TransitionFn =
    std::function<std::vector<std::pair<int, double>>(int state, std::span<const int> joint)>;

/// The finite game tuple. Proposal spaces equal action spaces, so one
/// JointSpace indexes both joint proposals and joint actions. Rewards and
/// transitions are tabulated on rows `state * joint_size + joint`.
struct GameSpec {
  std::string name;
  JointSpace joint;
  std::vector<std::string> state_labels;
  std::vector<std::vector<std::string>> action_labels;
  Eigen::MatrixXd rewards;
  std::vector<std::vector<std::pair<int, double>>> transitions;
  Eigen::VectorXd initial;
  double gamma = 1.0;
  int horizon = 1;
  // Base-game steps covered by one macro action (mega-step commitments).
  int substeps = 1;

  int n_agents() const { return joint.n_agents(); }
  int n_states() const { return static_cast<int>(state_labels.size()); }
  int n_actions(int agent) const { return joint.size(agent); }
  int row(int state, int joint_index) const { return state * joint.joint_size() + joint_index; }
  double reward(int state, int joint_index, int agent) const {
    return rewards(row(state, joint_index), agent);
  }

  // Throws ConfigError when a table invariant is broken.
  void validate() const;

  static GameSpec tabulate(std::string name, std::vector<std::string> state_labels,
                           std::vector<std::vector<std::string>> action_labels,
                           const RewardFn& reward, const TransitionFn& transition,
                           int initial_state, double gamma, int horizon);
};

/// One recorded timestep. Noise vectors hold the Gumbel draws used at
/// sampling time, concatenated per agent, so relaxed samples can be replayed.
struct StepRecord {
  int state = 0;
  std::vector<int> proposal;
  std::vector<int> commit;
  std::vector<int> counterfactual;
  std::vector<int> executed;
  Eigen::VectorXd rewards;
  Eigen::VectorXd proposal_noise;
  Eigen::VectorXd commit_noise;
  double temperature = 1.0;
};

/// One episode in structure-of-arrays layout: row t of each matrix is
/// timestep t, column i is agent i.
struct Trajectory {
  std::vector<int> states;
  RowMatrixXi proposals;
  RowMatrixXi commits;
  RowMatrixXi counterfactual;
  RowMatrixXi executed;
  std::vector<int> proposal_joint;
  std::vector<int> counterfactual_joint;
  std::vector<int> executed_joint;
  Eigen::MatrixXd rewards;
  Eigen::MatrixXd returns;
  // Row t: agent i's proposal noise at columns [offset_i, offset_i + |A_i|).
  RowMatrixXd proposal_noise;
  // Row t: columns (2i, 2i+1) hold agent i's (reject, commit) noise.
  RowMatrixXd commit_noise;
  Eigen::VectorXd temperatures;

  int length() const { return static_cast<int>(states.size()); }
  int n_agents() const { return static_cast<int>(rewards.cols()); }
  bool all_commit(int t) const { return commits.row(t).minCoeff() == 1; }
  StepRecord step(int t) const;
};

using Batch = std::vector<Trajectory>;

struct StepOutcome {
  std::vector<int> executed;
  Eigen::VectorXd rewards;
  int next_state = 0;
};

// Column offsets of each agent's proposal noise inside Trajectory::proposal_noise.
std::vector<int> noise_offsets(const GameSpec& spec);

int sample_next_state(const GameSpec& spec, int state, int executed_joint, std::mt19937_64& rng);

/// Applies the all-or-nothing commitment rule: the proposal is executed iff
/// every agent commits, otherwise the independently chosen actions are.
StepOutcome step(const GameSpec& spec, int state, std::span<const int> joint_proposal,
                 std::span<const int> joint_commit, std::span<const int> counterfactual_action,
                 std::mt19937_64& rng);

/// G_t = sum_{k>=t} gamma^{k-t} r_k for every agent; rows are timesteps.
Eigen::MatrixXd compute_returns(const Eigen::MatrixXd& rewards, double gamma);
Eigen::MatrixXd compute_returns(const Trajectory& trajectory, double gamma);

}  // namespace mcg
