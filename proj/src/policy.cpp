#include "mcg/policy.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "mcg/tabular.hpp"

namespace mcg {

AgentPolicy AgentPolicy::zeros(const GameSpec& spec, int agent) {
  AgentPolicy p;
  p.proposal = RowMatrixXd::Zero(spec.n_states(), spec.n_actions(agent));
  p.commit = RowMatrixXd::Zero(spec.n_states() * spec.joint.joint_size(), 2);
  p.action = RowMatrixXd::Zero(spec.n_states(), spec.n_actions(agent));
  return p;
}

double AgentPolicy::commit_probability(int commit_row) const {
  const double diff = commit(commit_row, 1) - commit(commit_row, 0);
  return 1.0 / (1.0 + std::exp(-diff));
}

void AgentPolicy::never_commit() {
  // exp(-1000) underflows, so the commit probability is exactly 0.
  commit.col(0).setZero();
  commit.col(1).setConstant(-1e3);
}

PolicyParams zero_policies(const GameSpec& spec) {
  PolicyParams out;
  for (int i = 0; i < spec.n_agents(); ++i) out.push_back(AgentPolicy::zeros(spec, i));
  return out;
}

LogProb log_prob_and_grad(const RowMatrixXd& logits, int row, int chosen) {
  if (row < 0 || row >= logits.rows() || chosen < 0 || chosen >= logits.cols()) {
    throw ContractViolation("log_prob_and_grad index out of range");
  }
  LogProb out;
  const Eigen::VectorXd r = logits.row(row).transpose();
  out.log_prob = log_softmax(r)[chosen];
  out.gradient = RowMatrixXd::Zero(logits.rows(), logits.cols());
  out.gradient.row(row) = log_prob_gradient(r, chosen).transpose();
  return out;
}

Contraction multilinear_contract(const JointSpace& joint,
                                 const Eigen::Ref<const Eigen::VectorXd>& entries,
                                 std::span<const Eigen::VectorXd> soft) {
  const int n = joint.n_agents();
  if (static_cast<int>(soft.size()) != n) throw ContractViolation("one soft vector per agent");
  if (entries.size() != joint.joint_size()) throw ContractViolation("table arity mismatch");
  for (int i = 0; i < n; ++i) {
    if (soft[i].size() != joint.size(i)) throw ContractViolation("soft vector arity mismatch");
  }
  Contraction out;
  out.partials.resize(n);
  for (int i = 0; i < n; ++i) out.partials[i] = Eigen::VectorXd::Zero(joint.size(i));
  std::vector<int> digits(n, 0);
  for (int j = 0; j < joint.joint_size(); ++j) {
    for (int i = 0; i < n; ++i) digits[i] = joint.digit(j, i);
    double weight = 1.0;
    for (int i = 0; i < n; ++i) weight *= soft[i][digits[i]];
    out.value += weight * entries[j];
    for (int i = 0; i < n; ++i) {
      double others = 1.0;
      for (int k = 0; k < n; ++k) {
        if (k != i) others *= soft[k][digits[k]];
      }
      out.partials[i][digits[i]] += others * entries[j];
    }
  }
  return out;
}

RelaxedCommitLogit commit_logit_relaxed(const AgentPolicy& policy, const GameSpec& spec, int state,
                                        std::span<const Eigen::VectorXd> relaxed_proposals) {
  const int js = spec.joint.joint_size();
  const auto block = policy.commit.block(state * js, 0, js, 2);
  return {multilinear_contract(spec.joint, block.col(0), relaxed_proposals),
          multilinear_contract(spec.joint, block.col(1), relaxed_proposals)};
}

CriticTargets critic_targets(const GameSpec& spec, const Batch& batch, int agent) {
  CriticTargets t;
  t.counts = Eigen::MatrixXd::Zero(spec.n_states(), spec.joint.joint_size());
  t.sums = Eigen::MatrixXd::Zero(spec.n_states(), spec.joint.joint_size());
  for (const auto& traj : batch) {
    for (int s = 0; s < traj.length(); ++s) {
      t.counts(traj.states[s], traj.executed_joint[s]) += 1.0;
      t.sums(traj.states[s], traj.executed_joint[s]) += traj.returns(s, agent);
    }
  }
  t.samples = static_cast<double>(batch.size()) * spec.horizon;
  return t;
}

void fit_critic(CriticTable& critic, const CriticTargets& targets, double learning_rate,
                int updates) {
  if (targets.samples <= 0.0) throw ContractViolation("critic batch is empty");
  const double scale = 2.0 * learning_rate / targets.samples;
  for (int u = 0; u < updates; ++u) {
    critic.values.array() -=
        scale * (targets.counts.array() * critic.values.array() - targets.sums.array());
  }
}

void fit_critic(CriticTable& critic, const GameSpec& spec, const Batch& batch, int agent,
                double learning_rate, int updates) {
  fit_critic(critic, critic_targets(spec, batch, agent), learning_rate, updates);
}

std::string commit_row_label(const GameSpec& spec, int row) {
  const int js = spec.joint.joint_size();
  const int state = row / js;
  const int j = row % js;
  std::string label = spec.state_labels[state] + "|";
  for (int i = 0; i < spec.n_agents(); ++i) {
    if (i) label += ",";
    label += spec.action_labels[i][spec.joint.digit(j, i)];
  }
  return label;
}

namespace {

std::string format_row(const RowMatrixXd& m, int row) {
  std::string out;
  char buf[40];
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    std::snprintf(buf, sizeof(buf), "%.17g", m(row, c));
    if (c) out += ' ';
    out += buf;
  }
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, const GameSpec& spec, const PolicyParams& policies,
                      const std::map<std::string, std::string>& meta) {
  out << "# mcg checkpoint v1\n";
  for (const auto& [k, v] : meta) out << "meta\t" << k << '\t' << v << '\n';
  for (int i = 0; i < static_cast<int>(policies.size()); ++i) {
    const std::string agent = "agent" + std::to_string(i);
    const auto& p = policies[i];
    for (int s = 0; s < p.proposal.rows(); ++s) {
      out << agent << ".proposal\t" << spec.state_labels[s] << '\t' << format_row(p.proposal, s)
          << '\n';
    }
    for (int r = 0; r < p.commit.rows(); ++r) {
      out << agent << ".commit\t" << commit_row_label(spec, r) << '\t' << format_row(p.commit, r)
          << '\n';
    }
    for (int s = 0; s < p.action.rows(); ++s) {
      out << agent << ".action\t" << spec.state_labels[s] << '\t' << format_row(p.action, s)
          << '\n';
    }
  }
}

std::map<std::string, std::string> read_checkpoint_meta(std::istream& in) {
  std::map<std::string, std::string> meta;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("meta\t", 0) != 0) continue;
    const auto tab = line.find('\t', 5);
    if (tab == std::string::npos) throw ConfigError("malformed checkpoint meta line: " + line);
    meta[line.substr(5, tab - 5)] = line.substr(tab + 1);
  }
  return meta;
}

PolicyParams read_checkpoint(std::istream& in, const GameSpec& spec) {
  PolicyParams policies = zero_policies(spec);
  std::unordered_map<std::string, int> state_rows;
  for (int s = 0; s < spec.n_states(); ++s) state_rows[spec.state_labels[s]] = s;
  std::unordered_map<std::string, int> commit_rows;
  for (int r = 0; r < spec.n_states() * spec.joint.joint_size(); ++r) {
    commit_rows[commit_row_label(spec, r)] = r;
  }
  std::vector<int> filled(policies.size() * 3, 0);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("meta\t", 0) == 0) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw ConfigError("malformed checkpoint line: " + line);
    }
    const std::string name = line.substr(0, t1);
    const std::string label = line.substr(t1 + 1, t2 - t1 - 1);
    const auto dot = name.find('.');
    if (name.rfind("agent", 0) != 0 || dot == std::string::npos) {
      throw ConfigError("unknown checkpoint table: " + name);
    }
    const int agent = std::stoi(name.substr(5, dot - 5));
    const std::string table = name.substr(dot + 1);
    if (agent < 0 || agent >= static_cast<int>(policies.size())) {
      throw ConfigError("checkpoint agent out of range for this environment: " + name);
    }
    RowMatrixXd* target = nullptr;
    int row = -1;
    int kind = 0;
    if (table == "proposal" || table == "action") {
      auto it = state_rows.find(label);
      if (it == state_rows.end()) throw ConfigError("unknown state label in checkpoint: " + label);
      row = it->second;
      target = table == "proposal" ? &policies[agent].proposal : &policies[agent].action;
      kind = table == "proposal" ? 0 : 2;
    } else if (table == "commit") {
      auto it = commit_rows.find(label);
      if (it == commit_rows.end()) throw ConfigError("unknown commit label in checkpoint: " + label);
      row = it->second;
      target = &policies[agent].commit;
      kind = 1;
    } else {
      throw ConfigError("unknown checkpoint table: " + name);
    }
    std::istringstream values(line.substr(t2 + 1));
    for (Eigen::Index c = 0; c < target->cols(); ++c) {
      std::string token;
      if (!(values >> token)) throw ConfigError("checkpoint row too short: " + line);
      (*target)(row, c) = std::strtod(token.c_str(), nullptr);
    }
    std::string extra;
    if (values >> extra) throw ConfigError("checkpoint row too long: " + line);
    filled[agent * 3 + kind] += 1;
  }
  for (int i = 0; i < static_cast<int>(policies.size()); ++i) {
    if (filled[i * 3] != policies[i].proposal.rows() || filled[i * 3 + 1] != policies[i].commit.rows() ||
        filled[i * 3 + 2] != policies[i].action.rows()) {
      throw ConfigError("checkpoint does not cover every table row of agent " + std::to_string(i));
    }
  }
  return policies;
}

}  // namespace mcg
