#include "mcg/oracle.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "mcg/tabular.hpp"

namespace mcg {

PolicyProbabilities probabilities(const AgentPolicy& policy) {
  PolicyProbabilities p;
  p.proposal.resize(policy.proposal.rows(), policy.proposal.cols());
  p.action.resize(policy.action.rows(), policy.action.cols());
  p.commit.resize(policy.commit.rows());
  for (Eigen::Index s = 0; s < policy.proposal.rows(); ++s) {
    p.proposal.row(s) = softmax(Eigen::VectorXd(policy.proposal.row(s).transpose())).transpose();
    p.action.row(s) = softmax(Eigen::VectorXd(policy.action.row(s).transpose())).transpose();
  }
  for (Eigen::Index r = 0; r < policy.commit.rows(); ++r) {
    p.commit[r] = policy.commit_probability(static_cast<int>(r));
  }
  return p;
}

PolicyProbabilities DeterministicStrategy::probabilities(const GameSpec& spec, int agent) const {
  const int n_states = spec.n_states();
  const int rows = n_states * spec.joint.joint_size();
  if (static_cast<int>(proposal.size()) != n_states || static_cast<int>(action.size()) != n_states ||
      static_cast<int>(commit.size()) != rows) {
    throw ContractViolation("strategy does not cover the game's states");
  }
  PolicyProbabilities p;
  p.proposal = Eigen::MatrixXd::Zero(n_states, spec.n_actions(agent));
  p.action = Eigen::MatrixXd::Zero(n_states, spec.n_actions(agent));
  p.commit.resize(rows);
  for (int s = 0; s < n_states; ++s) {
    p.proposal(s, proposal[s]) = 1.0;
    p.action(s, action[s]) = 1.0;
  }
  for (int r = 0; r < rows; ++r) p.commit[r] = commit[r] ? 1.0 : 0.0;
  return p;
}

Eigen::VectorXd exact_value(const GameSpec& spec, const std::vector<PolicyProbabilities>& policies,
                            double cap) {
  const int n = spec.n_agents();
  const int js = spec.joint.joint_size();
  const int n_states = spec.n_states();
  if (static_cast<int>(policies.size()) != n) throw ContractViolation("one policy per agent");
  const double work = static_cast<double>(n_states) * js * js * std::pow(2.0, n);
  if (work > cap) throw ContractViolation("exact_value enumeration exceeds the cap");

  // exec(s, e): probability that joint action e is executed in state s.
  Eigen::MatrixXd exec = Eigen::MatrixXd::Zero(n_states, js);
  for (int s = 0; s < n_states; ++s) {
    for (int m = 0; m < js; ++m) {
      double pm = 1.0;
      for (int i = 0; i < n; ++i) pm *= policies[i].proposal(s, spec.joint.digit(m, i));
      if (pm == 0.0) continue;
      for (int c = 0; c < (1 << n); ++c) {
        double pc = 1.0;
        for (int i = 0; i < n; ++i) {
          const double commit = policies[i].commit[s * js + m];
          pc *= (c >> i) & 1 ? commit : 1.0 - commit;
        }
        if (pc == 0.0) continue;
        const bool all = c == (1 << n) - 1;
        for (int a = 0; a < js; ++a) {
          double pa = 1.0;
          for (int i = 0; i < n; ++i) pa *= policies[i].action(s, spec.joint.digit(a, i));
          exec(s, all ? m : a) += pm * pc * pa;
        }
      }
    }
  }

  Eigen::MatrixXd value = Eigen::MatrixXd::Zero(n_states, n);  // zero steps remaining
  for (int h = 0; h < spec.horizon; ++h) {
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(n_states, n);
    for (int s = 0; s < n_states; ++s) {
      for (int e = 0; e < js; ++e) {
        const double p = exec(s, e);
        if (p == 0.0) continue;
        Eigen::VectorXd q = spec.rewards.row(spec.row(s, e)).transpose();
        for (const auto& [to, pt] : spec.transitions[spec.row(s, e)]) {
          q += spec.gamma * pt * value.row(to).transpose();
        }
        next.row(s) += p * q.transpose();
      }
    }
    value = next;
  }
  return value.transpose() * spec.initial;
}

Eigen::VectorXd exact_value(const GameSpec& spec, const PolicyParams& policies, double cap) {
  std::vector<PolicyProbabilities> probs;
  for (const auto& p : policies) probs.push_back(probabilities(p));
  return exact_value(spec, probs, cap);
}

Eigen::VectorXd exact_value(const GameSpec& spec, const std::vector<DeterministicStrategy>& tuple,
                            double cap) {
  std::vector<PolicyProbabilities> probs;
  for (int i = 0; i < static_cast<int>(tuple.size()); ++i) {
    probs.push_back(tuple[i].probabilities(spec, i));
  }
  return exact_value(spec, probs, cap);
}

RowMatrixXd finite_difference_grad(const std::function<double(const RowMatrixXd&)>& objective,
                                   const RowMatrixXd& params, double epsilon) {
  if (!(epsilon > 0.0)) throw ContractViolation("epsilon must be positive");
  RowMatrixXd grad(params.rows(), params.cols());
  RowMatrixXd x = params;
  for (Eigen::Index r = 0; r < params.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.cols(); ++c) {
      x(r, c) = params(r, c) + epsilon;
      const double up = objective(x);
      x(r, c) = params(r, c) - epsilon;
      const double down = objective(x);
      x(r, c) = params(r, c);
      grad(r, c) = (up - down) / (2.0 * epsilon);
    }
  }
  return grad;
}

std::vector<DeterministicStrategy> enumerate_strategies(const GameSpec& spec, int agent,
                                                        double cap) {
  const int n_states = spec.n_states();
  const int rows = n_states * spec.joint.joint_size();
  const int a = spec.n_actions(agent);
  const double count = std::pow(a, 2.0 * n_states) * std::pow(2.0, rows);
  if (count > cap) throw ContractViolation("strategy enumeration exceeds the cap");
  std::vector<DeterministicStrategy> out;
  out.reserve(static_cast<std::size_t>(count));
  const long total = static_cast<long>(count);
  for (long code = 0; code < total; ++code) {
    DeterministicStrategy s;
    s.proposal.resize(n_states);
    s.action.resize(n_states);
    s.commit.resize(rows);
    long rest = code;
    for (int st = 0; st < n_states; ++st) {
      s.proposal[st] = static_cast<int>(rest % a);
      rest /= a;
    }
    for (int r = 0; r < rows; ++r) {
      s.commit[r] = static_cast<int>(rest % 2);
      rest /= 2;
    }
    for (int st = 0; st < n_states; ++st) {
      s.action[st] = static_cast<int>(rest % a);
      rest /= a;
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

bool dominates(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol) {
  return (a.array() >= b.array() - tol).all() && (a.array() > b.array() + tol).any();
}

}  // namespace

EquilibriumReport verify_equilibrium(const GameSpec& spec,
                                     const std::vector<DeterministicStrategy>& tuple,
                                     double cap, double tolerance) {
  const int n = spec.n_agents();
  if (static_cast<int>(tuple.size()) != n) throw ContractViolation("one strategy per agent");
  std::vector<std::vector<DeterministicStrategy>> sets;
  double tuples = 1.0;
  double deviations = 0.0;
  for (int i = 0; i < n; ++i) {
    sets.push_back(enumerate_strategies(spec, i, cap));
    tuples *= static_cast<double>(sets.back().size());
    deviations += static_cast<double>(sets.back().size());
  }
  if (tuples + deviations > cap) throw ContractViolation("equilibrium check exceeds the cap");

  EquilibriumReport report;
  report.tuple = tuple;
  report.value = exact_value(spec, tuple, cap);
  for (const auto& s : sets) report.strategies_per_agent.push_back(static_cast<int>(s.size()));

  report.is_nash = true;
  for (int i = 0; i < n; ++i) {
    std::vector<DeterministicStrategy> alt = tuple;
    for (const auto& s : sets[i]) {
      alt[i] = s;
      const double gain = exact_value(spec, alt, cap)[i] - report.value[i];
      report.deviations.push_back({i, s, gain});
      if (gain > tolerance) report.is_nash = false;
    }
  }

  report.is_pareto_optimal = true;
  std::vector<std::size_t> index(n, 0);
  std::vector<DeterministicStrategy> candidate(n);
  while (true) {
    for (int i = 0; i < n; ++i) candidate[i] = sets[i][index[i]];
    const Eigen::VectorXd v = exact_value(spec, candidate, cap);
    if (dominates(v, report.value, tolerance)) {
      report.is_pareto_optimal = false;
      report.dominating_value = v;
      break;
    }
    int i = n - 1;
    while (i >= 0 && ++index[i] == sets[i].size()) index[i--] = 0;
    if (i < 0) break;
  }
  return report;
}

namespace pd {

std::vector<DeterministicStrategy> starred_tuple(const GameSpec& spec, int commit_dd) {
  if (spec.n_agents() != 2 || spec.n_states() != 1 || spec.n_actions(0) != 2) {
    throw ContractViolation("starred tuple is defined for the one-shot 2x2 game");
  }
  constexpr int kC = 0;
  constexpr int kD = 1;
  std::vector<DeterministicStrategy> tuple(2);
  for (int i = 0; i < 2; ++i) {
    auto& s = tuple[i];
    s.proposal = {kC};
    s.action = {kD};
    s.commit.resize(4);
    for (int m = 0; m < 4; ++m) {
      const int other = spec.joint.digit(m, 1 - i);
      const int own = spec.joint.digit(m, i);
      s.commit[m] = other == kC ? 1 : (own == kD ? commit_dd : 0);
    }
  }
  return tuple;
}

std::vector<DeterministicStrategy> mutual_defection_tuple(const GameSpec& spec) {
  if (spec.n_agents() != 2 || spec.n_states() != 1 || spec.n_actions(0) != 2) {
    throw ContractViolation("mutual-defection tuple is defined for the one-shot 2x2 game");
  }
  DeterministicStrategy s{{1}, {0, 0, 0, 0}, {1}};
  return {s, s};
}

}  // namespace pd

std::string describe_strategy(const GameSpec& spec, int agent, const DeterministicStrategy& s) {
  std::ostringstream out;
  const auto& labels = spec.action_labels[agent];
  out << "propose=";
  for (int st = 0; st < spec.n_states(); ++st) {
    if (st) out << ',';
    if (spec.n_states() > 1) out << spec.state_labels[st] << ':';
    out << labels[s.proposal[st]];
  }
  out << " commit={";
  bool first = true;
  for (int r = 0; r < static_cast<int>(s.commit.size()); ++r) {
    if (!s.commit[r]) continue;
    if (!first) out << ' ';
    first = false;
    std::string label = commit_row_label(spec, r);
    if (spec.n_states() == 1) label = label.substr(label.find('|') + 1);
    out << '(' << label << ')';
  }
  out << "} act=";
  for (int st = 0; st < spec.n_states(); ++st) {
    if (st) out << ',';
    if (spec.n_states() > 1) out << spec.state_labels[st] << ':';
    out << labels[s.action[st]];
  }
  return out.str();
}

void write_report(std::ostream& out, const GameSpec& spec, const EquilibriumReport& report) {
  out << std::setprecision(12);
  out << "tuple: " << report.name << '\n';
  for (int i = 0; i < static_cast<int>(report.tuple.size()); ++i) {
    out << "  agent" << i << ": " << describe_strategy(spec, i, report.tuple[i]) << '\n';
  }
  out << "value:";
  for (Eigen::Index i = 0; i < report.value.size(); ++i) out << ' ' << report.value[i];
  out << '\n';
  out << "strategies_per_agent:";
  for (int c : report.strategies_per_agent) out << ' ' << c;
  out << '\n';
  out << "is_nash: " << (report.is_nash ? "true" : "false") << '\n';
  out << "is_pareto_optimal: " << (report.is_pareto_optimal ? "true" : "false") << '\n';
  if (report.dominating_value.size() > 0) {
    out << "dominated_by:";
    for (Eigen::Index i = 0; i < report.dominating_value.size(); ++i) {
      out << ' ' << report.dominating_value[i];
    }
    out << '\n';
  }
  int profitable = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& d : report.deviations) {
    if (d.gain > 1e-12) ++profitable;
    best = std::max(best, d.gain);
  }
  out << "deviations_checked: " << report.deviations.size() << '\n';
  out << "profitable_deviations: " << profitable << '\n';
  out << "max_deviation_gain: " << best << '\n';
  for (const auto& d : report.deviations) {
    if (d.gain > 1e-12) {
      out << "  agent" << d.agent << " gain " << d.gain << ": "
          << describe_strategy(spec, d.agent, d.strategy) << '\n';
    }
  }
}

}  // namespace mcg
