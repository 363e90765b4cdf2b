#pragma once

// Exact enumeration: expected values of (possibly stochastic) policy tuples,
// central finite differences, and a deterministic-strategy equilibrium check.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcg/game.hpp"
#include "mcg/policy.hpp"

namespace mcg {

inline constexpr double kDefaultEnumerationCap = 1e6;

/// Probability tables of one agent: proposal and action rows sum to one,
/// commit holds Pr(commit) per (state, joint proposal) row.
struct PolicyProbabilities {
  Eigen::MatrixXd proposal;
  Eigen::VectorXd commit;
  Eigen::MatrixXd action;
};

PolicyProbabilities probabilities(const AgentPolicy& policy);

struct DeterministicStrategy {
  std::vector<int> proposal;  // per state
  std::vector<int> commit;    // per (state * joint_size + joint proposal), 0 or 1
  std::vector<int> action;    // per state

  PolicyProbabilities probabilities(const GameSpec& spec, int agent) const;
  bool operator==(const DeterministicStrategy&) const = default;
};

/// Expected discounted return of every agent from the initial distribution,
/// by enumerating joint proposals x commitments x actions at every state and
/// backward induction over the horizon. Throws ContractViolation when the
/// enumeration would exceed `cap` terms.
Eigen::VectorXd exact_value(const GameSpec& spec, const std::vector<PolicyProbabilities>& policies,
                            double cap = kDefaultEnumerationCap);
Eigen::VectorXd exact_value(const GameSpec& spec, const PolicyParams& policies,
                            double cap = kDefaultEnumerationCap);
Eigen::VectorXd exact_value(const GameSpec& spec, const std::vector<DeterministicStrategy>& tuple,
                            double cap = kDefaultEnumerationCap);

/// Central differences (f(x + eps e_k) - f(x - eps e_k)) / (2 eps) per coordinate.
RowMatrixXd finite_difference_grad(const std::function<double(const RowMatrixXd&)>& objective,
                                   const RowMatrixXd& params, double epsilon);

/// Every deterministic strategy of `agent`, in a fixed order.
std::vector<DeterministicStrategy> enumerate_strategies(const GameSpec& spec, int agent,
                                                        double cap = kDefaultEnumerationCap);

struct Deviation {
  int agent = 0;
  DeterministicStrategy strategy;
  double gain = 0.0;
};

struct EquilibriumReport {
  std::string name;
  std::vector<DeterministicStrategy> tuple;
  Eigen::VectorXd value;
  bool is_nash = false;
  bool is_pareto_optimal = false;
  std::vector<Deviation> deviations;  // every unilateral deviation checked
  std::vector<int> strategies_per_agent;
  // An outcome vector that Pareto-dominates `value`, when one exists.
  Eigen::VectorXd dominating_value;
};

/// Checks every unilateral deterministic deviation and compares the outcome
/// against all deterministic strategy tuples for Pareto dominance. Refuses
/// (ContractViolation) beyond `cap` tuple evaluations.
EquilibriumReport verify_equilibrium(const GameSpec& spec,
                                     const std::vector<DeterministicStrategy>& tuple,
                                     double cap = kDefaultEnumerationCap, double tolerance = 1e-12);

namespace pd {

/// Proposes C, commits iff the co-player proposes C (also on the agent's own
/// D proposal), acts D. `commit_dd` is the response to (D, D).
std::vector<DeterministicStrategy> starred_tuple(const GameSpec& spec, int commit_dd);
/// Proposes D, never commits, acts D.
std::vector<DeterministicStrategy> mutual_defection_tuple(const GameSpec& spec);

}  // namespace pd

std::string describe_strategy(const GameSpec& spec, int agent, const DeterministicStrategy& s);
void write_report(std::ostream& out, const GameSpec& spec, const EquilibriumReport& report);

}  // namespace mcg
