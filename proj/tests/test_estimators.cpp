#include <random>

#include "doctest.h"
#include "mcg/dcl.hpp"
#include "mcg/envs.hpp"
#include "mcg/estimators.hpp"
#include "mcg/oracle.hpp"
#include "mcg/rollout.hpp"
#include "mcg/tabular.hpp"

using namespace mcg;

namespace {

PolicyParams random_policies(const GameSpec& spec, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  PolicyParams p = zero_policies(spec);
  for (auto& a : p) {
    for (auto* t : {&a.proposal, &a.commit, &a.action}) {
      for (Eigen::Index k = 0; k < t->size(); ++k) t->data()[k] = normal(rng);
    }
  }
  return p;
}

std::vector<CriticTable> random_critics(const GameSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<CriticTable> q(spec.n_agents(), CriticTable::zeros(spec));
  for (auto& c : q) {
    for (Eigen::Index k = 0; k < c.values.size(); ++k) c.values.data()[k] = normal(rng);
  }
  return q;
}

}  // namespace

TEST_CASE("batch estimators are per-step sums divided by the batch size") {
  const GameSpec g = envs::grid_game(3, 4);
  const PolicyParams p = random_policies(g, 1, 1.0);
  const auto q = random_critics(g, 2);
  const Perspective view = make_perspective(p, q);
  const Batch batch = collect_batch(g, p, {1.5, true}, 16, 3, 0);
  for (int i = 0; i < 2; ++i) {
    RowMatrixXd action = RowMatrixXd::Zero(p[i].action.rows(), p[i].action.cols());
    RowMatrixXd commit = RowMatrixXd::Zero(p[i].commit.rows(), 2);
    RowMatrixXd proposal = RowMatrixXd::Zero(p[i].proposal.rows(), p[i].proposal.cols());
    RowMatrixXd ic = proposal;
    for (const auto& tr : batch) {
      for (int t = 0; t < tr.length(); ++t) {
        add_action_step(g, tr, t, view, i, 1.0, action);
        add_commitment_reinforce_step(g, tr, t, view, i, 1.0, commit);
        add_commitment_pathwise_step(g, tr, t, view, i, 1.0, commit);
        add_proposal_reinforce_step(g, tr, t, view, i, 1.0, proposal);
        add_proposal_commit_logprob_step(g, tr, t, view, i, 1.0, proposal);
        add_proposal_pathwise_step(g, tr, t, view, i, 1.0, proposal);
        add_ic_step(g, tr, t, view, i, 1.0, ic);
      }
    }
    const double n = static_cast<double>(batch.size());
    CHECK(estimate_action_grad(g, batch, view, i).isApprox(action / n));
    CHECK(estimate_commitment_grad(g, batch, view, i).isApprox(commit / n));
    CHECK(estimate_proposal_grad(g, batch, view, i).isApprox(proposal / n));
    CHECK(estimate_ic_grad(g, batch, view, i).isApprox(ic / n));
    const DclGradients all = estimate_dcl_gradients(g, batch, view, i, true);
    CHECK(all.value.action.isApprox(action / n));
    CHECK(all.value.commit.isApprox(commit / n));
    CHECK(all.value.proposal.isApprox(proposal / n));
    CHECK(all.ic.isApprox(ic / n));
    const DclGradients no_ic = estimate_dcl_gradients(g, batch, view, i, false);
    CHECK(no_ic.ic.isZero(0.0));
  }
}

TEST_CASE("discounted state weighting scales step t by gamma^t") {
  const GameSpec g = envs::grid_game(3, 3);
  const PolicyParams p = random_policies(g, 4, 1.0);
  const auto q = random_critics(g, 5);
  const Perspective view = make_perspective(p, q);
  const Batch batch = collect_batch(g, p, {1.0, true}, 1, 6, 0);
  RowMatrixXd expected = RowMatrixXd::Zero(p[0].action.rows(), p[0].action.cols());
  for (int t = 0; t < 3; ++t) add_action_step(g, batch[0], t, view, 0, std::pow(0.9, t), expected);
  CHECK(estimate_action_grad(g, batch, view, 0, {true, 0.9}).isApprox(expected));
}

TEST_CASE("action gradient vanishes on committed steps") {
  const GameSpec pd = envs::prisoners_dilemma();
  PolicyParams p = zero_policies(pd);
  for (auto& a : p) a.commit.col(1).setConstant(80.0);
  const auto q = random_critics(pd, 7);
  const Batch batch = collect_batch(pd, p, {1.0, true}, 32, 1, 0);
  CHECK(estimate_action_grad(pd, batch, make_perspective(p, q), 0).isZero(0.0));
}

TEST_CASE("commitment pathwise term needs the other agents to commit") {
  const GameSpec pd = envs::prisoners_dilemma();
  PolicyParams p = zero_policies(pd);
  p[1].commit.col(0).setConstant(80.0);  // agent 1 always rejects
  const auto q = random_critics(pd, 8);
  const Perspective view = make_perspective(p, q);
  const Batch batch = collect_batch(pd, p, {1.0, true}, 32, 2, 0);
  for (const auto& tr : batch) {
    RowMatrixXd out = RowMatrixXd::Zero(4, 2);
    add_commitment_pathwise_step(pd, tr, 0, view, 0, 1.0, out);
    CHECK(out.isZero(0.0));
  }
}

TEST_CASE("entropy gradient covers only visited rows and selected policies") {
  const GameSpec g = envs::grid_game(4, 2);
  const PolicyParams p = random_policies(g, 9, 0.5);
  const Batch batch = collect_batch(g, p, {1.0, true}, 3, 3, 0);
  const AgentGradient all = estimate_entropy_grad(g, batch, p[0], {});
  const AgentGradient action_only = estimate_entropy_grad(g, batch, p[0], {false, false, true});
  CHECK(action_only.proposal.isZero(0.0));
  CHECK(action_only.commit.isZero(0.0));
  CHECK(action_only.action.isApprox(all.action));
  std::vector<bool> visited(g.n_states(), false);
  for (const auto& tr : batch) {
    for (int s : tr.states) visited[s] = true;
  }
  for (int s = 0; s < g.n_states(); ++s) {
    if (!visited[s]) CHECK(all.action.row(s).isZero(0.0));
  }
}

TEST_CASE("entropy gradient matches finite differences on a visited row") {
  const GameSpec pd = envs::prisoners_dilemma();
  const PolicyParams p = random_policies(pd, 10, 1.0);
  const Batch batch = collect_batch(pd, p, {1.0, true}, 1, 4, 0);
  const AgentGradient g = estimate_entropy_grad(pd, batch, p[0], {true, false, false});
  const RowMatrixXd fd = finite_difference_grad(
      [](const RowMatrixXd& x) { return entropy(Eigen::VectorXd(x.row(0).transpose())); },
      p[0].proposal, 1e-6);
  CHECK((g.proposal - fd).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("decentralized learners never read the other agents' true tables") {
  const GameSpec g = envs::grid_game(3, 3);
  const PolicyParams truth = random_policies(g, 11, 1.0);
  const auto critics = random_critics(g, 12);
  OpponentModel model;
  model.policies = random_policies(g, 13, 1.0);
  model.critics = random_critics(g, 14);
  const Batch batch = collect_batch(g, truth, {1.0, true}, 8, 5, 0);

  PolicyParams poisoned = truth;
  std::vector<CriticTable> poisoned_critics = critics;
  const double nan = std::nan("");
  poisoned[1].proposal.setConstant(nan);
  poisoned[1].commit.setConstant(nan);
  poisoned[1].action.setConstant(nan);
  poisoned_critics[1].values.setConstant(nan);

  for (int target : {0, 1}) {
    const DclGradients clean =
        estimate_dcl_gradients(g, batch, learner_perspective(0, truth, critics, model), target, true);
    const DclGradients dirty = estimate_dcl_gradients(
        g, batch, learner_perspective(0, poisoned, poisoned_critics, model), target, true);
    CHECK(dirty.value.proposal.allFinite());
    CHECK(dirty.value.commit.allFinite());
    CHECK(dirty.ic.allFinite());
    CHECK(dirty.value.proposal == clean.value.proposal);
    CHECK(dirty.value.commit == clean.value.commit);
    CHECK(dirty.value.action == clean.value.action);
    CHECK(dirty.ic == clean.ic);
  }
}

TEST_CASE("gradient containers") {
  const GameSpec pd = envs::prisoners_dilemma();
  const AgentPolicy p = AgentPolicy::zeros(pd, 0);
  AgentGradient a = AgentGradient::zeros_like(p);
  a.action.setConstant(3.0);
  a.proposal.setConstant(4.0);
  AgentGradient b = a;
  b += a;
  b *= 0.5;
  CHECK(b.action == a.action);
  clip_gradient(a, 1.0);
  const double norm = std::sqrt(a.proposal.squaredNorm() + a.commit.squaredNorm() + a.action.squaredNorm());
  CHECK(norm == doctest::Approx(1.0));
}
