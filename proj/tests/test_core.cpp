#include <random>
#include <sstream>

#include "doctest.h"
#include "mcg/envs.hpp"
#include "mcg/game.hpp"
#include "mcg/policy.hpp"
#include "mcg/rollout.hpp"
#include "mcg/tabular.hpp"

using namespace mcg;

TEST_CASE("joint space encodes agent 0 as the most significant digit") {
  const JointSpace js({2, 3, 2});
  CHECK(js.joint_size() == 12);
  CHECK(js.encode(std::vector<int>{1, 2, 0}) == 1 * 6 + 2 * 2 + 0);
  for (int j = 0; j < js.joint_size(); ++j) {
    const auto d = js.decode(j);
    CHECK(js.encode(d) == j);
    for (int i = 0; i < 3; ++i) {
      CHECK(js.digit(j, i) == d[i]);
      for (int v = 0; v < js.size(i); ++v) {
        auto e = d;
        e[i] = v;
        CHECK(js.replace(j, i, v) == js.encode(e));
      }
    }
  }
  CHECK_THROWS_AS(js.encode(std::vector<int>{2, 0, 0}), ContractViolation);
  CHECK_THROWS_AS(js.encode(std::vector<int>{0, 0}), ContractViolation);
  CHECK_THROWS_AS(js.decode(12), ContractViolation);
  CHECK_THROWS_AS(JointSpace({2, 0}), ConfigError);
}

TEST_CASE("prisoner's dilemma payoffs") {
  const GameSpec pd = envs::prisoners_dilemma();
  CHECK(pd.n_states() == 1);
  CHECK(pd.horizon == 1);
  const int C = envs::kCooperate, D = envs::kDefect;
  auto r = [&](int a, int b, int i) { return pd.reward(0, pd.joint.encode(std::vector<int>{a, b}), i); };
  CHECK(r(C, C, 0) == -1);
  CHECK(r(C, D, 0) == -3);
  CHECK(r(C, D, 1) == 0);
  CHECK(r(D, C, 0) == 0);
  CHECK(r(D, D, 1) == -2);
}

TEST_CASE("grid game moves, clamps and rewards after the move") {
  const GameSpec g = envs::grid_game(4, 16);
  CHECK(g.n_states() == 16);
  CHECK(g.initial[g.n_states() - 1 - 0] == doctest::Approx(0.0));
  const Eigen::Vector2d r = envs::grid_reward(4, 1, 2);
  CHECK(r[0] == 1 - 2 * (3 - 2));
  CHECK(r[1] == (3 - 2) - 2 * 1);
  // From (0,3): both forward -> (1,3).
  int start = 0;
  g.initial.maxCoeff(&start);
  CHECK(g.state_labels[start] == "(0,3)");
  const int fwd = g.joint.encode(std::vector<int>{envs::kForward, envs::kForward});
  const auto& next = g.transitions[g.row(start, fwd)];
  REQUIRE(next.size() == 1);
  CHECK(g.state_labels[next[0].first] == "(1,3)");
  CHECK(g.reward(start, fwd, 0) == envs::grid_reward(4, 1, 3)[0]);
  // Cooperative play keeps both at their start with zero reward.
  const int coop = g.joint.encode(std::vector<int>{envs::kBackward, envs::kForward});
  CHECK(g.transitions[g.row(start, coop)][0].first == start);
  CHECK(g.reward(start, coop, 0) == 0.0);
  CHECK(g.reward(start, coop, 1) == 0.0);
}

TEST_CASE("repeated conflict macro actions sum base payoffs") {
  CHECK(envs::conflict_payoff(0, 1) == Eigen::Vector2d(-1, 2));
  CHECK(envs::conflict_payoff(1, 0) == Eigen::Vector2d(2, -1));
  CHECK(envs::conflict_payoff(1, 1) == Eigen::Vector2d(0, 0));
  const GameSpec g = envs::repeated_conflict(16, 2);
  CHECK(g.n_states() == 8);
  CHECK(g.horizon == 8);
  CHECK(g.substeps == 2);
  CHECK(g.gamma == doctest::Approx(0.99 * 0.99));
  CHECK(g.action_labels[0] == std::vector<std::string>{"A1A1", "A1A2", "A2A1", "A2A2"});
  // (A1A2, A2A1): (-1,2) then (2,-1).
  const int alt = g.joint.encode(std::vector<int>{1, 2});
  CHECK(g.reward(0, alt, 0) == 1.0);
  CHECK(g.reward(0, alt, 1) == 1.0);
  CHECK_THROWS_AS(envs::repeated_conflict(15, 2), ConfigError);
}

TEST_CASE("public goods rewards and benefit-factor range") {
  const GameSpec g = envs::public_goods(3, 1.5);
  const int all = g.joint.encode(std::vector<int>{1, 1, 1});
  for (int i = 0; i < 3; ++i) CHECK(g.reward(0, all, i) == doctest::Approx(0.5));
  const int one = g.joint.encode(std::vector<int>{1, 0, 0});
  CHECK(g.reward(0, one, 0) == doctest::Approx(-0.5));
  CHECK(g.reward(0, one, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(envs::public_goods(2, 2.5), ConfigError);
  CHECK_THROWS_AS(envs::public_goods(1, 1.5), ConfigError);
}

TEST_CASE("validate rejects broken tables") {
  GameSpec g = envs::prisoners_dilemma();
  CHECK_NOTHROW(g.validate());
  GameSpec bad = g;
  bad.rewards(0, 0) = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = g;
  bad.transitions[0] = {{0, 0.5}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = g;
  bad.horizon = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("step executes the proposal only when everyone commits") {
  const GameSpec pd = envs::prisoners_dilemma();
  std::mt19937_64 rng(1);
  const std::vector<int> proposal = {0, 0};
  const std::vector<int> action = {1, 1};
  auto out = step(pd, 0, proposal, std::vector<int>{1, 1}, action, rng);
  CHECK(out.executed == proposal);
  CHECK(out.rewards[0] == -1);
  out = step(pd, 0, proposal, std::vector<int>{1, 0}, action, rng);
  CHECK(out.executed == action);
  CHECK(out.rewards[0] == -2);
  CHECK_THROWS_AS(step(pd, 0, proposal, std::vector<int>{1, 2}, action, rng), ContractViolation);
}

TEST_CASE("discounted returns") {
  Eigen::MatrixXd r(3, 1);
  r << 1, 2, 4;
  const Eigen::MatrixXd g = compute_returns(r, 0.5);
  CHECK(g(2, 0) == 4);
  CHECK(g(1, 0) == 4);
  CHECK(g(0, 0) == 3);
}

TEST_CASE("rollouts are reproducible and record every stage") {
  const GameSpec g = envs::grid_game(4, 16);
  PolicyParams p = zero_policies(g);
  const Trajectory a = rollout(g, p, {2.0, true}, 77);
  const Trajectory b = rollout(g, p, {2.0, true}, 77);
  CHECK(a.executed == b.executed);
  CHECK(a.proposal_noise == b.proposal_noise);
  CHECK(a.length() == 16);
  CHECK(a.temperatures.minCoeff() == 2.0);
  for (int t = 0; t < a.length(); ++t) {
    const RowMatrixXi expected = a.all_commit(t) ? RowMatrixXi(a.proposals.row(t)) : RowMatrixXi(a.counterfactual.row(t));
    CHECK(a.executed.row(t) == expected.row(0));
    CHECK(a.executed_joint[t] == (a.all_commit(t) ? a.proposal_joint[t] : a.counterfactual_joint[t]));
    // Recorded noise reproduces the hard samples.
    for (int i = 0; i < 2; ++i) {
      Eigen::Index arg;
      (p[i].proposal.row(a.states[t]) + a.proposal_noise.block(t, 2 * i, 1, 2)).maxCoeff(&arg);
      CHECK(arg == a.proposals(t, i));
    }
  }
  CHECK(a.returns.isApprox(compute_returns(a.rewards, g.gamma)));
  const Batch batch = collect_batch(g, p, {1.0, true}, 4, 5, 3);
  CHECK(batch[2].executed == rollout(g, p, {1.0, true}, episode_seed(5, 3, 2)).executed);
  CHECK(episode_seed(5, 3, 2) != episode_seed(5, 2, 3));
}

TEST_CASE("rollouts without commitments execute the sampled actions") {
  const GameSpec pd = envs::prisoners_dilemma();
  PolicyParams p = zero_policies(pd);
  for (auto& a : p) a.commit.col(1).setConstant(50.0);
  const Batch batch = collect_batch(pd, p, {1.0, false}, 50, 1, 0);
  for (const auto& tr : batch) {
    CHECK_FALSE(tr.all_commit(0));
    CHECK(tr.executed_joint[0] == tr.counterfactual_joint[0]);
  }
}

TEST_CASE("tabular primitives") {
  Eigen::VectorXd z(3);
  z << 1000.0, 999.0, -1000.0;
  const Eigen::VectorXd p = softmax(z);
  CHECK(p.allFinite());
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(log_softmax(z)[0] == doctest::Approx(std::log(p[0])));
  CHECK(entropy(Eigen::VectorXd::Zero(4)) == doctest::Approx(std::log(4.0)));
  const Eigen::MatrixXd j = tempered_softmax_jacobian(p, 2.0);
  CHECK(j.isApprox(j.transpose()));
  CHECK(std::abs(j.rowwise().sum().maxCoeff()) < 1e-12);
  std::mt19937_64 rng(3);
  for (int n = 0; n < 1000; ++n) {
    const double u = open_unit(rng);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  CHECK_THROWS(relaxed_from_noise(z, Eigen::VectorXd::Zero(2), 1.0));
  CHECK_THROWS(relaxed_from_noise(z, Eigen::VectorXd::Zero(3), 0.0));
}

TEST_CASE("log_prob_and_grad touches only the chosen row") {
  RowMatrixXd logits(3, 2);
  logits << 0.1, 0.2, 1.0, -1.0, 0.0, 0.0;
  const LogProb lp = log_prob_and_grad(logits, 1, 0);
  CHECK(lp.log_prob == doctest::Approx(log_softmax(Eigen::Vector2d(1.0, -1.0))[0]));
  CHECK(lp.gradient.row(0).isZero());
  CHECK(lp.gradient.row(2).isZero());
  CHECK(lp.gradient.row(1).sum() == doctest::Approx(0.0));
}

TEST_CASE("multilinear contraction partials are the face values") {
  const JointSpace js({2, 3});
  Eigen::VectorXd entries(6);
  entries << 1, 2, 3, 4, 5, 6;
  std::vector<Eigen::VectorXd> soft = {Eigen::Vector2d(0.25, 0.75), Eigen::Vector3d(0.2, 0.3, 0.5)};
  const Contraction c = multilinear_contract(js, entries, soft);
  double expected = 0.0;
  for (int j = 0; j < 6; ++j) expected += entries[j] * soft[0][js.digit(j, 0)] * soft[1][js.digit(j, 1)];
  CHECK(c.value == doctest::Approx(expected));
  CHECK(c.partials[0][1] == doctest::Approx(4 * 0.2 + 5 * 0.3 + 6 * 0.5));
  CHECK(c.partials[1][2] == doctest::Approx(3 * 0.25 + 6 * 0.75));
}

TEST_CASE("critic fitting moves visited cells toward mean returns") {
  const GameSpec pd = envs::prisoners_dilemma();
  const Batch batch = collect_batch(pd, zero_policies(pd), {1.0, true}, 400, 2, 0);
  const CriticTargets t = critic_targets(pd, batch, 0);
  CHECK(t.counts.sum() == 400);
  CHECK(t.samples == 400);
  CriticTable q = CriticTable::zeros(pd);
  fit_critic(q, t, 0.5, 200);
  for (int e = 0; e < 4; ++e) {
    if (t.counts(0, e) > 0) CHECK(q(0, e) == doctest::Approx(pd.reward(0, e, 0)).epsilon(1e-3));
  }
}

TEST_CASE("checkpoints round-trip exactly") {
  const GameSpec g = envs::repeated_conflict(8, 2);
  PolicyParams p = zero_policies(g);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (auto& a : p) {
    for (auto* t : {&a.proposal, &a.commit, &a.action}) {
      for (Eigen::Index k = 0; k < t->size(); ++k) t->data()[k] = normal(rng) / 3.0;
    }
  }
  std::stringstream ss;
  write_checkpoint(ss, g, p, {{"env.name", "rpc"}, {"seed", "3"}});
  std::stringstream copy(ss.str());
  const auto meta = read_checkpoint_meta(copy);
  CHECK(meta.at("env.name") == "rpc");
  CHECK(meta.at("seed") == "3");
  std::stringstream again(ss.str());
  const PolicyParams back = read_checkpoint(again, g);
  for (int i = 0; i < 2; ++i) {
    CHECK(back[i].proposal == p[i].proposal);
    CHECK(back[i].commit == p[i].commit);
    CHECK(back[i].action == p[i].action);
  }
  std::stringstream wrong(ss.str());
  CHECK_THROWS(read_checkpoint(wrong, envs::prisoners_dilemma()));
}
