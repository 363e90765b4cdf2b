#include <random>
#include <sstream>

#include "doctest.h"
#include "mcg/envs.hpp"
#include "mcg/oracle.hpp"
#include "mcg/rollout.hpp"

using namespace mcg;

TEST_CASE("exact value of uniform play in the one-shot game") {
  const GameSpec pd = envs::prisoners_dilemma();
  const Eigen::VectorXd v = exact_value(pd, zero_policies(pd));
  // Every executed joint action is uniform, whoever commits.
  CHECK(v[0] == doctest::Approx(-1.5));
  CHECK(v[1] == doctest::Approx(-1.5));
}

TEST_CASE("exact value agrees with Monte Carlo on the grid game") {
  const GameSpec g = envs::grid_game(4, 6);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 1.0);
  PolicyParams p = zero_policies(g);
  for (auto& a : p) {
    for (auto* t : {&a.proposal, &a.commit, &a.action}) {
      for (Eigen::Index k = 0; k < t->size(); ++k) t->data()[k] = normal(rng);
    }
  }
  const Eigen::VectorXd exact = exact_value(g, p);
  const Batch batch = collect_batch(g, p, {1.0, true}, 40000, 3, 0);
  for (int i = 0; i < 2; ++i) {
    double sum = 0.0, sq = 0.0;
    for (const auto& tr : batch) {
      sum += tr.returns(0, i);
      sq += tr.returns(0, i) * tr.returns(0, i);
    }
    const double n = static_cast<double>(batch.size());
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - exact[i]) < 4.0 * se);
  }
}

TEST_CASE("deterministic tuples and probability tables agree") {
  const GameSpec pd = envs::prisoners_dilemma();
  const auto starred = pd::starred_tuple(pd, 0);
  std::vector<PolicyProbabilities> probs;
  for (int i = 0; i < 2; ++i) probs.push_back(starred[i].probabilities(pd, i));
  CHECK(exact_value(pd, probs) == exact_value(pd, starred));
  CHECK(exact_value(pd, starred)[0] == -1.0);
  // Commits iff the co-player proposes C.
  for (int i = 0; i < 2; ++i) {
    for (int m = 0; m < 4; ++m) {
      const bool other_c = pd.joint.digit(m, 1 - i) == envs::kCooperate;
      const bool own_d = pd.joint.digit(m, i) == envs::kDefect;
      if (other_c) CHECK(starred[i].commit[m] == 1);
      if (!other_c && !own_d) CHECK(starred[i].commit[m] == 0);
    }
  }
  CHECK(pd::starred_tuple(pd, 1)[0].commit[3] == 1);
  CHECK_THROWS_AS(pd::starred_tuple(envs::grid_game(4, 2), 0), ContractViolation);
}

TEST_CASE("strategy enumeration") {
  const GameSpec pd = envs::prisoners_dilemma();
  const auto all = enumerate_strategies(pd, 0);
  CHECK(all.size() == 64);
  for (std::size_t a = 0; a < all.size(); ++a) {
    for (std::size_t b = a + 1; b < all.size(); ++b) CHECK_FALSE(all[a] == all[b]);
  }
  CHECK_THROWS_AS(enumerate_strategies(envs::grid_game(4, 2), 0), ContractViolation);
}

TEST_CASE("enumeration caps are enforced") {
  const GameSpec g = envs::public_goods(3, 1.5);
  CHECK_NOTHROW(exact_value(g, zero_policies(g)));
  CHECK_THROWS_AS(exact_value(g, zero_policies(g), 10.0), ContractViolation);
  const GameSpec pd = envs::prisoners_dilemma();
  CHECK_THROWS_AS(verify_equilibrium(pd, pd::mutual_defection_tuple(pd), 1000.0), ContractViolation);
}

TEST_CASE("equilibrium verdicts") {
  const GameSpec pd = envs::prisoners_dilemma();
  const auto starred = verify_equilibrium(pd, pd::starred_tuple(pd, 1));
  CHECK(starred.is_nash);
  CHECK(starred.is_pareto_optimal);
  CHECK(starred.deviations.size() == 128);
  CHECK(starred.dominating_value.size() == 0);
  const auto md = verify_equilibrium(pd, pd::mutual_defection_tuple(pd));
  CHECK(md.is_nash);
  CHECK_FALSE(md.is_pareto_optimal);
  CHECK((md.dominating_value.array() > md.value.array()).any());

  // Always cooperating without commitment is exploitable.
  DeterministicStrategy naive{{0}, {0, 0, 0, 0}, {0}};
  const auto coop = verify_equilibrium(pd, {naive, naive});
  CHECK_FALSE(coop.is_nash);
  double best = 0.0;
  for (const auto& d : coop.deviations) best = std::max(best, d.gain);
  CHECK(best == doctest::Approx(1.0));

  std::ostringstream out;
  write_report(out, pd, starred);
  CHECK(out.str().find("is_nash: true") != std::string::npos);
  CHECK(describe_strategy(pd, 0, pd::mutual_defection_tuple(pd)[0]) == "propose=D commit={} act=D");
}

TEST_CASE("finite differences of a quadratic") {
  RowMatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  const RowMatrixXd g = finite_difference_grad([](const RowMatrixXd& y) { return y.squaredNorm(); }, x, 1e-4);
  CHECK((g - 2.0 * x).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_THROWS_AS(finite_difference_grad([](const RowMatrixXd&) { return 0.0; }, x, 0.0), ContractViolation);
}
