#include "doctest.h"
#include "mcg/baselines.hpp"
#include "mcg/dcl.hpp"
#include "mcg/envs.hpp"
#include "mcg/oracle.hpp"

using namespace mcg;

TEST_CASE("linear schedules decay to their floor") {
  const LinearSchedule s{10.0, 0.05, 1.0};
  CHECK(s.at(0) == 10.0);
  CHECK(s.at(100) == doctest::Approx(5.0));
  CHECK(s.at(1000) == 1.0);
}

TEST_CASE("trainer config validation") {
  TrainerConfig c;
  CHECK_NOTHROW(c.validate());
  auto broken = [](auto edit) {
    TrainerConfig b;
    edit(b);
    return b;
  };
  CHECK_THROWS_AS(broken([](auto& b) { b.lr_policy = 0.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& b) { b.batch_size = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& b) { b.temperature = {1.0, 0.0, 0.0}; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& b) { b.entropy = {0.1, 0.0, 0.5}; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& b) { b.metric_every = 0; }).validate(), ConfigError);
  IndependentConfig ic;
  ic.updates_per_iteration = 0;
  CHECK_THROWS_AS(ic.validate(), ConfigError);
}

TEST_CASE("adam's first step moves each coordinate by the learning rate") {
  TableOptimizer opt(OptimizerKind::adam, 0.01, 0.9, 0.999, 1e-8, 1, 3);
  RowMatrixXd p = RowMatrixXd::Zero(1, 3);
  RowMatrixXd g(1, 3);
  g << 5.0, -0.2, 0.0;
  opt.ascend(p, g);
  CHECK(p(0, 0) == doctest::Approx(0.01));
  CHECK(p(0, 1) == doctest::Approx(-0.01));
  CHECK(p(0, 2) == 0.0);
  TableOptimizer sgd(OptimizerKind::sgd, 0.5, 0.9, 0.999, 1e-8, 1, 3);
  RowMatrixXd q = RowMatrixXd::Zero(1, 3);
  sgd.ascend(q, g);
  CHECK(q(0, 0) == 2.5);
  CHECK_THROWS_AS(sgd.ascend(q, RowMatrixXd::Zero(2, 2)), ContractViolation);
}

TEST_CASE("critic fitter normalizations") {
  const GameSpec pd = envs::prisoners_dilemma();
  CriticTargets t;
  t.counts = Eigen::MatrixXd::Zero(1, 4);
  t.sums = Eigen::MatrixXd::Zero(1, 4);
  t.counts(0, 1) = 3;
  t.sums(0, 1) = -6;
  t.samples = 10;
  TrainerConfig c;
  c.lr_value = 0.1;
  CriticTable cell = CriticTable::zeros(pd);
  CriticFitter(c, cell).fit(cell, t, 1);
  CHECK(cell(0, 1) == doctest::Approx(-0.4));  // 0.1 * 2 * (0 - (-2))
  CHECK(cell(0, 0) == 0.0);
  c.critic_normalization = CriticNormalization::batch;
  CriticTable batch = CriticTable::zeros(pd);
  CriticFitter(c, batch).fit(batch, t, 1);
  CHECK(batch(0, 1) == doctest::Approx(-0.12));  // 0.1 * 2/10 * (3*0 - (-6))
}

TEST_CASE("metrics are recorded every metric_every iterations and at the end") {
  const GameSpec pd = envs::prisoners_dilemma();
  TrainerConfig c;
  c.iterations = 25;
  c.metric_every = 10;
  int calls = 0;
  const TrainResult r = train_dcl(pd, c, 1, [&](int k, const PolicyParams&) { CHECK(k == calls++); });
  CHECK(calls == 25);
  REQUIRE(r.metrics.size() == 4);
  CHECK(r.metrics[0].iteration == 0);
  CHECK(r.metrics[2].iteration == 20);
  CHECK(r.metrics[3].iteration == 24);
  CHECK(r.metrics[1].temperature == doctest::Approx(10.0 - 0.05 * 10));
  CHECK(r.metrics[1].entropy_coef == doctest::Approx(1.0 - 0.0005 * 10));
  CHECK(r.opponent_models.empty());
}

TEST_CASE("zero iterations leave the policies uniform") {
  const GameSpec pd = envs::prisoners_dilemma();
  TrainerConfig c;
  c.iterations = 0;
  const TrainResult r = train_dcl(pd, c, 1);
  CHECK(r.metrics.empty());
  CHECK(r.policies[0].proposal.isZero(0.0));
}

TEST_CASE("forced rejection never executes a proposal") {
  const GameSpec pd = envs::prisoners_dilemma();
  TrainerConfig c;
  c.iterations = 50;
  c.force_reject = true;
  const TrainResult r = train_dcl(pd, c, 2);
  for (const auto& m : r.metrics) CHECK(m.agreement_rate == 0.0);
  CHECK(r.policies[0].commit_probability(0) < 1e-300);
}

TEST_CASE("centralized training on the dilemma moves toward committed cooperation") {
  const GameSpec pd = envs::prisoners_dilemma();
  TrainerConfig c;
  c.iterations = 3000;
  const TrainResult r = train_dcl(pd, c, 0);
  const auto p = probabilities(r.policies[0]);
  CHECK(p.proposal(0, envs::kCooperate) > 0.6);
  CHECK(p.commit[0] > 0.6);
  CHECK(p.action(0, envs::kDefect) > 0.6);
  CHECK(exact_value(pd, r.policies).sum() > -3.0);
}

TEST_CASE("decentralized training keeps one opponent model per pair") {
  const GameSpec pd = envs::prisoners_dilemma();
  TrainerConfig c;
  c.iterations = 40;
  c.mode = TrainMode::decentralized;
  const TrainResult r = train_dcl(pd, c, 3);
  REQUIRE(r.opponent_models.size() == 2);
  CHECK(r.opponent_models[0].policies[1].proposal.allFinite());
  CHECK(r.opponent_models[0].policies[0].proposal.size() == 0);
  CHECK_FALSE(r.opponent_models[0].policies[1].proposal.isApprox(r.policies[1].proposal));
  CHECK_FALSE(r.opponent_models[0].policies[1].proposal.isApprox(r.opponent_models[1].policies[0].proposal));
  // Same data, same fitting problem: model critics equal the true critics.
  CHECK((r.opponent_models[0].critics[1].values - r.critics[1].values).cwiseAbs().maxCoeff() < 1e-6);

  // Models started at the true tables see the same batch and noise, so the
  // run coincides with centralized training.
  c.model_init_scale = 0.0;
  const TrainResult same = train_dcl(pd, c, 3);
  c.mode = TrainMode::centralized;
  const TrainResult cen = train_dcl(pd, c, 3);
  CHECK(same.policies[0].proposal == cen.policies[0].proposal);
  CHECK(same.opponent_models[0].policies[1].proposal == cen.policies[1].proposal);
}

TEST_CASE("independent learners never commit and drift toward defection") {
  const GameSpec pd = envs::prisoners_dilemma();
  IndependentConfig c;
  c.iterations = 500;
  const TrainResult r = train_independent(pd, c, 4);
  for (const auto& m : r.metrics) CHECK(m.agreement_rate == 0.0);
  CHECK(probabilities(r.policies[0]).action(0, envs::kDefect) > 0.55);
  CHECK(r.policies[0].proposal.isZero(0.0));
  CHECK(r.policies[0].commit_probability(0) == 0.0);
  // Exact value is taken without commitments: W = -2 - Pr0(D) - Pr1(D).
  const double d0 = probabilities(r.policies[0]).action(0, envs::kDefect);
  const double d1 = probabilities(r.policies[1]).action(0, envs::kDefect);
  CHECK(exact_value(pd, r.policies).sum() == doctest::Approx(-2.0 - d0 - d1));
  const TrainerConfig t = c.as_trainer_config();
  CHECK(t.lr_policy == c.lr_policy);
  CHECK(independent_from(t).batch_size == c.batch_size);
}
