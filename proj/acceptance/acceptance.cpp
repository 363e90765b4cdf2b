// Acceptance suite: one check per named criterion, each printing a single
// PASS/FAIL line. Usage: mcg_acceptance <name>... | all | list

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "mcg/baselines.hpp"
#include "mcg/dcl.hpp"
#include "mcg/envs.hpp"
#include "mcg/estimators.hpp"
#include "mcg/harness.hpp"
#include "mcg/oracle.hpp"
#include "mcg/policy.hpp"
#include "mcg/rollout.hpp"
#include "mcg/tabular.hpp"

using namespace mcg;

namespace {

// ---- pinned tolerances and thresholds ----
constexpr double kValueTol = 1e-12;
constexpr double kEquilibriumSeconds = 1.0;
constexpr int kMonteCarloSamples = 100000;
constexpr double kStandardErrors = 3.0;
constexpr int kRandomInstances = 100;
constexpr double kPathwiseRelTol = 1e-4;
constexpr double kLogSoftmaxRelTol = 1e-5;
constexpr double kAbsFloor = 1e-9;
constexpr double kFdEpsilon = 1e-5;
constexpr double kEstimatorSeconds = 300.0;
constexpr double kPdThreshold = 0.95;
constexpr double kPdWelfareLow = -2.2;
constexpr double kPdWelfareHigh = -2.0;
constexpr int kPdQuorum = 9;
constexpr int kDecentralizedQuorum = 7;
constexpr int kOscillationFrom = 1000;
constexpr int kOscillationTo = 5000;
constexpr int kBaselineIterations = 2000;
constexpr double kBaselineWelfareLow = -4.2;
constexpr double kBaselineWelfareHigh = -3.8;
constexpr double kGridFraction = 0.10;
constexpr double kGridBaselineCeiling = -5.0;
constexpr int kGridQuorum = 7;
constexpr double kRpcReturnFraction = 0.3;
constexpr double kRpcAlternation = 0.8;
constexpr double kRpcBaselineBand = 0.05;
constexpr int kRpcQuorum = 7;
constexpr double kPublicGoodsAgreement = 0.99;
constexpr double kPublicGoodsWelfareTol = 0.15;
constexpr double kProbeCommitMax = 0.05;
constexpr double kProbeDefectMin = 0.95;
constexpr int kProbeEpisodes = 10000;
constexpr double kDeterminismSeconds = 60.0;
// Chi-square critical value, 3 degrees of freedom, p = 0.001.
constexpr double kChiSquare3 = 16.266;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// ---- pd_equilibrium ----

Verdict pd_equilibrium() {
  const auto t0 = std::chrono::steady_clock::now();
  const GameSpec spec = envs::prisoners_dilemma();
  bool ok = true;
  std::string detail;
  auto check_value = [](const Eigen::VectorXd& v, double target) {
    return std::abs(v[0] - target) <= kValueTol && std::abs(v[1] - target) <= kValueTol;
  };
  auto check_counts = [](const EquilibriumReport& r) {
    return r.strategies_per_agent == std::vector<int>{64, 64};
  };
  for (int commit_dd : {0, 1}) {
    const auto r = verify_equilibrium(spec, pd::starred_tuple(spec, commit_dd));
    const bool good = r.is_nash && r.is_pareto_optimal && check_value(r.value, -1.0) && check_counts(r);
    ok = ok && good;
    detail += fmt("starred(dd=%d) nash=%d pareto=%d value=(%g,%g); ", commit_dd, r.is_nash,
                  r.is_pareto_optimal, r.value[0], r.value[1]);
  }
  const auto md = verify_equilibrium(spec, pd::mutual_defection_tuple(spec));
  ok = ok && md.is_nash && !md.is_pareto_optimal && check_value(md.value, -2.0) && check_counts(md);
  detail += fmt("mutual-defect nash=%d pareto=%d value=(%g,%g); ", md.is_nash,
                md.is_pareto_optimal, md.value[0], md.value[1]);
  const double dt = seconds_since(t0);
  ok = ok && dt < kEquilibriumSeconds;
  detail += fmt("%.3fs", dt);
  return {ok, detail};
}

// ---- estimator_checks ----

double inf_norm(const RowMatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

bool close(const RowMatrixXd& analytic, const RowMatrixXd& fd, double rel) {
  return inf_norm(analytic - fd) <= rel * inf_norm(fd) + kAbsFloor;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

// Per-coordinate Monte Carlo check of the action-policy estimator against
// finite differences of the exact value on the one-shot game.
Verdict action_estimator_vs_exact(std::string& detail) {
  const GameSpec spec = envs::prisoners_dilemma();
  if (spec.horizon != 1 || spec.n_states() != 1) return {false, "expected a one-shot game"};
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  PolicyParams policies = zero_policies(spec);
  for (auto& p : policies) {
    for (auto* table : {&p.proposal, &p.commit, &p.action}) {
      for (Eigen::Index k = 0; k < table->size(); ++k) table->data()[k] = 0.8 * normal(rng);
    }
  }
  // One-shot game: Q^i(s, e) is the reward table itself.
  std::vector<CriticTable> critics;
  for (int i = 0; i < 2; ++i) {
    CriticTable q = CriticTable::zeros(spec);
    for (int e = 0; e < spec.joint.joint_size(); ++e) q.values(0, e) = spec.reward(0, e, i);
    critics.push_back(q);
  }
  const Perspective view = make_perspective(policies, critics);
  const Batch batch = collect_batch(spec, policies, {1.0, true}, kMonteCarloSamples, 2024, 0);
  bool ok = true;
  for (int i = 0; i < 2; ++i) {
    auto objective = [&](const RowMatrixXd& theta) {
      PolicyParams p = policies;
      p[i].action = theta;
      return exact_value(spec, p)[i];
    };
    const RowMatrixXd fd = finite_difference_grad(objective, policies[i].action, kFdEpsilon);
    RowMatrixXd sum = RowMatrixXd::Zero(1, 2);
    RowMatrixXd sq = RowMatrixXd::Zero(1, 2);
    for (const auto& traj : batch) {
      RowMatrixXd g = RowMatrixXd::Zero(1, 2);
      add_action_step(spec, traj, 0, view, i, 1.0, g);
      sum += g;
      sq += g.cwiseProduct(g);
    }
    const double n = static_cast<double>(batch.size());
    const RowMatrixXd mean = sum / n;
    const RowMatrixXd batch_mean = estimate_action_grad(spec, batch, view, i);
    ok = ok && inf_norm(batch_mean - mean) <= 1e-12;
    for (int k = 0; k < 2; ++k) {
      const double var = sq(0, k) / n - mean(0, k) * mean(0, k);
      const double se = std::sqrt(var * n / (n - 1.0) / n);
      const double z = std::abs(mean(0, k) - fd(0, k)) / se;
      ok = ok && z <= kStandardErrors;
      detail += fmt("a%d[%d] mc=%.5f fd=%.5f z=%.2f; ", i, k, mean(0, k), fd(0, k), z);
    }
  }
  return {ok, ""};
}

struct Instance {
  GameSpec spec;
  PolicyParams policies;
  std::vector<CriticTable> critics;
  Trajectory traj;
  int t = 0;
  int agent = 0;
};

Instance random_instance(std::mt19937_64& rng, int index) {
  Instance in;
  switch (index % 4) {
    case 0: in.spec = envs::prisoners_dilemma(); break;
    case 1: in.spec = envs::public_goods(3, 1.5); break;
    case 2: in.spec = envs::repeated_conflict(4, 2); break;
    default: in.spec = envs::grid_game(3, 2); break;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> tau_dist(0.3, 3.0);
  in.policies = zero_policies(in.spec);
  for (auto& p : in.policies) {
    for (auto* table : {&p.proposal, &p.commit, &p.action}) {
      for (Eigen::Index k = 0; k < table->size(); ++k) table->data()[k] = 1.5 * normal(rng);
    }
  }
  for (int i = 0; i < in.spec.n_agents(); ++i) {
    CriticTable q = CriticTable::zeros(in.spec);
    for (Eigen::Index k = 0; k < q.values.size(); ++k) q.values.data()[k] = 3.0 * normal(rng);
    in.critics.push_back(q);
  }
  in.traj = rollout(in.spec, in.policies, {tau_dist(rng), true}, rng());
  in.t = std::uniform_int_distribution<int>(0, in.spec.horizon - 1)(rng);
  in.agent = std::uniform_int_distribution<int>(0, in.spec.n_agents() - 1)(rng);
  return in;
}

// Straight-through surrogates, written directly from the step record.
struct Surrogates {
  const Instance& in;
  int s, m, a, js, i, off;
  double tau;
  bool all;

  explicit Surrogates(const Instance& x) : in(x) {
    s = x.traj.states[x.t];
    m = x.traj.proposal_joint[x.t];
    a = x.traj.counterfactual_joint[x.t];
    js = x.spec.joint.joint_size();
    i = x.agent;
    off = noise_offsets(x.spec)[i];
    tau = x.traj.temperatures[x.t];
    all = x.traj.all_commit(x.t);
  }

  bool others_commit(int j) const {
    for (int l = 0; l < in.spec.n_agents(); ++l) {
      if (l != j && in.traj.commits(in.t, l) != 1) return false;
    }
    return true;
  }
  double q(int agent, int joint) const { return in.critics[agent](s, joint); }
  double gap() const { return q(i, m) - q(i, a); }
  double coef() const { return all ? q(i, m) : q(i, a); }
  double commit_noise_diff(int j) const {
    return in.traj.commit_noise(in.t, 2 * j + 1) - in.traj.commit_noise(in.t, 2 * j);
  }

  // Relaxed proposal of agent i at eta, anchored at the hard sample.
  Eigen::VectorXd straight_through(const RowMatrixXd& eta) const {
    const int n = in.spec.n_actions(i);
    auto soft = [&](const RowMatrixXd& table) {
      Eigen::VectorXd z(n);
      for (int k = 0; k < n; ++k) z[k] = (table(s, k) + in.traj.proposal_noise(in.t, off + k)) / tau;
      return Eigen::VectorXd(softmax(z));
    };
    Eigen::VectorXd y = soft(eta) - soft(in.policies[i].proposal);
    y[in.spec.joint.digit(m, i)] += 1.0;
    return y;
  }
  double commit_gap(int j, int joint) const {
    const auto& c = in.policies[j].commit;
    return c(s * js + joint, 1) - c(s * js + joint, 0);
  }
  double relaxed_commit_gap(int j, const Eigen::VectorXd& y) const {
    double d = 0.0;
    for (int k = 0; k < y.size(); ++k) d += y[k] * commit_gap(j, in.spec.joint.replace(m, i, k));
    return d;
  }

  double commit_pathwise(const RowMatrixXd& zeta) const {
    if (!others_commit(i)) return 0.0;
    const int row = s * js + m;
    return gap() * sigmoid((zeta(row, 1) - zeta(row, 0) + commit_noise_diff(i)) / tau);
  }
  double proposal_pathwise(const RowMatrixXd& eta) const {
    const Eigen::VectorXd y = straight_through(eta);
    double total = 0.0;
    for (int j = 0; j < in.spec.n_agents(); ++j) {
      if (!others_commit(j)) continue;
      total += gap() * sigmoid((relaxed_commit_gap(j, y) + commit_noise_diff(j)) / tau);
    }
    return total;
  }
  double proposal_commit_logprob(const RowMatrixXd& eta) const {
    const Eigen::VectorXd y = straight_through(eta);
    double total = 0.0;
    for (int j = 0; j < in.spec.n_agents(); ++j) {
      const double d = relaxed_commit_gap(j, y);
      total += in.traj.commits(in.t, j) == 1 ? log_sigmoid(d) : log_sigmoid(-d);
    }
    return coef() * total;
  }
  double ic(const RowMatrixXd& eta) const {
    const Eigen::VectorXd y = straight_through(eta);
    double total = 0.0;
    for (int j = 0; j < in.spec.n_agents(); ++j) {
      if (!(q(j, m) < q(j, a))) continue;
      for (int k = 0; k < y.size(); ++k) total += y[k] * q(j, in.spec.joint.replace(m, i, k));
    }
    return total;
  }
  double log_row(const RowMatrixXd& table, int row, int chosen) const {
    return log_softmax(Eigen::VectorXd(table.row(row).transpose()))[chosen];
  }
  double action_reinforce(const RowMatrixXd& theta) const {
    return all ? 0.0 : q(i, a) * log_row(theta, s, in.traj.counterfactual(in.t, i));
  }
  double commit_reinforce(const RowMatrixXd& zeta) const {
    return coef() * log_row(zeta, s * js + m, in.traj.commits(in.t, i));
  }
  double proposal_reinforce(const RowMatrixXd& eta) const {
    return coef() * log_row(eta, s, in.traj.proposals(in.t, i));
  }
};

struct TermTally {
  std::string name;
  double rel = 0.0;
  int failures = 0;
  int active = 0;
  double worst = 0.0;

  void record(const RowMatrixXd& analytic, const RowMatrixXd& fd) {
    if (inf_norm(fd) > kAbsFloor) ++active;
    const double err = inf_norm(analytic - fd) / std::max(inf_norm(fd), kAbsFloor);
    if (inf_norm(fd) > kAbsFloor) worst = std::max(worst, err);
    if (!close(analytic, fd, rel)) ++failures;
  }
  std::string summary() const {
    return fmt("%s fail=%d active=%d worst_rel=%.2e; ", name.c_str(), failures, active, worst);
  }
};

Verdict estimator_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = action_estimator_vs_exact(detail).pass;

  TermTally commit_pw{"commit_pathwise", kPathwiseRelTol};
  TermTally prop_pw{"proposal_pathwise", kPathwiseRelTol};
  TermTally prop_lp{"proposal_commit_logprob", kPathwiseRelTol};
  TermTally ic{"ic", kPathwiseRelTol};
  TermTally act_rf{"action_logsoftmax", kLogSoftmaxRelTol};
  TermTally com_rf{"commit_logsoftmax", kLogSoftmaxRelTol};
  TermTally prop_rf{"proposal_logsoftmax", kLogSoftmaxRelTol};
  TermTally raw{"log_softmax_rows", kLogSoftmaxRelTol};

  std::mt19937_64 rng(4242);
  for (int n = 0; n < kRandomInstances; ++n) {
    const Instance in = random_instance(rng, n);
    const Surrogates sur(in);
    const Perspective view = make_perspective(in.policies, in.critics);
    const AgentPolicy& p = in.policies[in.agent];
    auto zeros = [](const RowMatrixXd& like) { return RowMatrixXd::Zero(like.rows(), like.cols()); };
    auto fd = [](auto f, const RowMatrixXd& x) { return finite_difference_grad(f, x, kFdEpsilon); };
    using Step = void (*)(const GameSpec&, const Trajectory&, int, const Perspective&, int, double,
                          RowMatrixXd&);
    auto analytic = [&](Step step, const RowMatrixXd& like) {
      RowMatrixXd out = zeros(like);
      step(in.spec, in.traj, in.t, view, in.agent, 1.0, out);
      return out;
    };

    commit_pw.record(analytic(add_commitment_pathwise_step, p.commit),
                     fd([&](const RowMatrixXd& z) { return sur.commit_pathwise(z); }, p.commit));
    prop_pw.record(analytic(add_proposal_pathwise_step, p.proposal),
                   fd([&](const RowMatrixXd& e) { return sur.proposal_pathwise(e); }, p.proposal));
    prop_lp.record(analytic(add_proposal_commit_logprob_step, p.proposal),
                   fd([&](const RowMatrixXd& e) { return sur.proposal_commit_logprob(e); }, p.proposal));
    ic.record(analytic(add_ic_step, p.proposal),
              fd([&](const RowMatrixXd& e) { return sur.ic(e); }, p.proposal));
    act_rf.record(analytic(add_action_step, p.action),
                  fd([&](const RowMatrixXd& th) { return sur.action_reinforce(th); }, p.action));
    com_rf.record(analytic(add_commitment_reinforce_step, p.commit),
                  fd([&](const RowMatrixXd& z) { return sur.commit_reinforce(z); }, p.commit));
    prop_rf.record(analytic(add_proposal_reinforce_step, p.proposal),
                   fd([&](const RowMatrixXd& e) { return sur.proposal_reinforce(e); }, p.proposal));

    // Row primitives: log-probability and entropy gradients.
    const int width = 2 + n % 5;
    RowMatrixXd row(1, width);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int k = 0; k < width; ++k) row(0, k) = normal(rng);
    const int chosen = n % width;
    RowMatrixXd lp(1, width);
    lp.row(0) = log_prob_gradient(Eigen::VectorXd(row.row(0).transpose()), chosen).transpose();
    raw.record(lp, fd([&](const RowMatrixXd& x) {
                 return log_softmax(Eigen::VectorXd(x.row(0).transpose()))[chosen];
               }, row));
    raw.record(log_prob_and_grad(row, 0, chosen).gradient,
               fd([&](const RowMatrixXd& x) {
                 return log_softmax(Eigen::VectorXd(x.row(0).transpose()))[chosen];
               }, row));
    RowMatrixXd eg(1, width);
    eg.row(0) = entropy_gradient(Eigen::VectorXd(row.row(0).transpose())).transpose();
    raw.record(eg, fd([&](const RowMatrixXd& x) {
                 return entropy(Eigen::VectorXd(x.row(0).transpose()));
               }, row));
  }
  for (const auto* tally : {&commit_pw, &prop_pw, &prop_lp, &ic, &act_rf, &com_rf, &prop_rf, &raw}) {
    ok = ok && tally->failures == 0 && tally->active > 0;
    detail += tally->summary();
  }
  const double dt = seconds_since(t0);
  ok = ok && dt < kEstimatorSeconds;
  detail += fmt("%.1fs", dt);
  return {ok, detail};
}

// ---- PD training outcomes ----

struct PdOutcome {
  double prop_c[2];
  double commit_cc[2];
  double act_d[2];
  double welfare = 0.0;

  bool meets() const {
    for (int i = 0; i < 2; ++i) {
      if (!(prop_c[i] > kPdThreshold && commit_cc[i] > kPdThreshold && act_d[i] > kPdThreshold)) {
        return false;
      }
    }
    return welfare >= kPdWelfareLow && welfare <= kPdWelfareHigh;
  }
  std::string describe() const {
    return fmt("propC=(%.3f,%.3f) commitCC=(%.3f,%.3f) actD=(%.3f,%.3f) W=%.3f", prop_c[0],
               prop_c[1], commit_cc[0], commit_cc[1], act_d[0], act_d[1], welfare);
  }
};

PdOutcome pd_outcome(const GameSpec& spec, const PolicyParams& policies) {
  PdOutcome o;
  const int cc_row = spec.row(0, spec.joint.encode(std::vector<int>{envs::kCooperate, envs::kCooperate}));
  for (int i = 0; i < 2; ++i) {
    const auto pr = probabilities(policies[i]);
    o.prop_c[i] = pr.proposal(0, envs::kCooperate);
    o.commit_cc[i] = pr.commit[cc_row];
    o.act_d[i] = pr.action(0, envs::kDefect);
  }
  o.welfare = exact_value(spec, policies).sum();
  return o;
}

double welfare_std(const std::vector<MetricsRow>& metrics, int from, int to) {
  std::vector<double> w;
  for (const auto& row : metrics) {
    if (row.iteration >= from && row.iteration <= to) w.push_back(row.welfare);
  }
  if (w.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : w) mean += x;
  mean /= static_cast<double>(w.size());
  double ss = 0.0;
  for (double x : w) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(w.size() - 1));
}

void log_seed(const std::string& tag, std::uint64_t seed, const std::string& text) {
  std::cout << "  [" << tag << " seed " << seed << "] " << text << std::endl;
}

Verdict pd_centralized() {
  ExperimentConfig cfg = ExperimentConfig::defaults("pd");
  cfg.algorithm = Algorithm::dcl_ic;
  const GameSpec spec = make_env(cfg.env);
  int good = 0;
  double mean_w = 0.0;
  for (auto seed : cfg.seeds) {
    const PdOutcome o = pd_outcome(spec, train_seed(cfg, spec, seed).policies);
    good += o.meets();
    mean_w += o.welfare / static_cast<double>(cfg.seeds.size());
    log_seed("centralized", seed, o.describe() + (o.meets() ? " ok" : " below"));
  }
  return {good >= kPdQuorum,
          fmt("%d/%zu seeds meet all thresholds (need %d); mean W=%.3f", good, cfg.seeds.size(),
              kPdQuorum, mean_w)};
}

Verdict pd_decentralized() {
  ExperimentConfig dec = ExperimentConfig::defaults("pd");
  dec.algorithm = Algorithm::dcl_decentralized_ic;
  ExperimentConfig cen = dec;
  cen.algorithm = Algorithm::dcl_ic;
  const GameSpec spec = make_env(dec.env);
  int good = 0;
  int wider = 0;
  for (auto seed : dec.seeds) {
    const TrainResult d = train_seed(dec, spec, seed);
    const TrainResult c = train_seed(cen, spec, seed);
    const PdOutcome o = pd_outcome(spec, d.policies);
    const double sd_dec = welfare_std(d.metrics, kOscillationFrom, kOscillationTo);
    const double sd_cen = welfare_std(c.metrics, kOscillationFrom, kOscillationTo);
    good += o.meets();
    wider += sd_dec > sd_cen;
    log_seed("decentralized", seed,
             o.describe() + fmt(" sd_W[%d,%d] dec=%.4f cen=%.4f", kOscillationFrom,
                                kOscillationTo, sd_dec, sd_cen));
  }
  const int n = static_cast<int>(dec.seeds.size());
  const bool ok = good >= kDecentralizedQuorum && 2 * wider > n;
  return {ok, fmt("%d/%d seeds meet thresholds (need %d); larger welfare sd on %d/%d seeds "
                  "(need majority)", good, n, kDecentralizedQuorum, wider, n)};
}

Verdict independent_baseline() {
  ExperimentConfig cfg = ExperimentConfig::defaults("pd");
  cfg.algorithm = Algorithm::independent_pg;
  cfg.trainer.iterations = kBaselineIterations;
  const GameSpec spec = make_env(cfg.env);
  int good = 0;
  for (auto seed : cfg.seeds) {
    const TrainResult r = train_seed(cfg, spec, seed);
    const double w = exact_value(spec, r.policies).sum();
    const bool in_band = w >= kBaselineWelfareLow && w <= kBaselineWelfareHigh;
    good += in_band;
    const auto p0 = probabilities(r.policies[0]);
    const auto p1 = probabilities(r.policies[1]);
    log_seed("independent", seed,
             fmt("actD=(%.3f,%.3f) W=%.3f", p0.action(0, 1), p1.action(0, 1), w));
  }
  const int n = static_cast<int>(cfg.seeds.size());
  return {good == n, fmt("%d/%d seeds with welfare in [%.1f, %.1f] after %d iterations", good, n,
                         kBaselineWelfareLow, kBaselineWelfareHigh, kBaselineIterations)};
}

// ---- grid and repeated conflict ----

Verdict grid_game() {
  ExperimentConfig dcl = ExperimentConfig::defaults("grid");
  dcl.algorithm = Algorithm::dcl_ic;
  ExperimentConfig ind = dcl;
  ind.algorithm = Algorithm::independent_pg;
  const GameSpec spec = make_env(dcl.env);
  // Dominant play without commitments: agent 0 forward, agent 1 backward.
  std::vector<DeterministicStrategy> defect(2);
  const int rows = spec.n_states() * spec.joint.joint_size();
  defect[0] = {std::vector<int>(spec.n_states(), 0), std::vector<int>(rows, 0),
               std::vector<int>(spec.n_states(), envs::kForward)};
  defect[1] = {std::vector<int>(spec.n_states(), 0), std::vector<int>(rows, 0),
               std::vector<int>(spec.n_states(), envs::kBackward)};
  const double w_defect = exact_value(spec, defect).sum();
  const double band = kGridFraction * std::abs(w_defect);
  int near_zero = 0;
  int ordered = 0;
  int baseline_low = 0;
  for (auto seed : dcl.seeds) {
    const double wd = exact_value(spec, train_seed(dcl, spec, seed).policies).sum();
    const double wi = exact_value(spec, train_seed(ind, spec, seed).policies).sum();
    near_zero += std::abs(wd) <= band;
    ordered += wd > wi;
    baseline_low += wi < kGridBaselineCeiling;
    log_seed("grid", seed, fmt("W dcl-ic=%.3f independent=%.3f", wd, wi));
  }
  const int n = static_cast<int>(dcl.seeds.size());
  const bool ok = near_zero >= kGridQuorum && ordered == n && baseline_low == n;
  return {ok, fmt("|W| <= %.3f (10%% of dominant-play W %.3f) on %d/%d seeds (need %d); "
                  "dcl-ic > independent on %d/%d; independent < %.0f on %d/%d",
                  band, w_defect, near_zero, n, kGridQuorum, ordered, n, kGridBaselineCeiling,
                  baseline_low, n)};
}

// Probability per block that both agents commit to a proposal whose two base
// steps are (A1,A2) then (A2,A1) or the reverse, averaged over blocks.
double alternation_rate(const GameSpec& spec, const PolicyParams& policies) {
  const auto& labels = spec.action_labels[0];
  auto index_of = [&](const std::string& l) {
    for (int k = 0; k < static_cast<int>(labels.size()); ++k) {
      if (labels[k] == l) return k;
    }
    throw std::runtime_error("missing macro label " + l);
  };
  const int x = index_of("A1A2");
  const int y = index_of("A2A1");
  const std::vector<int> targets = {spec.joint.encode(std::vector<int>{x, y}),
                                    spec.joint.encode(std::vector<int>{y, x})};
  std::vector<PolicyProbabilities> pr;
  for (const auto& p : policies) pr.push_back(probabilities(p));
  double total = 0.0;
  for (int s = 0; s < spec.n_states(); ++s) {
    for (int m : targets) {
      double p = 1.0;
      for (int i = 0; i < 2; ++i) {
        p *= pr[i].proposal(s, spec.joint.digit(m, i)) * pr[i].commit[spec.row(s, m)];
      }
      total += p;
    }
  }
  return total / spec.n_states();
}

Verdict rpc_mega_step() {
  ExperimentConfig dcl = ExperimentConfig::defaults("rpc");
  dcl.algorithm = Algorithm::dcl_ic;
  ExperimentConfig ind = dcl;
  ind.algorithm = Algorithm::independent_pg;
  const GameSpec spec = make_env(dcl.env);
  GameSpec undiscounted = spec;
  undiscounted.gamma = 1.0;
  const double base_steps = dcl.env.horizon;
  const double need = kRpcReturnFraction * base_steps / 2.0;
  const double band = kRpcBaselineBand * base_steps;
  int good = 0;
  int flat = 0;
  for (auto seed : dcl.seeds) {
    const PolicyParams pd = train_seed(dcl, spec, seed).policies;
    const PolicyParams pi = train_seed(ind, spec, seed).policies;
    const Eigen::VectorXd rd = exact_value(undiscounted, pd);
    const Eigen::VectorXd ri = exact_value(undiscounted, pi);
    const double alt = alternation_rate(spec, pd);
    const bool seed_ok = rd.minCoeff() >= need && alt >= kRpcAlternation && rd.sum() > ri.sum();
    good += seed_ok;
    flat += ri.cwiseAbs().maxCoeff() <= band;
    log_seed("rpc", seed, fmt("dcl-ic return=(%.3f,%.3f) alternation=%.3f independent "
                              "return=(%.3f,%.3f)", rd[0], rd[1], alt, ri[0], ri[1]));
  }
  const int n = static_cast<int>(dcl.seeds.size());
  const bool ok = good >= kRpcQuorum && flat == n;
  return {ok, fmt("dcl-ic return >= %.2f, alternation >= %.2f and above independent on %d/%d "
                  "seeds (need %d); independent within +-%.2f on %d/%d",
                  need, kRpcAlternation, good, n, kRpcQuorum, band, flat, n)};
}

// ---- public goods ----

double agreement_probability(const GameSpec& spec, const PolicyParams& policies) {
  std::vector<PolicyProbabilities> pr;
  for (const auto& p : policies) pr.push_back(probabilities(p));
  double total = 0.0;
  for (int s = 0; s < spec.n_states(); ++s) {
    for (int m = 0; m < spec.joint.joint_size(); ++m) {
      double p = spec.initial[s];
      for (int i = 0; i < spec.n_agents(); ++i) {
        p *= pr[i].proposal(s, spec.joint.digit(m, i)) * pr[i].commit[spec.row(s, m)];
      }
      total += p;
    }
  }
  return total;
}

Verdict public_goods() {
  const std::vector<std::pair<int, double>> reference = {{2, 0.997}, {3, 1.491}, {5, 1.989}};
  bool ok = true;
  std::string detail;
  for (const auto& [n_agents, target] : reference) {
    ExperimentConfig cfg = ExperimentConfig::defaults("public-goods");
    cfg.algorithm = Algorithm::dcl_ic;
    cfg.env.n_agents = n_agents;
    cfg.env.benefit_factor = 1.5;
    const GameSpec spec = make_env(cfg.env);
    double agree = 0.0;
    double welfare = 0.0;
    const double k = static_cast<double>(cfg.seeds.size());
    for (auto seed : cfg.seeds) {
      const PolicyParams p = train_seed(cfg, spec, seed).policies;
      const double a = agreement_probability(spec, p);
      const double w = exact_value(spec, p).sum();
      agree += a / k;
      welfare += w / k;
      log_seed("public-goods N=" + std::to_string(n_agents), seed,
               fmt("agreement=%.4f W=%.4f", a, w));
    }
    const bool good = agree > kPublicGoodsAgreement && std::abs(welfare - target) <= kPublicGoodsWelfareTol;
    ok = ok && good;
    detail += fmt("N=%d agreement=%.4f W=%.3f (target %.3f) %s; ", n_agents, agree, welfare,
                  target, good ? "ok" : "off");
  }
  return {ok, detail};
}

// ---- defect_probe ----

Verdict defect_probe() {
  ExperimentConfig cfg = ExperimentConfig::defaults("pd");
  cfg.algorithm = Algorithm::dcl_ic;
  const GameSpec spec = make_env(cfg.env);
  const std::uint64_t seed = cfg.seeds.front();
  const PolicyParams policies = train_seed(cfg, spec, seed).policies;
  const PdOutcome o = pd_outcome(spec, policies);
  log_seed("probe", seed, o.describe());
  const EvaluationReport r = evaluate(spec, policies, kProbeEpisodes, 777, true, true);
  bool ok = o.meets() && r.probes.size() == 2;
  std::string detail = fmt("converged=%d; ", o.meets());
  for (const auto& p : r.probes) {
    ok = ok && p.commit_rate < kProbeCommitMax && p.defect_rate > kProbeDefectMin;
    detail += fmt("learner %d commit=%.4f defect=%.4f return=%.3f; ", p.learner, p.commit_rate,
                  p.defect_rate, p.learner_return);
  }
  return {ok, detail};
}

// ---- determinism ----

bool same_metrics(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (metrics_csv_row(a[k]) != metrics_csv_row(b[k])) return false;
  }
  return true;
}

bool same_policies(const PolicyParams& a, const PolicyParams& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].proposal != b[i].proposal || a[i].commit != b[i].commit || a[i].action != b[i].action) {
      return false;
    }
  }
  return a.size() == b.size();
}

Verdict determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, bool>> checks;

  {
    const GameSpec pd = envs::prisoners_dilemma();
    TrainerConfig c;
    c.iterations = 300;
    const TrainResult a = train_dcl(pd, c, 5);
    const TrainResult b = train_dcl(pd, c, 5);
    const TrainResult other = train_dcl(pd, c, 6);
    checks.push_back({"centralized_repeat", same_metrics(a.metrics, b.metrics) && same_policies(a.policies, b.policies)});
    checks.push_back({"seed_changes_run", !same_metrics(a.metrics, other.metrics)});
    c.mode = TrainMode::decentralized;
    c.iterations = 100;
    const TrainResult d1 = train_dcl(pd, c, 5);
    const TrainResult d2 = train_dcl(pd, c, 5);
    checks.push_back({"decentralized_repeat", same_metrics(d1.metrics, d2.metrics) && same_policies(d1.policies, d2.policies)});
    const GameSpec grid = envs::grid_game(4, 16);
    IndependentConfig ic;
    ic.iterations = 20;
    ic.batch_size = 64;
    const TrainResult g1 = train_independent(grid, ic, 3);
    const TrainResult g2 = train_independent(grid, ic, 3);
    checks.push_back({"independent_repeat", same_metrics(g1.metrics, g2.metrics) && same_policies(g1.policies, g2.policies)});
  }

  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  {
    bool ok = true;
    for (int n = 0; n < 200; ++n) {
      Eigen::VectorXd z(1 + n % 7);
      for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = (n % 3 == 0 ? 300.0 : 3.0) * normal(rng);
      const Eigen::VectorXd p = softmax(z);
      const Eigen::VectorXd shifted = softmax(Eigen::VectorXd(z.array() + 123.0));
      ok = ok && p.allFinite() && std::abs(p.sum() - 1.0) <= 1e-12 && p.minCoeff() >= 0.0 &&
           (p - shifted).cwiseAbs().maxCoeff() <= 1e-12;
    }
    checks.push_back({"softmax_normalization", ok});
  }
  {
    Eigen::VectorXd z(4);
    z << 0.3, -1.2, 1.0, 0.0;
    const Eigen::VectorXd p = softmax(z);
    const int draws = 200000;
    Eigen::VectorXd hard_counts = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd relaxed_counts = Eigen::VectorXd::Zero(4);
    bool hard_matches = true;
    for (int n = 0; n < draws; ++n) {
      hard_counts[gumbel_argmax(z, rng)] += 1.0;
      const RelaxedSample s = sample_categorical_relaxed(z, 0.7, rng);
      relaxed_counts[s.hard] += 1.0;
      Eigen::Index arg;
      (z + s.noise).maxCoeff(&arg);
      hard_matches = hard_matches && arg == s.hard;
    }
    auto chi2 = [&](const Eigen::VectorXd& counts) {
      const Eigen::VectorXd expected = draws * p;
      return ((counts - expected).array().square() / expected.array()).sum();
    };
    checks.push_back({"gumbel_max_distribution", chi2(hard_counts) < kChiSquare3});
    checks.push_back({"relaxed_hard_distribution", chi2(relaxed_counts) < kChiSquare3 && hard_matches});
  }
  {
    const JointSpace joint({2, 3, 2});
    Eigen::VectorXd entries(joint.joint_size());
    for (Eigen::Index k = 0; k < entries.size(); ++k) entries[k] = normal(rng);
    bool ok = true;
    for (int j = 0; j < joint.joint_size(); ++j) {
      std::vector<Eigen::VectorXd> soft;
      for (int i = 0; i < 3; ++i) {
        soft.push_back(Eigen::VectorXd::Zero(joint.size(i)));
        soft.back()[joint.digit(j, i)] = 1.0;
      }
      ok = ok && multilinear_contract(joint, entries, soft).value == entries[j];
    }
    checks.push_back({"multilinear_corners", ok});
  }
  {
    bool ok = true;
    for (int n = 0; n < 20; ++n) {
      Eigen::MatrixXd r(1 + n, 3);
      for (Eigen::Index k = 0; k < r.size(); ++k) r.data()[k] = normal(rng);
      const double gamma = 0.5 + 0.025 * n;
      const Eigen::MatrixXd g = compute_returns(r, gamma);
      for (Eigen::Index t = 0; t < r.rows(); ++t) {
        const Eigen::RowVectorXd next = t + 1 < r.rows() ? Eigen::RowVectorXd(g.row(t + 1)) : Eigen::RowVectorXd::Zero(3);
        ok = ok && (g.row(t) - r.row(t) - gamma * next).cwiseAbs().maxCoeff() <= 1e-12;
      }
    }
    checks.push_back({"return_recursion", ok});
  }
  {
    const GameSpec grid = envs::grid_game(4, 8);
    PolicyParams policies = zero_policies(grid);
    for (auto& p : policies) p.commit.col(1).setConstant(60.0);
    std::vector<CriticTable> critics;
    for (int i = 0; i < 2; ++i) {
      CriticTable q = CriticTable::zeros(grid);
      for (Eigen::Index k = 0; k < q.values.size(); ++k) q.values.data()[k] = normal(rng);
      critics.push_back(q);
    }
    const Batch batch = collect_batch(grid, policies, {1.0, true}, 64, 8, 0);
    bool all = true;
    for (const auto& tr : batch) {
      for (int t = 0; t < tr.length(); ++t) all = all && tr.all_commit(t);
    }
    const Perspective view = make_perspective(policies, critics);
    bool zero = all;
    for (int i = 0; i < 2; ++i) zero = zero && estimate_action_grad(grid, batch, view, i).isZero(0.0);
    checks.push_back({"all_commit_zero_action_gradient", zero});

    // Q^j(x,m) >= Q^j(x,a) everywhere the batch visits: the hinge is inactive.
    PolicyParams mixed = zero_policies(grid);
    const Batch b2 = collect_batch(grid, mixed, {1.0, true}, 64, 9, 0);
    std::vector<CriticTable> flat(2, CriticTable::zeros(grid));
    for (const auto& tr : b2) {
      for (int t = 0; t < tr.length(); ++t) {
        for (auto& q : flat) q.values(tr.states[t], tr.proposal_joint[t]) = 5.0;
      }
    }
    const Perspective v2 = make_perspective(mixed, flat);
    bool inactive = true;
    for (int i = 0; i < 2; ++i) inactive = inactive && estimate_ic_grad(grid, b2, v2, i).isZero(0.0);
    checks.push_back({"inactive_hinge_zero_gradient", inactive});
  }

  bool ok = true;
  std::string detail;
  for (const auto& [name, pass] : checks) {
    ok = ok && pass;
    detail += name + (pass ? "=ok " : "=FAILED ");
  }
  const double dt = seconds_since(t0);
  ok = ok && dt < kDeterminismSeconds;
  detail += fmt("%.1fs", dt);
  return {ok, detail};
}

struct Criterion {
  const char* name;
  std::function<Verdict()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"pd_equilibrium", pd_equilibrium},
      {"estimator_checks", estimator_checks},
      {"pd_centralized", pd_centralized},
      {"pd_decentralized", pd_decentralized},
      {"independent_baseline", independent_baseline},
      {"grid_game", grid_game},
      {"rpc_mega_step", rpc_mega_step},
      {"public_goods", public_goods},
      {"defect_probe", defect_probe},
      {"determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> names(argv + 1, argv + argc);
  if (names.empty()) {
    std::cerr << "usage: mcg_acceptance <criterion>... | all | list\n";
    return 2;
  }
  if (names.size() == 1 && names[0] == "list") {
    for (const auto& c : criteria()) std::cout << c.name << '\n';
    return 0;
  }
  if (names.size() == 1 && names[0] == "all") {
    names.clear();
    for (const auto& c : criteria()) names.push_back(c.name);
  }
  int failures = 0;
  for (const auto& name : names) {
    const Criterion* found = nullptr;
    for (const auto& c : criteria()) {
      if (name == c.name) found = &c;
    }
    if (!found) {
      std::cerr << "unknown criterion '" << name << "'\n";
      return 2;
    }
    Verdict v;
    try {
      v = found->run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
