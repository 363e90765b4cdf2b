#include "mcg/dcl.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mcg {

namespace {

void check_finite(const AgentPolicy& p, int iteration, const std::string& who) {
  if (p.all_finite()) return;
  std::ostringstream msg;
  msg << "non-finite parameters in " << who << " after iteration " << iteration;
  throw TrainingDiverged(msg.str());
}

// Learner i's initial guess of agent b's tables, independent of b's own draw.
AgentPolicy initial_model(const GameSpec& spec, int learner, int b, double scale,
                          std::uint64_t seed) {
  AgentPolicy p = AgentPolicy::zeros(spec, b);
  if (scale <= 0.0) return p;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(learner), static_cast<std::uint32_t>(b), 0x6d6f646cu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto* table : {&p.proposal, &p.commit, &p.action}) {
    for (Eigen::Index k = 0; k < table->size(); ++k) table->data()[k] = normal(rng);
  }
  return p;
}

}  // namespace

double LinearSchedule::at(int iteration) const {
  return std::max(min, start - decay * iteration);
}

void TrainerConfig::validate() const {
  if (!(lr_policy > 0.0) || !(lr_value > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(lambda_ic >= 0.0)) throw ConfigError("lambda_ic must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (iterations < 0) throw ConfigError("iterations must be nonnegative");
  if (updates_per_iteration < 1) throw ConfigError("updates_per_iteration must be positive");
  for (const auto* s : {&entropy, &temperature}) {
    if (s->decay < 0.0) throw ConfigError("schedule decay must be nonnegative");
    if (s->min > s->start) throw ConfigError("schedule floor exceeds its start value");
  }
  if (!(temperature.min > 0.0)) throw ConfigError("temperature floor must be positive");
  if (entropy.min < 0.0) throw ConfigError("entropy floor must be nonnegative");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be nonnegative");
  if (metric_every < 1) throw ConfigError("metric_every must be positive");
  if (!(model_init_scale >= 0.0)) throw ConfigError("model_init_scale must be nonnegative");
}

MetricsRow batch_metrics(const GameSpec& spec, const Batch& batch, int iteration,
                         std::uint64_t seed, double entropy_coef, double temperature) {
  const int n = spec.n_agents();
  MetricsRow row;
  row.iteration = iteration;
  row.seed = seed;
  row.returns.assign(n, 0.0);
  row.discounted_returns.assign(n, 0.0);
  row.proposal_freq.resize(n);
  for (int i = 0; i < n; ++i) row.proposal_freq[i].assign(spec.n_actions(i), 0.0);
  row.entropy_coef = entropy_coef;
  row.temperature = temperature;
  if (batch.empty()) return row;
  double steps = 0.0;
  double agreed = 0.0;
  for (const auto& traj : batch) {
    for (int i = 0; i < n; ++i) {
      row.returns[i] += traj.rewards.col(i).sum();
      row.discounted_returns[i] += traj.returns(0, i);
    }
    for (int t = 0; t < traj.length(); ++t) {
      steps += 1.0;
      if (traj.all_commit(t)) agreed += 1.0;
      for (int i = 0; i < n; ++i) row.proposal_freq[i][traj.proposals(t, i)] += 1.0;
    }
  }
  const double episodes = static_cast<double>(batch.size());
  for (int i = 0; i < n; ++i) {
    row.returns[i] /= episodes;
    row.discounted_returns[i] /= episodes;
    row.welfare += row.discounted_returns[i];
    for (auto& f : row.proposal_freq[i]) f /= steps;
  }
  row.agreement_rate = agreed / steps;
  return row;
}

TableOptimizer::TableOptimizer(OptimizerKind kind, double lr, double beta1, double beta2,
                               double epsilon, Eigen::Index rows, Eigen::Index cols)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (kind_ == OptimizerKind::adam) {
    m_ = Eigen::MatrixXd::Zero(rows, cols);
    v_ = Eigen::MatrixXd::Zero(rows, cols);
  }
}

template <typename P, typename G>
void TableOptimizer::apply(P& params, const G& gradient, double sign) {
  if (params.rows() != gradient.rows() || params.cols() != gradient.cols()) {
    throw ContractViolation("gradient shape does not match parameters");
  }
  if (kind_ == OptimizerKind::sgd) {
    for (Eigen::Index r = 0; r < params.rows(); ++r) {
      for (Eigen::Index c = 0; c < params.cols(); ++c) params(r, c) += sign * lr_ * gradient(r, c);
    }
    return;
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (Eigen::Index r = 0; r < params.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.cols(); ++c) {
      const double g = gradient(r, c);
      m_(r, c) = beta1_ * m_(r, c) + (1.0 - beta1_) * g;
      v_(r, c) = beta2_ * v_(r, c) + (1.0 - beta2_) * g * g;
      params(r, c) += sign * lr_ * (m_(r, c) / c1) / (std::sqrt(v_(r, c) / c2) + epsilon_);
    }
  }
}

void TableOptimizer::ascend(RowMatrixXd& params, const RowMatrixXd& gradient) {
  apply(params, gradient, 1.0);
}

void TableOptimizer::descend(Eigen::Ref<Eigen::MatrixXd> params, const Eigen::MatrixXd& gradient) {
  apply(params, gradient, -1.0);
}

PolicyOptimizer PolicyOptimizer::make(const TrainerConfig& config, const AgentPolicy& policy) {
  auto table = [&](const RowMatrixXd& m) {
    return TableOptimizer(config.optimizer, config.lr_policy, config.adam_beta1, config.adam_beta2,
                          config.adam_epsilon, m.rows(), m.cols());
  };
  return {table(policy.proposal), table(policy.commit), table(policy.action)};
}

void PolicyOptimizer::ascend(AgentPolicy& policy, const AgentGradient& gradient) {
  proposal.ascend(policy.proposal, gradient.proposal);
  commit.ascend(policy.commit, gradient.commit);
  action.ascend(policy.action, gradient.action);
}

CriticFitter::CriticFitter(const TrainerConfig& config, const CriticTable& critic)
    : normalization_(config.critic_normalization),
      lr_(config.lr_value),
      optimizer_(config.critic_optimizer, config.lr_value, config.adam_beta1, config.adam_beta2,
                 config.adam_epsilon, critic.values.rows(), critic.values.cols()) {}

void CriticFitter::fit(CriticTable& critic, const CriticTargets& targets, int updates) {
  if (targets.samples <= 0.0) throw ContractViolation("critic batch is empty");
  Eigen::MatrixXd grad(critic.values.rows(), critic.values.cols());
  for (int u = 0; u < updates; ++u) {
    if (normalization_ == CriticNormalization::batch) {
      grad = 2.0 / targets.samples *
             (targets.counts.array() * critic.values.array() - targets.sums.array()).matrix();
    } else {
      // 2 (Q - mean G) on visited cells, zero elsewhere.
      grad = (targets.counts.array() > 0.0)
                 .select(2.0 * (critic.values.array() -
                                targets.sums.array() / targets.counts.array().max(1.0)),
                         0.0)
                 .matrix();
    }
    optimizer_.descend(critic.values, grad);
  }
}

void clip_gradient(AgentGradient& gradient, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = std::sqrt(gradient.proposal.squaredNorm() + gradient.commit.squaredNorm() +
                                gradient.action.squaredNorm());
  if (norm > max_norm) gradient *= max_norm / norm;
}

Perspective learner_perspective(int agent, const PolicyParams& policies,
                                const std::vector<CriticTable>& critics,
                                const OpponentModel& model) {
  const int n = static_cast<int>(policies.size());
  Perspective view;
  view.policies.resize(n);
  view.critics.resize(n);
  for (int b = 0; b < n; ++b) {
    view.policies[b] = b == agent ? &policies[b] : &model.policies[b];
    view.critics[b] = b == agent ? &critics[b] : &model.critics[b];
  }
  return view;
}

namespace {

struct LoopState {
  const GameSpec& spec;
  const TrainerConfig& config;
  std::uint64_t seed;
  EstimatorOptions estimator;
};

// Gradient for `target`'s tables as seen from `view`, including the IC term
// and the entropy bonus on `target_policy`.
AgentGradient full_gradient(const LoopState& s, const Batch& batch, const Perspective& view,
                            int target, double entropy_coef) {
  const bool with_ic = s.config.ic_enabled && s.config.lambda_ic > 0.0;
  DclGradients g = estimate_dcl_gradients(s.spec, batch, view, target, with_ic, s.estimator);
  if (with_ic) g.value.proposal += s.config.lambda_ic * g.ic;
  if (entropy_coef > 0.0) {
    AgentGradient h = estimate_entropy_grad(s.spec, batch, *view.policies[target],
                                            s.config.entropy_targets, s.estimator);
    h *= entropy_coef;
    g.value += h;
  }
  if (s.config.force_reject) g.value.commit.setZero();
  clip_gradient(g.value, s.config.grad_clip);
  return g.value;
}

bool record_metrics(const TrainerConfig& config, int k) {
  return k % config.metric_every == 0 || k == config.iterations - 1;
}

}  // namespace

TrainResult train_centralized(const GameSpec& spec, const TrainerConfig& config,
                              std::uint64_t seed, const IterationHook& hook) {
  config.validate();
  spec.validate();
  const int n = spec.n_agents();
  const LoopState s{spec, config, seed, {config.discounted_state_weighting, spec.gamma}};
  TrainResult result;
  result.policies = zero_policies(spec);
  if (config.force_reject) {
    for (auto& p : result.policies) p.never_commit();
  }
  std::vector<PolicyOptimizer> optimizers;
  std::vector<CriticFitter> fitters;
  for (int i = 0; i < n; ++i) {
    result.critics.push_back(CriticTable::zeros(spec));
    optimizers.push_back(PolicyOptimizer::make(config, result.policies[i]));
    fitters.emplace_back(config, result.critics[i]);
  }
  std::vector<AgentGradient> grads(n);
  for (int k = 0; k < config.iterations; ++k) {
    const double tau = config.temperature.at(k);
    const double ent = config.entropy.at(k);
    const Batch batch =
        collect_batch(spec, result.policies, {tau, true}, config.batch_size, seed, k);
    if (record_metrics(config, k)) result.metrics.push_back(batch_metrics(spec, batch, k, seed, ent, tau));
    for (int i = 0; i < n; ++i) {
      fitters[i].fit(result.critics[i], critic_targets(spec, batch, i), config.updates_per_iteration);
    }
    const Perspective view = make_perspective(result.policies, result.critics);
    for (int i = 0; i < n; ++i) grads[i] = full_gradient(s, batch, view, i, ent);
    for (int i = 0; i < n; ++i) {
      optimizers[i].ascend(result.policies[i], grads[i]);
      check_finite(result.policies[i], k, "agent " + std::to_string(i));
    }
    if (hook) hook(k, result.policies);
  }
  return result;
}

TrainResult train_decentralized(const GameSpec& spec, const TrainerConfig& config,
                                std::uint64_t seed, const IterationHook& hook) {
  config.validate();
  spec.validate();
  const int n = spec.n_agents();
  const LoopState s{spec, config, seed, {config.discounted_state_weighting, spec.gamma}};
  TrainResult result;
  result.policies = zero_policies(spec);
  if (config.force_reject) {
    for (auto& p : result.policies) p.never_commit();
  }
  std::vector<PolicyOptimizer> optimizers;
  std::vector<CriticFitter> fitters;
  for (int i = 0; i < n; ++i) {
    result.critics.push_back(CriticTable::zeros(spec));
    optimizers.push_back(PolicyOptimizer::make(config, result.policies[i]));
    fitters.emplace_back(config, result.critics[i]);
  }
  // model_optimizers[i][b], model_fitters[i][b]: agent i's model of b.
  std::vector<std::vector<PolicyOptimizer>> model_optimizers(n);
  std::vector<std::vector<CriticFitter>> model_fitters(n);
  result.opponent_models.resize(n);
  for (int i = 0; i < n; ++i) {
    OpponentModel& model = result.opponent_models[i];
    model.policies.resize(n);
    model.critics.resize(n);
    model_optimizers[i].resize(n);
    model_fitters[i].resize(n);
    for (int b = 0; b < n; ++b) {
      if (b == i) continue;
      model.policies[b] = initial_model(spec, i, b, config.model_init_scale, seed);
      if (config.force_reject) model.policies[b].never_commit();
      model.critics[b] = CriticTable::zeros(spec);
      model_optimizers[i][b] = PolicyOptimizer::make(config, model.policies[b]);
      model_fitters[i][b] = CriticFitter(config, model.critics[b]);
    }
  }
  std::vector<AgentGradient> grads(n);
  std::vector<std::vector<AgentGradient>> model_grads(n, std::vector<AgentGradient>(n));
  for (int k = 0; k < config.iterations; ++k) {
    const double tau = config.temperature.at(k);
    const double ent = config.entropy.at(k);
    const Batch batch =
        collect_batch(spec, result.policies, {tau, true}, config.batch_size, seed, k);
    if (record_metrics(config, k)) result.metrics.push_back(batch_metrics(spec, batch, k, seed, ent, tau));
    std::vector<CriticTargets> targets;
    for (int b = 0; b < n; ++b) targets.push_back(critic_targets(spec, batch, b));
    for (int i = 0; i < n; ++i) {
      fitters[i].fit(result.critics[i], targets[i], config.updates_per_iteration);
      for (int b = 0; b < n; ++b) {
        if (b != i) {
          model_fitters[i][b].fit(result.opponent_models[i].critics[b], targets[b],
                                  config.updates_per_iteration);
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      const Perspective view =
          learner_perspective(i, result.policies, result.critics, result.opponent_models[i]);
      grads[i] = full_gradient(s, batch, view, i, ent);
      for (int b = 0; b < n; ++b) {
        if (b != i) model_grads[i][b] = full_gradient(s, batch, view, b, ent);
      }
    }
    for (int i = 0; i < n; ++i) {
      optimizers[i].ascend(result.policies[i], grads[i]);
      check_finite(result.policies[i], k, "agent " + std::to_string(i));
      for (int b = 0; b < n; ++b) {
        if (b == i) continue;
        model_optimizers[i][b].ascend(result.opponent_models[i].policies[b], model_grads[i][b]);
        check_finite(result.opponent_models[i].policies[b], k,
                     "agent " + std::to_string(i) + "'s model of agent " + std::to_string(b));
      }
    }
    if (hook) hook(k, result.policies);
  }
  return result;
}

TrainResult train_dcl(const GameSpec& spec, const TrainerConfig& config, std::uint64_t seed,
                      const IterationHook& hook) {
  return config.mode == TrainMode::centralized ? train_centralized(spec, config, seed, hook)
                                               : train_decentralized(spec, config, seed, hook);
}

}  // namespace mcg
