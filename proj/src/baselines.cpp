#include "mcg/baselines.hpp"

namespace mcg {

void IndependentConfig::validate() const {
  as_trainer_config().validate();
}

TrainerConfig IndependentConfig::as_trainer_config() const {
  TrainerConfig c;
  c.lr_policy = lr_policy;
  c.lr_value = lr_value;
  c.batch_size = batch_size;
  c.iterations = iterations;
  c.updates_per_iteration = updates_per_iteration;
  c.optimizer = optimizer;
  c.critic_optimizer = critic_optimizer;
  c.critic_normalization = critic_normalization;
  c.discounted_state_weighting = discounted_state_weighting;
  c.metric_every = metric_every;
  c.ic_enabled = false;
  c.lambda_ic = 0.0;
  c.entropy = {0.0, 0.0, 0.0};
  c.temperature = {1.0, 0.0, 1.0};
  return c;
}

IndependentConfig independent_from(const TrainerConfig& config) {
  IndependentConfig c;
  c.lr_policy = config.lr_policy;
  c.lr_value = config.lr_value;
  c.batch_size = config.batch_size;
  c.iterations = config.iterations;
  c.updates_per_iteration = config.updates_per_iteration;
  c.optimizer = config.optimizer;
  c.critic_optimizer = config.critic_optimizer;
  c.critic_normalization = config.critic_normalization;
  c.discounted_state_weighting = config.discounted_state_weighting;
  c.metric_every = config.metric_every;
  return c;
}

TrainResult train_independent(const GameSpec& spec, const IndependentConfig& config,
                              std::uint64_t seed, const IterationHook& hook) {
  config.validate();
  spec.validate();
  const TrainerConfig shared = config.as_trainer_config();
  const int n = spec.n_agents();
  const EstimatorOptions estimator{config.discounted_state_weighting, spec.gamma};
  const RolloutOptions rollout_options{1.0, false};
  TrainResult result;
  result.policies = zero_policies(spec);
  // Commitments are off in every rollout; pinning the tables keeps exact
  // evaluation and checkpoints consistent with that.
  for (auto& p : result.policies) p.never_commit();
  std::vector<TableOptimizer> optimizers;
  std::vector<CriticFitter> fitters;
  for (int i = 0; i < n; ++i) {
    result.critics.push_back(CriticTable::zeros(spec));
    const auto& action = result.policies[i].action;
    optimizers.emplace_back(config.optimizer, config.lr_policy, shared.adam_beta1, shared.adam_beta2,
                            shared.adam_epsilon, action.rows(), action.cols());
    fitters.emplace_back(shared, result.critics[i]);
  }
  std::vector<RowMatrixXd> grads(n);
  for (int k = 0; k < config.iterations; ++k) {
    const Batch batch =
        collect_batch(spec, result.policies, rollout_options, config.batch_size, seed, k);
    if (k % config.metric_every == 0 || k == config.iterations - 1) {
      result.metrics.push_back(batch_metrics(spec, batch, k, seed, 0.0, 1.0));
    }
    for (int i = 0; i < n; ++i) {
      fitters[i].fit(result.critics[i], critic_targets(spec, batch, i), config.updates_per_iteration);
    }
    const Perspective view = make_perspective(result.policies, result.critics);
    for (int i = 0; i < n; ++i) grads[i] = estimate_action_grad(spec, batch, view, i, estimator);
    for (int i = 0; i < n; ++i) {
      optimizers[i].ascend(result.policies[i].action, grads[i]);
      if (!result.policies[i].action.allFinite()) {
        throw TrainingDiverged("non-finite action logits in agent " + std::to_string(i) +
                               " after iteration " + std::to_string(k));
      }
    }
    if (hook) hook(k, result.policies);
  }
  return result;
}

}  // namespace mcg
