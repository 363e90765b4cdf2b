#pragma once

// Independent policy-gradient learner: no proposals or commitments, each
// agent ascends Q^i(x,a) grad log pi^i(a^i|x) with its own joint-action critic.

#include <cstdint>

#include "mcg/dcl.hpp"

namespace mcg {

struct IndependentConfig {
  double lr_policy = 4e-4;
  double lr_value = 8e-4;
  int batch_size = 128;
  int iterations = 10000;
  // Critic gradient steps per iteration; the policies take one step.
  int updates_per_iteration = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  OptimizerKind critic_optimizer = OptimizerKind::sgd;
  CriticNormalization critic_normalization = CriticNormalization::cell;
  bool discounted_state_weighting = false;
  int metric_every = 1;

  void validate() const;
  // The matching trainer settings for the shared optimizer and critic code.
  TrainerConfig as_trainer_config() const;
};

IndependentConfig independent_from(const TrainerConfig& config);

TrainResult train_independent(const GameSpec& spec, const IndependentConfig& config,
                              std::uint64_t seed, const IterationHook& hook = {});

}  // namespace mcg
