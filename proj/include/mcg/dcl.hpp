#pragma once

// Differentiable commitment learning: the training loop (collect batch, fit
// critics, estimate gradients, simultaneous update), centralized and
// decentralized (opponent-model) variants.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcg/estimators.hpp"
#include "mcg/game.hpp"
#include "mcg/policy.hpp"
#include "mcg/rollout.hpp"

namespace mcg {

/// Raised when any parameter becomes non-finite during training.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// start - decay * k, floored at min.
struct LinearSchedule {
  double start = 1.0;
  double decay = 0.0;
  double min = 0.0;

  double at(int iteration) const;
};

enum class TrainMode { centralized, decentralized };
enum class OptimizerKind { sgd, adam };
// How the critic's MSE gradient is normalized: over all |D|T samples, or
// per visited cell (each cell moves toward its empirical mean at rate lr).
enum class CriticNormalization { batch, cell };

struct TrainerConfig {
  double lr_policy = 4e-4;
  double lr_value = 8e-4;
  double lambda_ic = 1.0;
  int batch_size = 128;
  int iterations = 10000;
  // Critic gradient steps per iteration; the policies take one step.
  int updates_per_iteration = 1;
  LinearSchedule entropy{1.0, 0.0005, 0.0};
  LinearSchedule temperature{10.0, 0.05, 1.0};
  EntropyTargets entropy_targets;
  bool discounted_state_weighting = false;
  TrainMode mode = TrainMode::centralized;
  bool ic_enabled = true;
  OptimizerKind optimizer = OptimizerKind::adam;
  OptimizerKind critic_optimizer = OptimizerKind::sgd;
  CriticNormalization critic_normalization = CriticNormalization::cell;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Per-agent global-norm clip of the policy gradient; 0 disables.
  double grad_clip = 0.0;
  // Freeze the commitment policy at "always reject" (plain actor-critic).
  bool force_reject = false;
  // Std of the normal draw that initializes each learner's opponent-model
  // logits (decentralized mode); 0 starts the models at the true initial tables.
  double model_init_scale = 1.0;
  int metric_every = 1;

  void validate() const;
};

struct MetricsRow {
  int iteration = 0;
  std::uint64_t seed = 0;
  std::vector<double> returns;             // mean undiscounted return per agent
  std::vector<double> discounted_returns;  // mean G_0 per agent
  double welfare = 0.0;                    // sum of discounted_returns
  double agreement_rate = 0.0;
  std::vector<std::vector<double>> proposal_freq;  // [agent][proposal]
  double entropy_coef = 0.0;
  double temperature = 0.0;
};

/// Batch statistics for one MetricsRow.
MetricsRow batch_metrics(const GameSpec& spec, const Batch& batch, int iteration,
                         std::uint64_t seed, double entropy_coef, double temperature);

/// Adam / SGD state for one logit table.
class TableOptimizer {
 public:
  TableOptimizer() = default;
  TableOptimizer(OptimizerKind kind, double lr, double beta1, double beta2, double epsilon,
                 Eigen::Index rows, Eigen::Index cols);
  // Ascent step: params += step(gradient).
  void ascend(RowMatrixXd& params, const RowMatrixXd& gradient);
  void descend(Eigen::Ref<Eigen::MatrixXd> params, const Eigen::MatrixXd& gradient);

 private:
  template <typename P, typename G>
  void apply(P& params, const G& gradient, double sign);

  OptimizerKind kind_ = OptimizerKind::sgd;
  double lr_ = 0.0;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double epsilon_ = 1e-8;
  long steps_ = 0;
  Eigen::MatrixXd m_;
  Eigen::MatrixXd v_;
};

struct PolicyOptimizer {
  TableOptimizer proposal;
  TableOptimizer commit;
  TableOptimizer action;

  static PolicyOptimizer make(const TrainerConfig& config, const AgentPolicy& policy);
  void ascend(AgentPolicy& policy, const AgentGradient& gradient);
};

/// Critic fitting under the configured normalization and optimizer.
class CriticFitter {
 public:
  CriticFitter() = default;
  CriticFitter(const TrainerConfig& config, const CriticTable& critic);
  void fit(CriticTable& critic, const CriticTargets& targets, int updates);

 private:
  CriticNormalization normalization_ = CriticNormalization::cell;
  double lr_ = 0.0;
  TableOptimizer optimizer_;
};

/// Agent i's models of the other agents (entry i is unused and empty).
struct OpponentModel {
  PolicyParams policies;
  std::vector<CriticTable> critics;
};

struct TrainResult {
  PolicyParams policies;
  std::vector<CriticTable> critics;
  std::vector<OpponentModel> opponent_models;  // decentralized only
  std::vector<MetricsRow> metrics;
};

// Called after every iteration with the updated parameters.
using IterationHook = std::function<void(int iteration, const PolicyParams&)>;

TrainResult train_centralized(const GameSpec& spec, const TrainerConfig& config,
                              std::uint64_t seed, const IterationHook& hook = {});
TrainResult train_decentralized(const GameSpec& spec, const TrainerConfig& config,
                                std::uint64_t seed, const IterationHook& hook = {});
// Dispatches on config.mode.
TrainResult train_dcl(const GameSpec& spec, const TrainerConfig& config, std::uint64_t seed,
                      const IterationHook& hook = {});

/// Perspective of learner `agent` in decentralized training: its own true
/// tables and its models of everyone else.
Perspective learner_perspective(int agent, const PolicyParams& policies,
                                const std::vector<CriticTable>& critics,
                                const OpponentModel& model);

// Rescales `gradient` so its Frobenius norm over all tables is at most `max_norm`.
void clip_gradient(AgentGradient& gradient, double max_norm);

}  // namespace mcg
