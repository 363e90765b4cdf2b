#pragma once

#include <cstdint>

#include "mcg/game.hpp"
#include "mcg/policy.hpp"

namespace mcg {

struct RolloutOptions {
  double temperature = 1.0;
  // When false, no proposal or commitment stage runs and every step executes
  // the independently sampled actions (no-commitment baseline).
  bool commitments_enabled = true;
};

// Independent stream per (run seed, iteration, episode); episodes can be
// generated in any order with identical results.
std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t iteration, std::uint64_t episode);

/// Plays one fixed-horizon episode. A counterfactual action is drawn from
/// every agent's action policy at every step, including committed ones, and
/// all proposal and commitment noise is recorded.
Trajectory rollout(const GameSpec& spec, const PolicyParams& policies,
                   const RolloutOptions& options, std::uint64_t seed);

Batch collect_batch(const GameSpec& spec, const PolicyParams& policies,
                    const RolloutOptions& options, int episodes, std::uint64_t run_seed,
                    std::uint64_t iteration);

}  // namespace mcg
