#pragma once

// The experiment environments as tabulated game specs.

#include "mcg/game.hpp"

namespace mcg::envs {

// Action index conventions.
inline constexpr int kCooperate = 0;
inline constexpr int kDefect = 1;
inline constexpr int kForward = 0;
inline constexpr int kBackward = 1;

/// One-shot prisoner's dilemma, actions {C, D}:
/// (C,C) -> (-1,-1), (C,D) -> (-3,0), (D,C) -> (0,-3), (D,D) -> (-2,-2).
GameSpec prisoners_dilemma(double gamma = 0.99);

/// Per-step grid rewards at positions (p1, p2):
/// r1 = p1 - 2 (N-1-p2), r2 = (N-1-p2) - 2 p1.
Eigen::Vector2d grid_reward(int grid_size, int p1, int p2);

/// Two agents on a line of `grid_size` cells, starting at 0 and N-1. Each
/// step both move forward (+1) or backward (-1), clamped to the line; the
/// reward is grid_reward at the positions after the move. State label "(p1,p2)".
GameSpec grid_game(int grid_size, int horizon, double gamma = 0.99);

/// Purely conflicting matrix game repeated `horizon` times. With
/// mega_step > 1 each macro action is a sequence of `mega_step` base
/// actions, one commitment binds the whole block, the macro reward is the
/// block's summed base reward and the discount per macro step is
/// gamma^mega_step. The state is the (macro) timestep.
GameSpec repeated_conflict(int horizon, int mega_step = 1, double gamma = 0.99);

// Base-game payoff of the purely conflicting game.
Eigen::Vector2d conflict_payoff(int a1, int a2);

/// N-player binary public goods game: r_i = (beta / N) sum_j C_j - C_i,
/// action index = contribution. Requires 1 < beta < N.
GameSpec public_goods(int n_agents, double beta, double gamma = 0.99);

}  // namespace mcg::envs
