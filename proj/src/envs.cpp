#include "mcg/envs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mcg::envs {

namespace {

std::vector<std::pair<int, double>> stay(int state, std::span<const int>) { return {{state, 1.0}}; }

}  // namespace

GameSpec prisoners_dilemma(double gamma) {
  static const double kPayoff[2][2][2] = {{{-1, -1}, {-3, 0}}, {{0, -3}, {-2, -2}}};
  return GameSpec::tabulate(
      "pd", {"s"}, {{"C", "D"}, {"C", "D"}},
      [](int, std::span<const int> a) {
        return Eigen::Vector2d(kPayoff[a[0]][a[1]][0], kPayoff[a[0]][a[1]][1]).eval();
      },
      stay, 0, gamma, 1);
}

Eigen::Vector2d grid_reward(int grid_size, int p1, int p2) {
  const double far2 = grid_size - 1 - p2;
  return {p1 - 2.0 * far2, far2 - 2.0 * p1};
}

GameSpec grid_game(int grid_size, int horizon, double gamma) {
  if (grid_size < 2) throw ConfigError("grid size must be at least 2");
  if (horizon < 1) throw ConfigError("grid horizon must be positive");
  const int n = grid_size;
  std::vector<std::string> labels;
  for (int p1 = 0; p1 < n; ++p1) {
    for (int p2 = 0; p2 < n; ++p2) {
      labels.push_back("(" + std::to_string(p1) + "," + std::to_string(p2) + ")");
    }
  }
  auto move = [n](int p, int a) { return a == kForward ? std::min(p + 1, n - 1) : std::max(p - 1, 0); };
  auto next = [n, move](int state, std::span<const int> a) {
    return move(state / n, a[0]) * n + move(state % n, a[1]);
  };
  GameSpec spec = GameSpec::tabulate(
      "grid", labels, {{"F", "B"}, {"F", "B"}},
      [n, next](int state, std::span<const int> a) {
        const int s = next(state, a);
        return grid_reward(n, s / n, s % n).eval();
      },
      [next](int state, std::span<const int> a) {
        return std::vector<std::pair<int, double>>{{next(state, a), 1.0}};
      },
      /*initial_state=*/0 * n + (n - 1), gamma, horizon);
  return spec;
}

Eigen::Vector2d conflict_payoff(int a1, int a2) {
  if (a1 == a2) return {0.0, 0.0};
  return a1 == 0 ? Eigen::Vector2d(-1.0, 2.0) : Eigen::Vector2d(2.0, -1.0);
}

GameSpec repeated_conflict(int horizon, int mega_step, double gamma) {
  if (horizon < 1) throw ConfigError("horizon must be positive");
  if (mega_step < 1) throw ConfigError("mega_step must be positive");
  if (horizon % mega_step != 0) {
    throw ConfigError("mega_step " + std::to_string(mega_step) + " does not divide horizon " +
                      std::to_string(horizon));
  }
  const int blocks = horizon / mega_step;
  const int macro = 1 << mega_step;
  // Macro action bit k (most significant first) is the base action at block step k.
  auto base_action = [mega_step](int macro_action, int k) {
    return (macro_action >> (mega_step - 1 - k)) & 1;
  };
  std::vector<std::string> macro_labels;
  for (int m = 0; m < macro; ++m) {
    std::string label;
    for (int k = 0; k < mega_step; ++k) label += base_action(m, k) == 0 ? "A1" : "A2";
    macro_labels.push_back(label);
  }
  std::vector<std::string> states;
  for (int b = 0; b < blocks; ++b) states.push_back("t" + std::to_string(b * mega_step));
  GameSpec spec = GameSpec::tabulate(
      mega_step == 1 ? "rpc" : "rpc-mega", states, {macro_labels, macro_labels},
      [mega_step, base_action](int, std::span<const int> a) {
        Eigen::Vector2d r = Eigen::Vector2d::Zero();
        for (int k = 0; k < mega_step; ++k) r += conflict_payoff(base_action(a[0], k), base_action(a[1], k));
        return Eigen::VectorXd(r);
      },
      [blocks](int state, std::span<const int>) {
        return std::vector<std::pair<int, double>>{{std::min(state + 1, blocks - 1), 1.0}};
      },
      0, std::pow(gamma, mega_step), blocks);
  spec.substeps = mega_step;
  return spec;
}

GameSpec public_goods(int n_agents, double beta, double gamma) {
  if (n_agents < 2) throw ConfigError("public goods needs at least two agents");
  if (!(beta > 1.0 && beta < n_agents)) {
    throw ConfigError("benefit factor must lie strictly inside (1, n_agents)");
  }
  std::vector<std::vector<std::string>> labels(n_agents, {"0", "1"});
  return GameSpec::tabulate(
      "public-goods", {"s"}, labels,
      [n_agents, beta](int, std::span<const int> c) {
        double pool = 0.0;
        for (int x : c) pool += x;
        Eigen::VectorXd r(n_agents);
        for (int i = 0; i < n_agents; ++i) r[i] = beta / n_agents * pool - c[i];
        return r;
      },
      stay, 0, gamma, 1);
}

}  // namespace mcg::envs
