#pragma once

// Concrete environments: the pollution line-world (fast / slow / detour
// actions, pollution carried in the state, principal penalized by pollution)
// and a seeded generator of small random MDPs for property tests.

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "pamdp/errors.hpp"
#include "pamdp/mdp.hpp"

namespace pamdp {

enum LineWorldAction : int { kActionFast = 0, kActionSlow = 1, kActionDetour = 2 };
inline constexpr int kLineWorldActions = 3;

struct LineWorldConfig {
  int num_positions = 8;   // goal sits at the last position, absorbing
  int horizon = 12;
  int pollution_cap = 20;  // P_max; pollution is clamped to [0, P_max]

  int fast_advance = 2, fast_pollution = 2;
  int slow_advance = 1, slow_pollution = 1;
  int detour_advance = 1, detour_pollution = -2;

  double reward_fast = 0.9;
  double reward_slow = 0.6;
  double reward_detour = 0.3;
  double reward_goal = 1.0;  // agent reward per remaining step once at the goal

  bool subsidy_enabled = false;
  double subsidy = 0.65;  // flat detour transfer, state independent

  long long state_space_cap = 4'000'000;  // guard on S*K*H

  int num_states() const { return num_positions * (pollution_cap + 1); }
  int state_of(int position, int pollution) const {
    return position * (pollution_cap + 1) + pollution;
  }
  int position_of(int state) const { return state / (pollution_cap + 1); }
  int pollution_of(int state) const { return state % (pollution_cap + 1); }

  void validate() const {
    if (num_positions < 2 || horizon < 1 || pollution_cap < 1) {
      throw ConfigError("LineWorldConfig: need >=2 positions, >=1 step, >=1 pollution level");
    }
    for (double r : {reward_fast, reward_slow, reward_detour, reward_goal}) {
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("LineWorldConfig: rewards must lie in [0,1]");
    }
    if (subsidy < 0.0) throw ConfigError("LineWorldConfig: subsidy must be nonnegative");
    if (fast_advance < 0 || slow_advance < 0 || detour_advance < 0) {
      throw ConfigError("LineWorldConfig: positions may not move backwards");
    }
  }
};

// Deterministic kernel over (position, pollution) states. The principal's
// step reward is 1 - pollution'/P_max with pollution' taken after the action,
// so the final step's reward is exactly the terminal-pollution reward and
// every entry stays inside [0,1]. The goal is absorbing: the state (and with
// it the pollution level) freezes, and the agent collects reward_goal per
// remaining step.
inline FiniteMDP build_lineworld(const LineWorldConfig& cfg) {
  cfg.validate();
  const int S = cfg.num_states();
  const int K = kLineWorldActions;
  if (static_cast<long long>(S) * K * cfg.horizon > cfg.state_space_cap) {
    throw ConfigError("build_lineworld: S*K*H exceeds the configured cap");
  }

  FiniteMDP mdp;
  mdp.num_states = S;
  mdp.num_actions = K;
  mdp.horizon = cfg.horizon;
  mdp.transition.assign(static_cast<std::size_t>(S) * K * S, 0.0);
  mdp.reward_agent = SaTable(S, K);
  mdp.reward_principal = SaTable(S, K);
  mdp.initial_state_dist.assign(S, 0.0);
  mdp.initial_state_dist[cfg.state_of(0, 0)] = 1.0;

  const int goal = cfg.num_positions - 1;
  const int advance[kLineWorldActions] = {cfg.fast_advance, cfg.slow_advance, cfg.detour_advance};
  const int emission[kLineWorldActions] = {cfg.fast_pollution, cfg.slow_pollution,
                                           cfg.detour_pollution};
  const double step_reward[kLineWorldActions] = {cfg.reward_fast, cfg.reward_slow,
                                                 cfg.reward_detour};

  for (int pos = 0; pos < cfg.num_positions; ++pos) {
    for (int poll = 0; poll <= cfg.pollution_cap; ++poll) {
      const int s = cfg.state_of(pos, poll);
      for (int a = 0; a < K; ++a) {
        int next_pos, next_poll;
        if (pos == goal) {
          next_pos = pos;
          next_poll = poll;
          mdp.reward_agent.at(s, a) = cfg.reward_goal;
        } else {
          next_pos = std::min(pos + advance[a], goal);
          next_poll = std::clamp(poll + emission[a], 0, cfg.pollution_cap);
          mdp.reward_agent.at(s, a) = step_reward[a];
        }
        mdp.reward_principal.at(s, a) =
            1.0 - static_cast<double>(next_poll) / cfg.pollution_cap;
        mdp.p_mut(s, a, cfg.state_of(next_pos, next_poll)) = 1.0;
      }
    }
  }
  mdp.validate();
  return mdp;
}

// Flat transfer on the detour action in every state, every step.
inline TransferPolicy build_subsidy_policy(const LineWorldConfig& cfg) {
  cfg.validate();
  if (!cfg.subsidy_enabled) {
    throw ConfigError("build_subsidy_policy: subsidy is not enabled in the config");
  }
  SaTable per_state(cfg.num_states(), kLineWorldActions, 0.0);
  for (int s = 0; s < cfg.num_states(); ++s) per_state.at(s, kActionDetour) = cfg.subsidy;
  return TransferPolicy::stationary(cfg.horizon, per_state);
}

// Random row-stochastic MDP. sparsity in [0,1] controls the support size of
// each transition row: 0 keeps all S successors, 1 keeps exactly one
// (deterministic transitions). Rewards are uniform in [0,1].
inline FiniteMDP random_mdp(int S, int K, int H, std::uint64_t seed, double sparsity = 0.0) {
  if (S < 1 || K < 1 || H < 1) throw ConfigError("random_mdp: S, K, H must be at least 1");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
    throw ConfigError("random_mdp: sparsity must lie in [0,1]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  FiniteMDP mdp;
  mdp.num_states = S;
  mdp.num_actions = K;
  mdp.horizon = H;
  mdp.transition.assign(static_cast<std::size_t>(S) * K * S, 0.0);
  mdp.reward_agent = SaTable(S, K);
  mdp.reward_principal = SaTable(S, K);
  mdp.initial_state_dist.assign(S, 0.0);

  const int support = std::max(1, static_cast<int>(std::llround((1.0 - sparsity) * S)));
  std::vector<int> order(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < K; ++a) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      std::vector<double> w(support);
      for (int i = 0; i < support; ++i) {
        w[i] = expo(rng) + 1e-12;
        total += w[i];
      }
      for (int i = 0; i < support; ++i) mdp.p_mut(s, a, order[i]) = w[i] / total;
      mdp.reward_agent.at(s, a) = unit(rng);
      mdp.reward_principal.at(s, a) = unit(rng);
    }
  }
  double total = 0.0;
  for (int s = 0; s < S; ++s) {
    mdp.initial_state_dist[s] = expo(rng) + 1e-12;
    total += mdp.initial_state_dist[s];
  }
  for (int s = 0; s < S; ++s) mdp.initial_state_dist[s] /= total;
  mdp.validate();
  return mdp;
}

}  // namespace pamdp
