#pragma once

// One-episode interaction loop between an environment, an agent, and an
// optional transfer schedule. All randomness flows through the caller's
// engine, so runs are reproducible from a seed.

#include <random>
#include <span>
#include <vector>

#include "pamdp/agents.hpp"
#include "pamdp/mdp.hpp"

namespace pamdp {

struct EpisodeResult {
  std::vector<TimedStep> steps;
  int final_state = -1;
  double agent_return = 0.0;      // includes transfers received
  double principal_return = 0.0;  // net of transfers paid
  double welfare = 0.0;           // base rewards only
  double transfers_paid = 0.0;
};

inline EpisodeResult run_episode(const FiniteMDP& mdp, AgentLearner& agent,
                                 const TransferPolicy* transfers, std::mt19937_64& rng) {
  const int S = mdp.num_states, K = mdp.num_actions, H = mdp.horizon;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  static const std::vector<double> no_offer;  // empty => zero transfers

  agent.begin_episode(transfers);
  EpisodeResult out;
  out.steps.reserve(H);

  int s = detail::sample_categorical(mdp.initial_state_dist.data(), S, unit(rng));
  for (int h = 1; h <= H; ++h) {
    std::span<const double> offered =
        transfers != nullptr ? std::span<const double>(transfers->row(h, s), K)
                             : std::span<const double>(no_offer);
    const int a = agent.act(h, s, offered);
    const double tau = transfers != nullptr ? transfers->at(h, s, a) : 0.0;
    const double ra = mdp.reward_agent.at(s, a);
    const double rp = mdp.reward_principal.at(s, a);
    out.agent_return += ra + tau;
    out.principal_return += rp - tau;
    out.welfare += ra + rp;
    out.transfers_paid += tau;
    out.steps.push_back({h, s, a});

    const int s2 = detail::sample_categorical(
        mdp.transition.data() + (static_cast<std::size_t>(s) * K + a) * S, S, unit(rng));
    agent.observe(h, s, a, ra + tau, s2);
    s = s2;
  }
  agent.end_episode();
  out.final_state = s;
  return out;
}

// Recomputes the returns of a logged trajectory under a (possibly different)
// transfer schedule. Welfare depends only on the visited pairs.
inline EpisodeResult replay_trajectory(const FiniteMDP& mdp, const std::vector<TimedStep>& steps,
                                       const TransferPolicy* transfers) {
  EpisodeResult out;
  out.steps = steps;
  for (const TimedStep& st : steps) {
    const double tau = transfers != nullptr ? transfers->at(st.h, st.s, st.a) : 0.0;
    out.agent_return += mdp.reward_agent.at(st.s, st.a) + tau;
    out.principal_return += mdp.reward_principal.at(st.s, st.a) - tau;
    out.welfare += mdp.reward_agent.at(st.s, st.a) + mdp.reward_principal.at(st.s, st.a);
    out.transfers_paid += tau;
  }
  return out;
}

}  // namespace pamdp
