#pragma once

// The principal's side of the interaction: minimal-transfer tables, transfer
// estimation by batched binary search against an agent observed only through
// episodes, optimistic value iteration on the transfer-shifted principal
// reward, and the two-phase orchestrator tying them together.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pamdp/agents.hpp"
#include "pamdp/errors.hpp"
#include "pamdp/ledger.hpp"
#include "pamdp/mdp.hpp"
#include "pamdp/simulate.hpp"

namespace pamdp {

// --- Minimal transfers -------------------------------------------------------

// tau_star(h,s,a) is the smallest payment that makes action a weakly optimal
// for the agent at (h,s): the positive part of the best-alternative Q gap.
// The stationary reduction max_h tau_star(h,s,a) is a conservative
// step-independent schedule.
struct MinimalTransferTable {
  StepSaTable tau_star;
  SaTable stationary_reduction;
};

inline MinimalTransferTable minimal_transfers(const FiniteMDP& mdp) {
  const ValueSolution agent_plan = value_iteration(mdp, mdp.reward_agent);
  MinimalTransferTable out;
  out.tau_star = StepSaTable(mdp.horizon, mdp.num_states, mdp.num_actions, 0.0);
  out.stationary_reduction = SaTable(mdp.num_states, mdp.num_actions, 0.0);
  for (int h = 1; h <= mdp.horizon; ++h) {
    for (int s = 0; s < mdp.num_states; ++s) {
      const double best = agent_plan.v(h, s);
      for (int a = 0; a < mdp.num_actions; ++a) {
        const double gap = best - agent_plan.q(h, s, a);
        const double tau = gap > 0.0 ? gap : 0.0;
        out.tau_star.at(h, s, a) = tau;
        out.stationary_reduction.at(s, a) = std::max(out.stationary_reduction.at(s, a), tau);
      }
    }
  }
  return out;
}

// --- Batch identifiability ----------------------------------------------------

struct IdentifiabilityOutcome {
  bool sufficient = false;
  bool starved = false;  // the state was never visited during the batch
};

inline IdentifiabilityOutcome identifiability_test(long long visits, long long plays_of_a,
                                                   double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw ConfigError("identifiability_test: theta must lie in (0,1)");
  }
  if (visits <= 0) return {false, true};
  return {static_cast<double>(plays_of_a) / static_cast<double>(visits) >= theta, false};
}

// --- Phase 1: transfer estimation ----------------------------------------------

struct Phase1Config {
  double alpha = 0.5;   // batch length exponent: L = ceil(T^alpha)
  double beta = 0.25;   // target accuracy: final interval width <= T^-beta
  long long T = 0;      // episode budget driving L and the batch count
  double theta = 0.5;   // play-frequency threshold of the batch test
  bool stationary = false;  // estimate per-(s,a) schedules instead of per-(h,s,a)
  // Rationality exponent of the agent, when known; enables the exponent
  // sanity check kappa < alpha and beta/alpha < 1 - kappa (warning only).
  double kappa_hint = std::numeric_limits<double>::quiet_NaN();

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0)) {
      throw ConfigError("Phase1Config: alpha and beta must lie in (0,1)");
    }
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("Phase1Config: theta must lie in (0,1)");
    if (T < 1) throw ConfigError("Phase1Config: T must be positive");
  }

  std::optional<std::string> exponent_warning() const {
    if (std::isnan(kappa_hint)) return std::nullopt;
    if (kappa_hint >= alpha) {
      return "phase 1 exponent condition violated: kappa >= alpha (" +
             std::to_string(kappa_hint) + " >= " + std::to_string(alpha) + ")";
    }
    if (beta / alpha >= 1.0 - kappa_hint) {
      return "phase 1 exponent condition violated: beta/alpha >= 1 - kappa";
    }
    return std::nullopt;
  }

  long long batch_length() const {
    return static_cast<long long>(
        std::ceil(std::pow(static_cast<double>(T), alpha) - 1e-9));
  }
  // Halvings needed to shrink [0, H] below width T^-beta.
  int batch_count(int horizon) const {
    const double x = std::log2(static_cast<double>(horizon)) +
                     beta * std::log2(static_cast<double>(T));
    return std::max(0, static_cast<int>(std::ceil(x - 1e-9)));
  }
};

enum class TargetStatus {
  Completed,  // all batches ran; interval width met the accuracy goal
  Aborted,    // state starved for a whole batch; estimate is the current upper end
  Partial,    // episode budget ran out before the batch schedule finished
};

struct Phase1BatchLog {
  double offered = 0.0;
  long long visits = 0;
  long long plays = 0;
  bool sufficient = false;
  bool starved = false;
};

struct Phase1TargetLog {
  int h = 0;  // 0 in stationary mode (the probe spans all steps)
  int s = 0;
  int a = 0;
  double lo = 0.0;
  double hi = 0.0;
  TargetStatus status = TargetStatus::Partial;
  std::vector<Phase1BatchLog> batches;
};

struct Phase1Result {
  StepSaTable tau_hat;      // upper interval ends (implementable side)
  long long episodes_used = 0;
  std::vector<Phase1TargetLog> targets;
  int batches_per_target = 0;
  long long batch_length = 0;
  std::vector<EpisodeRecord> records;  // per-episode accounting, phase = Phase1
  std::optional<std::string> warning;

  bool all_completed() const {
    for (const auto& t : targets) {
      if (t.status != TargetStatus::Completed) return false;
    }
    return true;
  }
};

namespace detail {

// Runs one batch of episodes offering `policy`, counting visits to the probe
// coordinates and plays of the probe action there.
struct BatchCounts {
  long long visits = 0;
  long long plays = 0;
  // Stationary probes track per-step counts so the batch test can require
  // compliance at every step the state was actually reached.
  std::vector<long long> visits_by_h, plays_by_h;
};

inline BatchCounts run_probe_batch(const FiniteMDP& mdp, AgentLearner& agent,
                                   const TransferPolicy& policy, int probe_h, int probe_s,
                                   int probe_a, long long episodes, std::mt19937_64& rng,
                                   std::uint64_t seed_label,
                                   std::vector<EpisodeRecord>* records, long long* episode_counter) {
  BatchCounts counts;
  counts.visits_by_h.assign(mdp.horizon + 1, 0);
  counts.plays_by_h.assign(mdp.horizon + 1, 0);
  for (long long e = 0; e < episodes; ++e) {
    const EpisodeResult ep = run_episode(mdp, agent, &policy, rng);
    for (const TimedStep& st : ep.steps) {
      if (st.s != probe_s) continue;
      if (probe_h != 0 && st.h != probe_h) continue;
      ++counts.visits;
      ++counts.visits_by_h[st.h];
      if (st.a == probe_a) {
        ++counts.plays;
        ++counts.plays_by_h[st.h];
      }
    }
    if (records != nullptr) {
      ++*episode_counter;
      EpisodeRecord rec;
      rec.episode = *episode_counter;
      rec.phase = Phase::Phase1;
      rec.agent_return = ep.agent_return;
      rec.principal_return = ep.principal_return;
      rec.welfare = ep.welfare;
      rec.seed = seed_label;
      rec.final_state = ep.final_state;
      records->push_back(rec);
    }
  }
  return counts;
}

}  // namespace detail

// Estimates the minimal transfer for every target by interval halving: each
// batch offers the midpoint on the probed (h,s,a) alone and asks whether the
// agent plays it with frequency >= theta at the probed coordinates. Sufficient
// batches lower the upper end, insufficient ones raise the lower end; the
// returned estimate is the upper end, which errs on the implementable side.
inline Phase1Result phase1_estimate(const FiniteMDP& env, AgentLearner& agent,
                                    const Phase1Config& cfg, std::mt19937_64& rng,
                                    long long episode_cap = -1, std::uint64_t seed_label = 0) {
  cfg.validate();
  const int S = env.num_states, K = env.num_actions, H = env.horizon;
  const long long L = cfg.batch_length();
  const int B = cfg.batch_count(H);
  if (episode_cap < 0) episode_cap = cfg.T;

  Phase1Result result;
  result.tau_hat = StepSaTable(H, S, K, 0.0);
  result.batches_per_target = B;
  result.batch_length = L;
  result.warning = cfg.exponent_warning();

  // Lexicographic target order; stationary mode collapses the step index.
  if (cfg.stationary) {
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < K; ++a) result.targets.push_back({0, s, a, 0.0, double(H)});
  } else {
    for (int h = 1; h <= H; ++h)
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < K; ++a) result.targets.push_back({h, s, a, 0.0, double(H)});
  }

  long long episode_counter = 0;
  bool budget_exhausted = false;
  for (int b = 0; b < B && !budget_exhausted; ++b) {
    for (auto& target : result.targets) {
      if (target.status == TargetStatus::Aborted) continue;
      if (result.episodes_used + L > episode_cap) {
        budget_exhausted = true;
        break;
      }
      const double mid = 0.5 * (target.lo + target.hi);
      StepSaTable probe(H, S, K, 0.0);
      if (target.h == 0) {
        for (int h = 1; h <= H; ++h) probe.at(h, target.s, target.a) = mid;
      } else {
        probe.at(target.h, target.s, target.a) = mid;
      }
      const TransferPolicy policy{probe};

      const auto counts = detail::run_probe_batch(env, agent, policy, target.h, target.s,
                                                  target.a, L, rng, seed_label, &result.records,
                                                  &episode_counter);
      result.episodes_used += L;

      Phase1BatchLog log;
      log.offered = mid;
      log.visits = counts.visits;
      log.plays = counts.plays;
      if (target.h == 0) {
        // Stationary probe: the offer must win at every step the state was
        // reached, matching the max-over-steps ground truth.
        if (counts.visits == 0) {
          log.starved = true;
        } else {
          bool all_steps_ok = true;
          for (int h = 1; h <= H; ++h) {
            if (counts.visits_by_h[h] == 0) continue;
            const auto step_test = identifiability_test(counts.visits_by_h[h],
                                                        counts.plays_by_h[h], cfg.theta);
            all_steps_ok = all_steps_ok && step_test.sufficient;
          }
          log.sufficient = all_steps_ok;
        }
      } else {
        const auto test = identifiability_test(counts.visits, counts.plays, cfg.theta);
        log.sufficient = test.sufficient;
        log.starved = test.starved;
      }
      target.batches.push_back(log);

      if (log.starved) {
        // Ergodicity failed for this state under the probe: report, do not
        // guess a halving direction.
        target.status = TargetStatus::Aborted;
        continue;
      }
      if (log.sufficient) {
        target.hi = mid;
      } else {
        target.lo = mid;
      }
    }
  }

  for (auto& target : result.targets) {
    if (target.status != TargetStatus::Aborted && !budget_exhausted) {
      target.status = TargetStatus::Completed;
    } else if (target.status != TargetStatus::Aborted) {
      target.status =
          static_cast<int>(target.batches.size()) == B ? TargetStatus::Completed
                                                       : TargetStatus::Partial;
    }
    if (target.h == 0) {
      for (int h = 1; h <= H; ++h) result.tau_hat.at(h, target.s, target.a) = target.hi;
    } else {
      result.tau_hat.at(target.h, target.s, target.a) = target.hi;
    }
  }
  return result;
}

// --- Implementability ----------------------------------------------------------

// ok(h,s,a) <=> offering tau_hat(h,s,a) at (h,s) makes a weakly optimal for
// the agent, judged against the transfer-free optimal Q values.
struct ImplementabilityReport {
  int horizon = 0, num_states = 0, num_actions = 0;
  std::vector<std::uint8_t> ok;
  bool all_ok = true;

  bool at(int h, int s, int a) const {
    return ok[(static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a] != 0;
  }
};

inline ImplementabilityReport implementability_check(const FiniteMDP& mdp,
                                                     const StepSaTable& tau_hat) {
  const int S = mdp.num_states, K = mdp.num_actions, H = mdp.horizon;
  if (!tau_hat.same_shape(H, S, K)) {
    throw ConfigError("implementability_check: table shape does not match the MDP");
  }
  const ValueSolution agent_plan = value_iteration(mdp, mdp.reward_agent);
  ImplementabilityReport report;
  report.horizon = H;
  report.num_states = S;
  report.num_actions = K;
  report.ok.assign(static_cast<std::size_t>(H) * S * K, 0);
  for (int h = 1; h <= H; ++h) {
    for (int s = 0; s < S; ++s) {
      const double best = agent_plan.v(h, s);
      for (int a = 0; a < K; ++a) {
        const bool ok = agent_plan.q(h, s, a) + tau_hat.at(h, s, a) >= best - 1e-9;
        report.ok[(static_cast<std::size_t>(h - 1) * S + s) * K + a] = ok ? 1 : 0;
        report.all_ok = report.all_ok && ok;
      }
    }
  }
  return report;
}

// --- Phase 2: optimistic welfare optimization ------------------------------------

struct Phase2Config {
  double bonus_scale = 1.0;  // c
  double delta = 0.05;
  long long episodes = 0;    // default budget when the caller does not pass one
  bool known_transitions = false;  // degenerate mode: true kernel, zero bonus

  void validate() const {
    if (!(bonus_scale > 0.0)) throw ConfigError("Phase2Config: bonus_scale must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("Phase2Config: delta must be in (0,1)");
  }
};

struct Phase2Result {
  std::vector<EpisodeRecord> records;  // phase = Phase2
  // Intended greedy policies, diff-compressed: (first episode, flat (h,s)->a).
  std::vector<std::pair<long long, std::vector<int>>> policy_trace;
  std::vector<double> intended_welfare;       // exact welfare of the intended policy, per episode
  std::vector<double> principal_regret;       // cumulative, against the optimal effective value
  double optimal_effective_value = 0.0;       // max_pi E[sum r_p - tau_hat] under the true kernel
};

namespace detail {

// Backward induction on a step-indexed reward with optional per-(s,a) bonus,
// values clipped from above by the remaining-horizon principal maximum.
inline void optimistic_backward_induction(const FiniteMDP& mdp, const StepSaTable& reward,
                                          const std::vector<double>& p_hat,
                                          const std::vector<double>* bonus,
                                          std::vector<double>& v_out, std::vector<int>& policy_out) {
  const int S = mdp.num_states, K = mdp.num_actions, H = mdp.horizon;
  v_out.assign(static_cast<std::size_t>(H + 1) * S, 0.0);
  policy_out.assign(static_cast<std::size_t>(H) * S, 0);
  std::vector<double> q_row(K);
  for (int h = H; h >= 1; --h) {
    const double* v_next = v_out.data() + static_cast<std::size_t>(h) * S;
    double* v_cur = v_out.data() + static_cast<std::size_t>(h - 1) * S;
    const double cap = static_cast<double>(H - h + 1);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < K; ++a) {
        const double* row = p_hat.data() + (static_cast<std::size_t>(s) * K + a) * S;
        double cont = 0.0;
        for (int s2 = 0; s2 < S; ++s2) cont += row[s2] * v_next[s2];
        double q = reward.at(h, s, a) + cont;
        if (bonus != nullptr) q += (*bonus)[static_cast<std::size_t>(s) * K + a];
        q_row[a] = q;
      }
      const int best = argmax_lexicographic(q_row.data(), K);
      policy_out[static_cast<std::size_t>(h - 1) * S + s] = best;
      v_cur[s] = std::min(q_row[best], cap);
    }
  }
}

}  // namespace detail

// Optimistic value iteration on the shifted reward r_p - tau_hat with
// count-based bonuses; the agent is steered by offering tau_hat on the
// currently intended action at each (h,s) and nothing elsewhere.
inline Phase2Result phase2_ucbvi(const FiniteMDP& env, AgentLearner& agent,
                                 const StepSaTable& tau_hat, const Phase2Config& cfg,
                                 long long episodes, std::mt19937_64& rng,
                                 std::uint64_t seed_label = 0, long long episode_offset = 0) {
  cfg.validate();
  const int S = env.num_states, K = env.num_actions, H = env.horizon;
  if (!tau_hat.same_shape(H, S, K)) {
    throw ConfigError("phase2_ucbvi: tau_hat shape does not match the MDP");
  }
  if (episodes <= 0) episodes = cfg.episodes;
  if (episodes < 0) throw ConfigError("phase2_ucbvi: negative episode budget");

  // Effective principal reward; may be negative where tau_hat exceeds r_p.
  StepSaTable effective(H, S, K, 0.0);
  for (int h = 1; h <= H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < K; ++a)
        effective.at(h, s, a) = env.reward_principal.at(s, a) - tau_hat.at(h, s, a);

  Phase2Result result;
  {
    std::vector<double> v_star;
    std::vector<int> pi_star;
    detail::optimistic_backward_induction(env, effective, env.transition, nullptr, v_star, pi_star);
    double v0 = 0.0;
    for (int s = 0; s < S; ++s) v0 += env.initial_state_dist[s] * v_star[s];
    result.optimal_effective_value = v0;
  }

  SaTable combined(S, K);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < K; ++a)
      combined.at(s, a) = env.reward_agent.at(s, a) + env.reward_principal.at(s, a);

  std::vector<long long> n_sa(static_cast<std::size_t>(S) * K, 0);
  std::vector<long long> n_sas(static_cast<std::size_t>(S) * K * S, 0);
  std::vector<double> p_hat(n_sas.size(), 1.0 / S);
  std::vector<double> bonus(n_sa.size(), 0.0);
  const double log_term =
      std::log(std::max(2.0, static_cast<double>(S) * K * H * std::max<long long>(episodes, 1) /
                                 cfg.delta));

  std::vector<double> v_opt;
  std::vector<int> intended;
  StepSaTable offer_table(H, S, K, 0.0);
  double cumulative_regret = 0.0;
  double current_intended_welfare = 0.0;

  for (long long e = 0; e < episodes; ++e) {
    if (cfg.known_transitions) {
      detail::optimistic_backward_induction(env, effective, env.transition, nullptr, v_opt,
                                            intended);
    } else {
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < K; ++a) {
          const std::size_t i = static_cast<std::size_t>(s) * K + a;
          bonus[i] = cfg.bonus_scale * H *
                     std::sqrt(log_term / std::max<long long>(1, n_sa[i]));
        }
      }
      detail::optimistic_backward_induction(env, effective, p_hat, &bonus, v_opt, intended);
    }

    if (result.policy_trace.empty() || result.policy_trace.back().second != intended) {
      result.policy_trace.emplace_back(episode_offset + e + 1, intended);
      current_intended_welfare = policy_value(env, combined, intended);
    }
    result.intended_welfare.push_back(current_intended_welfare);

    // Offer tau_hat on the intended action only.
    std::fill(offer_table.values.begin(), offer_table.values.end(), 0.0);
    for (int h = 1; h <= H; ++h) {
      for (int s = 0; s < S; ++s) {
        const int a = intended[static_cast<std::size_t>(h - 1) * S + s];
        offer_table.at(h, s, a) = tau_hat.at(h, s, a);
      }
    }
    const TransferPolicy offer{offer_table};
    const EpisodeResult ep = run_episode(env, agent, &offer, rng);

    if (!cfg.known_transitions) {
      for (std::size_t i = 0; i < ep.steps.size(); ++i) {
        const TimedStep& st = ep.steps[i];
        const int s2 = i + 1 < ep.steps.size() ? ep.steps[i + 1].s : ep.final_state;
        const std::size_t sa = static_cast<std::size_t>(st.s) * K + st.a;
        ++n_sa[sa];
        ++n_sas[sa * S + s2];
        const double inv = 1.0 / static_cast<double>(n_sa[sa]);
        for (int j = 0; j < S; ++j) {
          p_hat[sa * S + j] = static_cast<double>(n_sas[sa * S + j]) * inv;
        }
      }
    }

    EpisodeRecord rec;
    rec.episode = episode_offset + e + 1;
    rec.phase = Phase::Phase2;
    rec.agent_return = ep.agent_return;
    rec.principal_return = ep.principal_return;
    rec.welfare = ep.welfare;
    rec.seed = seed_label;
    rec.final_state = ep.final_state;
    result.records.push_back(rec);

    cumulative_regret += result.optimal_effective_value - ep.principal_return;
    result.principal_regret.push_back(cumulative_regret);
  }
  return result;
}

// --- Two-phase orchestration ------------------------------------------------------

namespace detail {

inline long long phase1_episode_need(const Phase1Config& cfg, int H, long long targets) {
  Phase1Config c = cfg;
  return targets * static_cast<long long>(c.batch_count(H)) * c.batch_length();
}

inline long long minimum_feasible_T(Phase1Config cfg, int H, long long targets) {
  auto feasible = [&](long long t) {
    cfg.T = t;
    return phase1_episode_need(cfg, H, targets) <= t / 2;
  };
  long long hi = 2;
  while (hi < (1LL << 60) && !feasible(hi)) hi *= 2;
  long long lo = 1;
  while (lo < hi) {
    const long long mid = lo + (hi - lo) / 2;
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return hi;
}

}  // namespace detail

// Runs transfer estimation on the first half of the budget, then optimistic
// welfare optimization with the estimated schedule on the remainder. The
// ledger carries per-episode welfare, the cumulative R_sw series against the
// exact W*, and the three-term regret breakdown.
inline RegretLedger two_phase_run(const FiniteMDP& env, AgentLearner& agent, Phase1Config cfg1,
                                  const Phase2Config& cfg2, long long T, std::mt19937_64& rng,
                                  std::uint64_t seed_label = 0) {
  if (T < 2) throw ConfigError("two_phase_run: T must be at least 2");
  cfg1.T = T;
  cfg1.validate();
  cfg2.validate();

  const long long targets = cfg1.stationary
                                ? static_cast<long long>(env.num_states) * env.num_actions
                                : static_cast<long long>(env.horizon) * env.num_states *
                                      env.num_actions;
  const long long need = detail::phase1_episode_need(cfg1, env.horizon, targets);
  if (need > T / 2) {
    const long long min_t = detail::minimum_feasible_T(cfg1, env.horizon, targets);
    throw BudgetError("two_phase_run: phase 1 needs " + std::to_string(need) +
                          " episodes, more than T/2 = " + std::to_string(T / 2) +
                          "; minimum feasible T is " + std::to_string(min_t),
                      min_t);
  }

  RegretLedger ledger;
  ledger.w_star = optimal_welfare(env).w_star;

  Phase1Result p1 = phase1_estimate(env, agent, cfg1, rng, T / 2, seed_label);
  Phase2Result p2 = phase2_ucbvi(env, agent, p1.tau_hat, cfg2, T - p1.episodes_used, rng,
                                 seed_label, p1.episodes_used);

  ledger.records = std::move(p1.records);
  ledger.records.insert(ledger.records.end(), p2.records.begin(), p2.records.end());
  ledger.rebuild_regret_series();

  RegretDecomposition decomp;
  for (const EpisodeRecord& rec : ledger.records) {
    if (rec.phase == Phase::Phase1) decomp.phase1 += ledger.w_star - rec.welfare;
  }
  for (std::size_t i = 0; i < p2.records.size(); ++i) {
    decomp.phase2_planning += ledger.w_star - p2.intended_welfare[i];
    decomp.agent_deviation += p2.intended_welfare[i] - p2.records[i].welfare;
  }
  ledger.decomposition = decomp;
  return ledger;
}

}  // namespace pamdp
