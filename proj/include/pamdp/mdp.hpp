#pragma once

// Finite-horizon MDP with two reward streams (agent / principal), nonnegative
// per-step transfer schedules, and exact backward-induction solvers.
//
// Conventions used throughout the library:
//   - states s in [0, S), actions a in [0, K), steps h in [1, H] (1-based)
//   - transition rows P(. | s, a) are stochastic vectors over next states
//   - all argmax ties break toward the smallest action index
//   - probabilities are checked to 1e-9; values are plain doubles

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pamdp/errors.hpp"

namespace pamdp {

inline constexpr double kProbTolerance = 1e-9;

// Dense per-(state,action) matrix, state-major.
struct SaTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> values;

  SaTable() = default;
  SaTable(int S, int K, double fill = 0.0)
      : num_states(S), num_actions(K),
        values(static_cast<std::size_t>(S) * K, fill) {}

  double& at(int s, int a) { return values[static_cast<std::size_t>(s) * num_actions + a]; }
  double at(int s, int a) const { return values[static_cast<std::size_t>(s) * num_actions + a]; }

  bool same_shape(int S, int K) const { return num_states == S && num_actions == K; }
};

// Dense per-(step,state,action) table; step index is 1-based in the API.
struct StepSaTable {
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> values;

  StepSaTable() = default;
  StepSaTable(int H, int S, int K, double fill = 0.0)
      : horizon(H), num_states(S), num_actions(K),
        values(static_cast<std::size_t>(H) * S * K, fill) {}

  std::size_t index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a;
  }
  double& at(int h, int s, int a) { return values[index(h, s, a)]; }
  double at(int h, int s, int a) const { return values[index(h, s, a)]; }

  bool same_shape(int H, int S, int K) const {
    return horizon == H && num_states == S && num_actions == K;
  }
};

// Episodic MDP with agent and principal reward tables. Immutable once built;
// run validate() after filling the fields by hand.
struct FiniteMDP {
  int num_states = 0;    // S
  int num_actions = 0;   // K
  int horizon = 0;       // H, steps per episode
  std::vector<double> transition;  // P(s'|s,a), indexed ((s*K + a)*S + s')
  SaTable reward_agent;            // r_a(s,a) in [0,1]
  SaTable reward_principal;        // r_p(s,a) in [0,1]
  std::vector<double> initial_state_dist;  // over S

  double p(int s, int a, int s_next) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s_next];
  }
  double& p_mut(int s, int a, int s_next) {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s_next];
  }

  void validate() const {
    if (num_states <= 0 || num_actions <= 0 || horizon <= 0) {
      throw ConfigError("FiniteMDP: S, K, H must all be positive");
    }
    const std::size_t S = num_states, K = num_actions;
    if (transition.size() != S * K * S) {
      throw ConfigError("FiniteMDP: transition table has wrong size");
    }
    if (!reward_agent.same_shape(num_states, num_actions) ||
        !reward_principal.same_shape(num_states, num_actions)) {
      throw ConfigError("FiniteMDP: reward table has wrong shape");
    }
    if (initial_state_dist.size() != S) {
      throw ConfigError("FiniteMDP: initial state distribution has wrong size");
    }
    for (int s = 0; s < num_states; ++s) {
      for (int a = 0; a < num_actions; ++a) {
        double row_sum = 0.0;
        for (int s2 = 0; s2 < num_states; ++s2) {
          const double q = p(s, a, s2);
          if (q < 0.0 || !std::isfinite(q)) {
            throw ConfigError("FiniteMDP: negative or non-finite transition probability at (s=" +
                              std::to_string(s) + ", a=" + std::to_string(a) + ")");
          }
          row_sum += q;
        }
        if (std::abs(row_sum - 1.0) > kProbTolerance) {
          throw ConfigError("FiniteMDP: transition row (s=" + std::to_string(s) +
                            ", a=" + std::to_string(a) + ") sums to " + std::to_string(row_sum));
        }
        for (const SaTable* r : {&reward_agent, &reward_principal}) {
          const double x = r->at(s, a);
          if (!(x >= 0.0 && x <= 1.0)) {
            throw ConfigError("FiniteMDP: reward outside [0,1] at (s=" + std::to_string(s) +
                              ", a=" + std::to_string(a) + ")");
          }
        }
      }
    }
    double init_sum = 0.0;
    for (double q : initial_state_dist) {
      if (q < 0.0 || !std::isfinite(q)) throw ConfigError("FiniteMDP: negative initial probability");
      init_sum += q;
    }
    if (std::abs(init_sum - 1.0) > kProbTolerance) {
      throw ConfigError("FiniteMDP: initial state distribution sums to " + std::to_string(init_sum));
    }
  }
};

// Nonnegative payments tau_h(s,a) offered by the principal, per step.
class TransferPolicy {
 public:
  TransferPolicy() = default;

  explicit TransferPolicy(StepSaTable payments) : payments_(std::move(payments)) {
    for (double x : payments_.values) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw ConfigError("TransferPolicy: payments must be finite and nonnegative");
      }
    }
  }

  static TransferPolicy zero(int H, int S, int K) { return TransferPolicy(StepSaTable(H, S, K, 0.0)); }

  // Replicates one per-(s,a) table across every step.
  static TransferPolicy stationary(int H, const SaTable& per_state) {
    StepSaTable t(H, per_state.num_states, per_state.num_actions, 0.0);
    for (int h = 1; h <= H; ++h) {
      for (int s = 0; s < per_state.num_states; ++s) {
        for (int a = 0; a < per_state.num_actions; ++a) {
          t.at(h, s, a) = per_state.at(s, a);
        }
      }
    }
    return TransferPolicy(std::move(t));
  }

  double at(int h, int s, int a) const { return payments_.at(h, s, a); }
  const StepSaTable& table() const { return payments_; }
  int horizon() const { return payments_.horizon; }
  int num_states() const { return payments_.num_states; }
  int num_actions() const { return payments_.num_actions; }

  // Pointer to the K payments offered at (h, s).
  const double* row(int h, int s) const { return payments_.values.data() + payments_.index(h, s, 0); }

  double max_entry() const {
    double m = 0.0;
    for (double x : payments_.values) m = std::max(m, x);
    return m;
  }

 private:
  StepSaTable payments_;
};

// Exact finite-horizon optimal values and the greedy policy that attains them.
struct ValueSolution {
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> q_values;      // (h,s,a), h in [1,H]
  std::vector<double> state_values;  // (h,s), h in [1,H+1]; V_{H+1} = 0
  std::vector<int> greedy_actions;   // (h,s), h in [1,H]

  double q(int h, int s, int a) const {
    return q_values[(static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a];
  }
  double v(int h, int s) const {
    return state_values[static_cast<std::size_t>(h - 1) * num_states + s];
  }
  int greedy(int h, int s) const {
    return greedy_actions[static_cast<std::size_t>(h - 1) * num_states + s];
  }

  // Expected optimal value from the initial distribution.
  double initial_value(const FiniteMDP& mdp) const {
    double v0 = 0.0;
    for (int s = 0; s < num_states; ++s) v0 += mdp.initial_state_dist[s] * v(1, s);
    return v0;
  }
};

inline int argmax_lexicographic(const double* q_row, int k) {
  int best = 0;
  for (int a = 1; a < k; ++a) {
    if (q_row[a] > q_row[best]) best = a;
  }
  return best;
}

// Backward induction over reward(s,a) + tau_h(s,a) under the MDP's kernel.
// The reward table must be finite and nonnegative; transfers are optional.
inline ValueSolution value_iteration(const FiniteMDP& mdp, const SaTable& reward,
                                     const TransferPolicy* transfers = nullptr) {
  const int S = mdp.num_states, K = mdp.num_actions, H = mdp.horizon;
  if (!reward.same_shape(S, K)) {
    throw ConfigError("value_iteration: reward table shape does not match the MDP");
  }
  for (double x : reward.values) {
    if (!std::isfinite(x) || x < 0.0) {
      throw ConfigError("value_iteration: reward entries must be finite and nonnegative");
    }
  }
  if (transfers != nullptr && !transfers->table().same_shape(H, S, K)) {
    throw ConfigError("value_iteration: transfer policy shape does not match the MDP");
  }

  ValueSolution sol;
  sol.horizon = H;
  sol.num_states = S;
  sol.num_actions = K;
  sol.q_values.assign(static_cast<std::size_t>(H) * S * K, 0.0);
  sol.state_values.assign(static_cast<std::size_t>(H + 1) * S, 0.0);
  sol.greedy_actions.assign(static_cast<std::size_t>(H) * S, 0);

  std::vector<double> q_row(K);
  for (int h = H; h >= 1; --h) {
    const double* v_next = sol.state_values.data() + static_cast<std::size_t>(h) * S;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < K; ++a) {
        double cont = 0.0;
        const double* row = mdp.transition.data() + (static_cast<std::size_t>(s) * K + a) * S;
        for (int s2 = 0; s2 < S; ++s2) cont += row[s2] * v_next[s2];
        double q = reward.at(s, a) + cont;
        if (transfers != nullptr) q += transfers->at(h, s, a);
        q_row[a] = q;
        sol.q_values[(static_cast<std::size_t>(h - 1) * S + s) * K + a] = q;
      }
      const int best = argmax_lexicographic(q_row.data(), K);
      sol.greedy_actions[static_cast<std::size_t>(h - 1) * S + s] = best;
      sol.state_values[static_cast<std::size_t>(h - 1) * S + s] = q_row[best];
    }
  }
  return sol;
}

// Evaluates a deterministic step-indexed policy ((h,s) -> a) on the given
// reward table, optionally with transfers added.
inline double policy_value(const FiniteMDP& mdp, const SaTable& reward,
                           const std::vector<int>& policy,
                           const TransferPolicy* transfers = nullptr) {
  const int S = mdp.num_states, K = mdp.num_actions, H = mdp.horizon;
  if (policy.size() != static_cast<std::size_t>(H) * S) {
    throw ConfigError("policy_value: policy table has wrong size");
  }
  std::vector<double> v_next(S, 0.0), v_cur(S, 0.0);
  for (int h = H; h >= 1; --h) {
    for (int s = 0; s < S; ++s) {
      const int a = policy[static_cast<std::size_t>(h - 1) * S + s];
      double cont = 0.0;
      const double* row = mdp.transition.data() + (static_cast<std::size_t>(s) * K + a) * S;
      for (int s2 = 0; s2 < S; ++s2) cont += row[s2] * v_next[s2];
      double r = reward.at(s, a) + cont;
      if (transfers != nullptr) r += transfers->at(h, s, a);
      v_cur[s] = r;
    }
    std::swap(v_cur, v_next);
  }
  double v0 = 0.0;
  for (int s = 0; s < S; ++s) v0 += mdp.initial_state_dist[s] * v_next[s];
  return v0;
}

struct TimedStep {
  int h = 0;  // 1-based step
  int s = 0;
  int a = 0;
};

// Sum of r_a + r_p along a full-length trajectory. Transfers never enter.
inline double episode_welfare(const FiniteMDP& mdp, const std::vector<TimedStep>& trajectory) {
  if (trajectory.size() != static_cast<std::size_t>(mdp.horizon)) {
    throw ConfigError("episode_welfare: trajectory must have exactly H steps");
  }
  double w = 0.0;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const TimedStep& st = trajectory[i];
    if (st.h != static_cast<int>(i) + 1 || st.s < 0 || st.s >= mdp.num_states || st.a < 0 ||
        st.a >= mdp.num_actions) {
      throw ConfigError("episode_welfare: malformed trajectory at position " + std::to_string(i));
    }
    w += mdp.reward_agent.at(st.s, st.a) + mdp.reward_principal.at(st.s, st.a);
  }
  return w;
}

struct WelfareOptimum {
  double w_star = 0.0;
  std::vector<int> policy;  // greedy (h,s) -> a for the combined reward
  ValueSolution solution;
};

// Optimal expected welfare W* and the policy attaining it, from backward
// induction on the summed reward r_a + r_p.
inline WelfareOptimum optimal_welfare(const FiniteMDP& mdp) {
  SaTable combined(mdp.num_states, mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      combined.at(s, a) = mdp.reward_agent.at(s, a) + mdp.reward_principal.at(s, a);
    }
  }
  WelfareOptimum out;
  out.solution = value_iteration(mdp, combined);
  out.policy = out.solution.greedy_actions;
  out.w_star = out.solution.initial_value(mdp);
  return out;
}

// --- JSON serialization -----------------------------------------------------
//
// Schema: {"S":int,"A":int,"H":int,"P":[[[f64]]],"r_a":[[f64]],"r_p":[[f64]],
//          "rho0":[f64]} with P indexed [s][a][s'].

inline nlohmann::json mdp_to_json(const FiniteMDP& mdp) {
  nlohmann::json j;
  j["S"] = mdp.num_states;
  j["A"] = mdp.num_actions;
  j["H"] = mdp.horizon;
  auto table2 = [&](const SaTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (int s = 0; s < mdp.num_states; ++s) {
      nlohmann::json row = nlohmann::json::array();
      for (int a = 0; a < mdp.num_actions; ++a) row.push_back(t.at(s, a));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  nlohmann::json p = nlohmann::json::array();
  for (int s = 0; s < mdp.num_states; ++s) {
    nlohmann::json by_action = nlohmann::json::array();
    for (int a = 0; a < mdp.num_actions; ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (int s2 = 0; s2 < mdp.num_states; ++s2) row.push_back(mdp.p(s, a, s2));
      by_action.push_back(std::move(row));
    }
    p.push_back(std::move(by_action));
  }
  j["P"] = std::move(p);
  j["r_a"] = table2(mdp.reward_agent);
  j["r_p"] = table2(mdp.reward_principal);
  j["rho0"] = mdp.initial_state_dist;
  return j;
}

inline FiniteMDP mdp_from_json(const nlohmann::json& j) {
  FiniteMDP m;
  try {
    m.num_states = j.at("S").get<int>();
    m.num_actions = j.at("A").get<int>();
    m.horizon = j.at("H").get<int>();
    if (m.num_states <= 0 || m.num_actions <= 0 || m.horizon <= 0) {
      throw ConfigError("mdp_from_json: S, A, H must be positive");
    }
    m.reward_agent = SaTable(m.num_states, m.num_actions);
    m.reward_principal = SaTable(m.num_states, m.num_actions);
    m.transition.assign(
        static_cast<std::size_t>(m.num_states) * m.num_actions * m.num_states, 0.0);
    const auto& p = j.at("P");
    const auto& ra = j.at("r_a");
    const auto& rp = j.at("r_p");
    for (int s = 0; s < m.num_states; ++s) {
      for (int a = 0; a < m.num_actions; ++a) {
        m.reward_agent.at(s, a) = ra.at(s).at(a).get<double>();
        m.reward_principal.at(s, a) = rp.at(s).at(a).get<double>();
        for (int s2 = 0; s2 < m.num_states; ++s2) {
          m.p_mut(s, a, s2) = p.at(s).at(a).at(s2).get<double>();
        }
      }
    }
    m.initial_state_dist = j.at("rho0").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mdp_from_json: malformed document: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace pamdp
