#pragma once

// Agent behavioral models. An AgentLearner sees, at each step, the state and
// the transfer vector currently offered over actions; it never sees the
// principal's internals. The oracle agent best-responds exactly to the
// transfer policy announced at the start of each episode; the tabular
// Q-learner updates from realized rewards (transfer inclusive) only.

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "pamdp/errors.hpp"
#include "pamdp/mdp.hpp"

namespace pamdp {

class AgentLearner {
 public:
  virtual ~AgentLearner() = default;

  // Announces the transfer schedule in force for the coming episode. The
  // default is a no-op; planners use it to recompute their best response.
  virtual void begin_episode(const TransferPolicy* /*announced*/) {}

  // Chooses an action given the transfers offered over actions at (h, s).
  virtual int act(int h, int s, std::span<const double> offered) = 0;

  // Experience callback; reward includes the transfer actually received.
  virtual void observe(int /*h*/, int /*s*/, int /*a*/, double /*reward_with_transfer*/,
                       int /*next_state*/) {}

  virtual void end_episode() {}

  // The agent's current per-step action distribution, used by measurement
  // code to evaluate the episode policy exactly. Must match act() in law.
  virtual std::vector<double> action_distribution(int h, int s,
                                                  std::span<const double> offered) const = 0;
};

// Fully informed best responder: plans against r_a plus the announced
// transfers with backward induction and plays greedily (ties to the smallest
// action index). Zero per-episode shortfall against any fixed transfer
// policy, so its rationality exponent is 0.
class OracleAgent : public AgentLearner {
 public:
  explicit OracleAgent(const FiniteMDP& mdp) : mdp_(&mdp) { replan(nullptr); }

  void begin_episode(const TransferPolicy* announced) override { replan(announced); }

  // Continuation values come from the episode plan; the immediate term uses
  // the live offer, so direct single-step queries behave as expected.
  int act(int h, int s, std::span<const double> offered) override { return choose(h, s, offered); }

  std::vector<double> action_distribution(int h, int s,
                                          std::span<const double> offered) const override {
    std::vector<double> dist(mdp_->num_actions, 0.0);
    dist[choose(h, s, offered)] = 1.0;
    return dist;
  }

  const ValueSolution& plan() const { return plan_; }

 private:
  void replan(const TransferPolicy* announced) {
    plan_ = value_iteration(*mdp_, mdp_->reward_agent, announced);
  }

  int choose(int h, int s, std::span<const double> offered) const {
    const int K = mdp_->num_actions;
    std::vector<double> q(K);
    for (int a = 0; a < K; ++a) {
      double cont = 0.0;
      if (h < mdp_->horizon) {
        const double* row = mdp_->transition.data() + (static_cast<std::size_t>(s) * K + a) *
                                                          mdp_->num_states;
        for (int s2 = 0; s2 < mdp_->num_states; ++s2) cont += row[s2] * plan_.v(h + 1, s2);
      }
      q[a] = mdp_->reward_agent.at(s, a) + (offered.empty() ? 0.0 : offered[a]) + cont;
    }
    return argmax_lexicographic(q.data(), K);
  }

  const FiniteMDP* mdp_;
  ValueSolution plan_;
};

struct QLearningConfig {
  enum class LrDecay { Constant, InverseVisits };

  double learning_rate = 0.1;          // base rate
  LrDecay lr_decay = LrDecay::Constant;
  double epsilon_init = 1.0;
  double epsilon_decay = 0.999;        // multiplicative, applied per episode
  double epsilon_floor = 0.05;
  // Q-table initialization; NaN means "use the horizon H" (optimistic).
  double optimistic_init = std::numeric_limits<double>::quiet_NaN();

  void validate() const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
      throw ConfigError("QLearningConfig: learning_rate must be in (0,1]");
    }
    for (double e : {epsilon_init, epsilon_floor}) {
      if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("QLearningConfig: epsilon must be in [0,1]");
    }
    if (!(epsilon_decay >= 0.0 && epsilon_decay <= 1.0)) {
      throw ConfigError("QLearningConfig: epsilon_decay must be in [0,1]");
    }
  }
};

// Epsilon-greedy tabular Q-learning over a step-indexed table Q(h,s,a).
// Rewards fed to observe() already include received transfers, so the agent
// learns the value of complying with offers purely from experience.
class QLearningAgent : public AgentLearner {
 public:
  QLearningAgent(const QLearningConfig& cfg, int S, int K, int H, std::uint64_t seed)
      : cfg_(cfg), S_(S), K_(K), H_(H), rng_(seed), epsilon_(cfg.epsilon_init) {
    cfg_.validate();
    const double init = std::isnan(cfg.optimistic_init) ? static_cast<double>(H)
                                                        : cfg.optimistic_init;
    q_.assign(static_cast<std::size_t>(H) * S * K, init);
    visits_.assign(q_.size(), 0);
  }

  int act(int h, int s, std::span<const double> /*offered*/) override {
    if (epsilon_ > 0.0 && unit_(rng_) < epsilon_) {
      return static_cast<int>(unit_(rng_) * K_) % K_;
    }
    return argmax_lexicographic(q_row(h, s), K_);
  }

  void observe(int h, int s, int a, double reward_with_transfer, int next_state) override {
    double target = reward_with_transfer;
    if (h < H_) {
      const double* next = q_row(h + 1, next_state);
      target += next[argmax_lexicographic(next, K_)];
    }
    double& q = q_[idx(h, s, a)];
    long& n = visits_[idx(h, s, a)];
    ++n;
    const double lr = cfg_.lr_decay == QLearningConfig::LrDecay::InverseVisits
                          ? cfg_.learning_rate / static_cast<double>(n)
                          : cfg_.learning_rate;
    q += lr * (target - q);
  }

  void end_episode() override {
    epsilon_ = std::max(cfg_.epsilon_floor, epsilon_ * cfg_.epsilon_decay);
  }

  std::vector<double> action_distribution(int h, int s,
                                          std::span<const double> /*offered*/) const override {
    std::vector<double> dist(K_, epsilon_ / K_);
    dist[argmax_lexicographic(q_row(h, s), K_)] += 1.0 - epsilon_;
    return dist;
  }

  double q_value(int h, int s, int a) const { return q_[idx(h, s, a)]; }
  double& q_value_mut(int h, int s, int a) { return q_[idx(h, s, a)]; }
  double epsilon() const { return epsilon_; }

 private:
  std::size_t idx(int h, int s, int a) const {
    return (static_cast<std::size_t>(h - 1) * S_ + s) * K_ + a;
  }
  const double* q_row(int h, int s) const { return q_.data() + idx(h, s, 0); }

  QLearningConfig cfg_;
  int S_, K_, H_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  double epsilon_;
  std::vector<double> q_;
  std::vector<long> visits_;
};

inline std::unique_ptr<AgentLearner> oracle_agent(const FiniteMDP& mdp) {
  return std::make_unique<OracleAgent>(mdp);
}

inline std::unique_ptr<AgentLearner> q_learning_agent(const QLearningConfig& cfg, int S, int K,
                                                      int H, std::uint64_t seed) {
  return std::make_unique<QLearningAgent>(cfg, S, K, H, seed);
}

// Measured hindsight-rationality profile: per-episode value shortfall against
// the best response to each episode's transfers, and the fitted growth
// exponent of the cumulative shortfall.
struct RationalityProfile {
  double kappa = 0.0;   // fitted exponent, clamped to [0,1]
  double leading_constant = 0.0;
  double zeta = 1.0;    // declared confidence exponent (level 1 - T^-zeta)
  bool degenerate_fit = false;  // too few positive points to regress
  std::vector<double> shortfall;   // per episode
  std::vector<double> cumulative;  // running sum of shortfall
};

namespace detail {

// Exact evaluation of a stochastic step-indexed policy (given as per-(h,s)
// action distributions) on r_a + tau.
inline double stochastic_policy_value(const FiniteMDP& mdp, const AgentLearner& agent,
                                      const TransferPolicy& transfers) {
  const int S = mdp.num_states, K = mdp.num_actions, H = mdp.horizon;
  std::vector<double> v_next(S, 0.0), v_cur(S, 0.0);
  for (int h = H; h >= 1; --h) {
    for (int s = 0; s < S; ++s) {
      const double* offer = transfers.row(h, s);
      std::vector<double> dist =
          agent.action_distribution(h, s, std::span<const double>(offer, K));
      double v = 0.0;
      for (int a = 0; a < K; ++a) {
        if (dist[a] == 0.0) continue;
        double cont = 0.0;
        const double* row = mdp.transition.data() + (static_cast<std::size_t>(s) * K + a) * S;
        for (int s2 = 0; s2 < S; ++s2) cont += row[s2] * v_next[s2];
        v += dist[a] * (mdp.reward_agent.at(s, a) + transfers.at(h, s, a) + cont);
      }
      v_cur[s] = v;
    }
    std::swap(v_cur, v_next);
  }
  double v0 = 0.0;
  for (int s = 0; s < S; ++s) v0 += mdp.initial_state_dist[s] * v_next[s];
  return v0;
}

inline int sample_categorical(const double* probs, int n, double u) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return n - 1;
}

// Least-squares line through (x, y) points; returns {slope, intercept}.
inline std::pair<double, double> least_squares(const std::vector<double>& x,
                                               const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return {0.0, sy / n};
  const double slope = (n * sxy - sx * sy) / denom;
  return {slope, (sy - slope * sx) / n};
}

}  // namespace detail

// Runs the agent for T episodes against the given per-episode transfer
// sequence (size 1 means the same policy every episode) and fits the
// cumulative-shortfall exponent on the second half of the horizon. The
// shortfall of episode k is computed from exact values: optimal response
// value minus the value of the agent's pre-episode policy snapshot.
inline RationalityProfile measure_rationality(AgentLearner& agent, const FiniteMDP& mdp,
                                              const std::vector<TransferPolicy>& transfer_sequence,
                                              long long T, std::uint64_t env_seed,
                                              double zeta = 1.0) {
  if (T < 2) throw ConfigError("measure_rationality: T must be at least 2");
  if (transfer_sequence.empty()) {
    throw ConfigError("measure_rationality: transfer sequence must not be empty");
  }
  if (transfer_sequence.size() != 1 &&
      transfer_sequence.size() != static_cast<std::size_t>(T)) {
    throw ConfigError("measure_rationality: transfer sequence must have length 1 or T");
  }

  const int S = mdp.num_states, K = mdp.num_actions, H = mdp.horizon;
  std::mt19937_64 rng(env_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  RationalityProfile profile;
  profile.zeta = zeta;
  profile.shortfall.reserve(T);
  profile.cumulative.reserve(T);

  double running = 0.0;
  for (long long k = 0; k < T; ++k) {
    const TransferPolicy& tau =
        transfer_sequence[transfer_sequence.size() == 1 ? 0 : static_cast<std::size_t>(k)];
    agent.begin_episode(&tau);

    const double best = value_iteration(mdp, mdp.reward_agent, &tau).initial_value(mdp);
    const double attained = detail::stochastic_policy_value(mdp, agent, tau);
    double gap = best - attained;
    if (std::abs(gap) < 1e-12) gap = 0.0;  // the two solvers agree up to rounding
    running += gap;
    profile.shortfall.push_back(gap);
    profile.cumulative.push_back(running);

    // Play the episode so learning agents actually evolve.
    int s = detail::sample_categorical(mdp.initial_state_dist.data(), S, unit(rng));
    for (int h = 1; h <= H; ++h) {
      const double* offer = tau.row(h, s);
      const int a = agent.act(h, s, std::span<const double>(offer, K));
      const int s2 = detail::sample_categorical(
          mdp.transition.data() + (static_cast<std::size_t>(s) * K + a) * S, S, unit(rng));
      agent.observe(h, s, a, mdp.reward_agent.at(s, a) + tau.at(h, s, a), s2);
      s = s2;
    }
    agent.end_episode();
  }

  // Fit log cumulative shortfall against log k on the second half; episodes
  // whose cumulative shortfall is zero up to numeric noise cannot enter the
  // log fit.
  std::vector<double> xs, ys;
  for (long long k = T / 2; k < T; ++k) {
    const double c = profile.cumulative[static_cast<std::size_t>(k)];
    if (c > 1e-9) {
      xs.push_back(std::log(static_cast<double>(k + 1)));
      ys.push_back(std::log(c));
    }
  }
  if (xs.size() < 2) {
    profile.degenerate_fit = true;
    profile.kappa = 0.0;
    profile.leading_constant = 0.0;
  } else {
    auto [slope, intercept] = detail::least_squares(xs, ys);
    profile.kappa = std::clamp(slope, 0.0, 1.0);
    profile.leading_constant = std::exp(intercept);
  }
  return profile;
}

}  // namespace pamdp
