#pragma once

// Experiment orchestration: JSON config ingestion, the episode loop for the
// baseline / subsidy / two-phase scenarios, replicate sweeps, welfare-regret
// accounting, and CSV / SVG emission.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pamdp/agents.hpp"
#include "pamdp/envs.hpp"
#include "pamdp/errors.hpp"
#include "pamdp/ledger.hpp"
#include "pamdp/mdp.hpp"
#include "pamdp/mechanism.hpp"
#include "pamdp/simulate.hpp"

namespace pamdp {

enum class Scenario { Baseline, Subsidy, TwoPhase };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Baseline: return "baseline";
    case Scenario::Subsidy: return "subsidy";
    case Scenario::TwoPhase: return "two_phase";
  }
  return "?";
}

struct ExperimentConfig {
  enum class EnvKind { LineWorld, Random, File };
  enum class AgentKind { QLearning, Oracle };

  EnvKind env_kind = EnvKind::LineWorld;
  LineWorldConfig lineworld;
  int random_states = 5, random_actions = 3, random_horizon = 4;
  double random_sparsity = 0.0;
  std::uint64_t random_seed = 0;
  std::string mdp_path;  // EnvKind::File

  AgentKind agent_kind = AgentKind::QLearning;
  QLearningConfig qlearning;

  Scenario scenario = Scenario::Baseline;
  Phase1Config phase1;
  Phase2Config phase2;

  long long episodes = 1000;
  int replicates = 1;
  std::vector<std::uint64_t> seeds;  // one per replicate; filled 1..replicates if absent
  std::string out_dir = "out";
  int rolling_window = 200;
  std::vector<long long> t_grid;  // regret sweeps
};

// --- Config parsing -----------------------------------------------------------

namespace cfgdetail {

[[noreturn]] inline void fail(const std::string& path, const std::string& why) {
  throw ConfigError("config error at " + path + ": " + why);
}

inline const nlohmann::json& member(const nlohmann::json& j, const std::string& path,
                                    const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required field");
  return *it;
}

template <typename T>
T as(const nlohmann::json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(path, "wrong type");
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& path, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return as<T>(*it, path + "." + key);
}

}  // namespace cfgdetail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using cfgdetail::as;
  using cfgdetail::fail;
  using cfgdetail::get_or;
  using cfgdetail::member;

  if (!j.is_object()) fail("$", "top level must be an object");
  ExperimentConfig cfg;

  const nlohmann::json& env = member(j, "$", "env");
  const std::string env_kind = as<std::string>(member(env, "$.env", "kind"), "$.env.kind");
  if (env_kind == "lineworld") {
    cfg.env_kind = ExperimentConfig::EnvKind::LineWorld;
    LineWorldConfig& lw = cfg.lineworld;
    lw.num_positions = get_or(env, "$.env", "num_positions", lw.num_positions);
    lw.horizon = get_or(env, "$.env", "horizon", lw.horizon);
    lw.pollution_cap = get_or(env, "$.env", "pollution_cap", lw.pollution_cap);
    lw.fast_advance = get_or(env, "$.env", "fast_advance", lw.fast_advance);
    lw.fast_pollution = get_or(env, "$.env", "fast_pollution", lw.fast_pollution);
    lw.slow_advance = get_or(env, "$.env", "slow_advance", lw.slow_advance);
    lw.slow_pollution = get_or(env, "$.env", "slow_pollution", lw.slow_pollution);
    lw.detour_advance = get_or(env, "$.env", "detour_advance", lw.detour_advance);
    lw.detour_pollution = get_or(env, "$.env", "detour_pollution", lw.detour_pollution);
    lw.reward_fast = get_or(env, "$.env", "reward_fast", lw.reward_fast);
    lw.reward_slow = get_or(env, "$.env", "reward_slow", lw.reward_slow);
    lw.reward_detour = get_or(env, "$.env", "reward_detour", lw.reward_detour);
    lw.reward_goal = get_or(env, "$.env", "reward_goal", lw.reward_goal);
    lw.subsidy = get_or(env, "$.env", "subsidy", lw.subsidy);
    lw.subsidy_enabled = get_or(env, "$.env", "subsidy_enabled", lw.subsidy_enabled);
  } else if (env_kind == "random") {
    cfg.env_kind = ExperimentConfig::EnvKind::Random;
    cfg.random_states = as<int>(member(env, "$.env", "S"), "$.env.S");
    cfg.random_actions = as<int>(member(env, "$.env", "K"), "$.env.K");
    cfg.random_horizon = as<int>(member(env, "$.env", "H"), "$.env.H");
    cfg.random_sparsity = get_or(env, "$.env", "sparsity", 0.0);
    cfg.random_seed = get_or<std::uint64_t>(env, "$.env", "seed", 0);
  } else if (env_kind == "file") {
    cfg.env_kind = ExperimentConfig::EnvKind::File;
    cfg.mdp_path = as<std::string>(member(env, "$.env", "path"), "$.env.path");
  } else {
    fail("$.env.kind", "expected \"lineworld\", \"random\", or \"file\", got \"" + env_kind + "\"");
  }

  const nlohmann::json& agent = member(j, "$", "agent");
  const std::string agent_kind = as<std::string>(member(agent, "$.agent", "kind"), "$.agent.kind");
  if (agent_kind == "qlearning") {
    cfg.agent_kind = ExperimentConfig::AgentKind::QLearning;
    QLearningConfig& q = cfg.qlearning;
    q.learning_rate = get_or(agent, "$.agent", "learning_rate", q.learning_rate);
    q.epsilon_init = get_or(agent, "$.agent", "epsilon_init", q.epsilon_init);
    q.epsilon_decay = get_or(agent, "$.agent", "epsilon_decay", q.epsilon_decay);
    q.epsilon_floor = get_or(agent, "$.agent", "epsilon_floor", q.epsilon_floor);
    q.optimistic_init = get_or(agent, "$.agent", "optimistic_init", q.optimistic_init);
    const std::string decay = get_or<std::string>(agent, "$.agent", "lr_decay", "constant");
    if (decay == "constant") {
      q.lr_decay = QLearningConfig::LrDecay::Constant;
    } else if (decay == "inverse_visits") {
      q.lr_decay = QLearningConfig::LrDecay::InverseVisits;
    } else {
      fail("$.agent.lr_decay", "expected \"constant\" or \"inverse_visits\"");
    }
    q.validate();
  } else if (agent_kind == "oracle") {
    cfg.agent_kind = ExperimentConfig::AgentKind::Oracle;
  } else {
    fail("$.agent.kind", "expected \"qlearning\" or \"oracle\", got \"" + agent_kind + "\"");
  }

  const std::string scenario = as<std::string>(member(j, "$", "scenario"), "$.scenario");
  if (scenario == "baseline") {
    cfg.scenario = Scenario::Baseline;
  } else if (scenario == "subsidy") {
    cfg.scenario = Scenario::Subsidy;
  } else if (scenario == "two_phase") {
    cfg.scenario = Scenario::TwoPhase;
  } else {
    fail("$.scenario", "expected \"baseline\", \"subsidy\", or \"two_phase\"");
  }

  if (auto it = j.find("phase1"); it != j.end()) {
    cfg.phase1.alpha = get_or(*it, "$.phase1", "alpha", cfg.phase1.alpha);
    cfg.phase1.beta = get_or(*it, "$.phase1", "beta", cfg.phase1.beta);
    cfg.phase1.theta = get_or(*it, "$.phase1", "theta", cfg.phase1.theta);
    cfg.phase1.stationary = get_or(*it, "$.phase1", "stationary", cfg.phase1.stationary);
    cfg.phase1.kappa_hint = get_or(*it, "$.phase1", "kappa_hint", cfg.phase1.kappa_hint);
  }
  if (auto it = j.find("phase2"); it != j.end()) {
    cfg.phase2.bonus_scale = get_or(*it, "$.phase2", "bonus_scale", cfg.phase2.bonus_scale);
    cfg.phase2.delta = get_or(*it, "$.phase2", "delta", cfg.phase2.delta);
    cfg.phase2.known_transitions =
        get_or(*it, "$.phase2", "known_transitions", cfg.phase2.known_transitions);
  }

  cfg.episodes = get_or<long long>(j, "$", "episodes", cfg.episodes);
  if (cfg.episodes < 1) fail("$.episodes", "must be positive");
  cfg.replicates = get_or(j, "$", "replicates", cfg.replicates);
  if (cfg.replicates < 1) fail("$.replicates", "must be positive");
  cfg.seeds = get_or<std::vector<std::uint64_t>>(j, "$", "seeds", {});
  if (cfg.seeds.empty()) {
    for (int i = 1; i <= cfg.replicates; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  if (cfg.seeds.size() != static_cast<std::size_t>(cfg.replicates)) {
    fail("$.seeds", "need exactly one seed per replicate");
  }
  cfg.out_dir = get_or<std::string>(j, "$", "out_dir", cfg.out_dir);
  cfg.rolling_window = get_or(j, "$", "rolling_window", cfg.rolling_window);
  if (cfg.rolling_window < 1) fail("$.rolling_window", "must be >= 1");
  cfg.t_grid = get_or<std::vector<long long>>(j, "$", "t_grid", {});
  return cfg;
}

inline FiniteMDP build_env(const ExperimentConfig& cfg) {
  switch (cfg.env_kind) {
    case ExperimentConfig::EnvKind::LineWorld:
      return build_lineworld(cfg.lineworld);
    case ExperimentConfig::EnvKind::Random:
      return random_mdp(cfg.random_states, cfg.random_actions, cfg.random_horizon,
                        cfg.random_seed, cfg.random_sparsity);
    case ExperimentConfig::EnvKind::File: {
      std::ifstream in(cfg.mdp_path);
      if (!in) throw ConfigError("config error at $.env.path: cannot open " + cfg.mdp_path);
      nlohmann::json doc;
      try {
        in >> doc;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config error at $.env.path: " + cfg.mdp_path + " is not valid JSON (" +
                          e.what() + ")");
      }
      return mdp_from_json(doc);
    }
  }
  throw ConfigError("build_env: unreachable");
}

inline std::unique_ptr<AgentLearner> build_agent(const ExperimentConfig& cfg,
                                                 const FiniteMDP& mdp, std::uint64_t seed) {
  if (cfg.agent_kind == ExperimentConfig::AgentKind::Oracle) return oracle_agent(mdp);
  return q_learning_agent(cfg.qlearning, mdp.num_states, mdp.num_actions, mdp.horizon,
                          seed ^ 0x9E3779B97F4A7C15ULL);
}

// --- Experiment loop ------------------------------------------------------------

namespace detail {

inline RegretLedger run_replicate(const ExperimentConfig& cfg, const FiniteMDP& mdp,
                                  double w_star, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::unique_ptr<AgentLearner> agent = build_agent(cfg, mdp, seed);

  RegretLedger ledger;
  ledger.w_star = w_star;

  if (cfg.scenario == Scenario::TwoPhase) {
    Phase1Config p1 = cfg.phase1;
    if (cfg.agent_kind == ExperimentConfig::AgentKind::Oracle && std::isnan(p1.kappa_hint)) {
      p1.kappa_hint = 0.0;
    }
    ledger = two_phase_run(mdp, *agent, p1, cfg.phase2, cfg.episodes, rng, seed);
    ledger.w_star = w_star;
  } else {
    std::optional<TransferPolicy> transfers;
    Phase tag = Phase::Baseline;
    if (cfg.scenario == Scenario::Subsidy) {
      if (cfg.env_kind != ExperimentConfig::EnvKind::LineWorld) {
        throw ConfigError("config error at $.scenario: subsidy requires a lineworld env");
      }
      LineWorldConfig lw = cfg.lineworld;
      lw.subsidy_enabled = true;
      transfers = build_subsidy_policy(lw);
      tag = Phase::Subsidy;
    }
    ledger.records.reserve(cfg.episodes);
    for (long long k = 1; k <= cfg.episodes; ++k) {
      const EpisodeResult ep =
          run_episode(mdp, *agent, transfers ? &*transfers : nullptr, rng);
      EpisodeRecord rec;
      rec.episode = k;
      rec.phase = tag;
      rec.agent_return = ep.agent_return;
      rec.principal_return = ep.principal_return;
      rec.welfare = ep.welfare;
      rec.seed = seed;
      rec.final_state = ep.final_state;
      ledger.records.push_back(rec);
    }
    ledger.rebuild_regret_series();
  }

  if (cfg.env_kind == ExperimentConfig::EnvKind::LineWorld) {
    for (EpisodeRecord& rec : ledger.records) {
      if (rec.final_state >= 0) {
        rec.terminal_pollution = static_cast<double>(cfg.lineworld.pollution_of(rec.final_state));
      }
    }
  }
  return ledger;
}

}  // namespace detail

// Runs the configured scenario once per replicate seed. Replicates are
// independent and run concurrently; results come back in seed order.
inline std::vector<RegretLedger> run_experiment(const ExperimentConfig& cfg) {
  const FiniteMDP mdp = build_env(cfg);
  const double w_star = optimal_welfare(mdp).w_star;

  std::vector<RegretLedger> ledgers(cfg.seeds.size());
  if (cfg.seeds.size() == 1) {
    ledgers[0] = detail::run_replicate(cfg, mdp, w_star, cfg.seeds[0]);
    return ledgers;
  }
  std::vector<std::future<RegretLedger>> futures;
  futures.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) {
    futures.push_back(std::async(std::launch::async, [&cfg, &mdp, w_star, seed] {
      return detail::run_replicate(cfg, mdp, w_star, seed);
    }));
  }
  for (std::size_t i = 0; i < futures.size(); ++i) ledgers[i] = futures[i].get();
  return ledgers;
}

// --- Series utilities -------------------------------------------------------------

// Simple moving average with left-aligned partial windows at the start.
inline std::vector<double> rolling_average(const std::vector<double>& series, int window) {
  if (window < 1) throw ConfigError("rolling_average: window must be >= 1");
  std::vector<double> out;
  out.reserve(series.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    if (i >= static_cast<std::size_t>(window)) acc -= series[i - window];
    const double n = static_cast<double>(std::min<std::size_t>(i + 1, window));
    out.push_back(acc / n);
  }
  return out;
}

// Least-squares power-law fit of regret against episode count. Points with
// nonpositive regret cannot enter the log-log fit and are counted as excluded.
inline FitResult fit_power_law(const std::vector<double>& t_values,
                               const std::vector<double>& regret_values) {
  std::vector<double> xs, ys;
  FitResult fit;
  for (std::size_t i = 0; i < t_values.size(); ++i) {
    if (regret_values[i] > 0.0) {
      xs.push_back(std::log(t_values[i]));
      ys.push_back(std::log(regret_values[i]));
    } else {
      ++fit.points_excluded;
    }
  }
  if (xs.size() < 2) {
    throw FitError("fit_power_law: fewer than 2 usable grid points");
  }
  auto [slope, intercept] = detail::least_squares(xs, ys);
  fit.exponent = slope;
  fit.intercept = intercept;
  fit.points_used = static_cast<int>(xs.size());

  double mean_x = 0.0;
  for (double x : xs) mean_x += x;
  mean_x /= static_cast<double>(xs.size());
  double ss_res = 0.0, ss_x = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (slope * xs[i] + intercept);
    ss_res += r * r;
    ss_x += (xs[i] - mean_x) * (xs[i] - mean_x);
  }
  if (xs.size() > 2 && ss_x > 0.0) {
    fit.exponent_stderr = std::sqrt(ss_res / static_cast<double>(xs.size() - 2) / ss_x);
  }
  return fit;
}

// Fits log R_sw(T) against log T at the prefix lengths in t_grid.
inline FitResult fit_regret_exponent(const RegretLedger& ledger,
                                     const std::vector<long long>& t_grid) {
  std::vector<double> ts, rs;
  for (long long t : t_grid) {
    if (t < 1 || static_cast<std::size_t>(t) > ledger.regret_series.size()) {
      throw ConfigError("fit_regret_exponent: grid point " + std::to_string(t) +
                        " outside the ledger");
    }
    ts.push_back(static_cast<double>(t));
    rs.push_back(ledger.regret_at(t));
  }
  return fit_power_law(ts, rs);
}

// --- CSV ---------------------------------------------------------------------------

inline constexpr const char* kCsvHeader =
    "episode,phase,agent_return,principal_return,welfare,terminal_pollution,seed";

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline void write_records_csv(std::ostream& out, const std::vector<EpisodeRecord>& records) {
  out << kCsvHeader << '\n';
  for (const EpisodeRecord& r : records) {
    out << r.episode << ',' << phase_name(r.phase) << ',' << detail::format_double(r.agent_return)
        << ',' << detail::format_double(r.principal_return) << ','
        << detail::format_double(r.welfare) << ',';
    if (r.terminal_pollution.has_value()) out << detail::format_double(*r.terminal_pollution);
    out << ',' << r.seed << '\n';
  }
}

inline void emit_csv(const std::vector<RegretLedger>& replicates, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("emit_csv: cannot open " + path + " for writing");
  std::vector<EpisodeRecord> all;
  for (const RegretLedger& l : replicates) {
    all.insert(all.end(), l.records.begin(), l.records.end());
  }
  write_records_csv(out, all);
  if (!out) throw IoError("emit_csv: write failed for " + path);
}

inline void emit_csv(const RegretLedger& ledger, const std::string& path) {
  emit_csv(std::vector<RegretLedger>{ledger}, path);
}

inline std::vector<EpisodeRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_records_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("read_records_csv: empty file " + path);
  if (line != kCsvHeader) throw IoError("read_records_csv: unexpected header in " + path);
  std::vector<EpisodeRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(cur);
    if (ss.eof() && !line.empty() && line.back() == ',') fields.push_back("");
    if (fields.size() != 7) throw IoError("read_records_csv: bad row in " + path);
    EpisodeRecord r;
    r.episode = std::stoll(fields[0]);
    r.phase = phase_from_name(fields[1]);
    r.agent_return = std::stod(fields[2]);
    r.principal_return = std::stod(fields[3]);
    r.welfare = std::stod(fields[4]);
    if (!fields[5].empty()) r.terminal_pollution = std::stod(fields[5]);
    r.seed = std::stoull(fields[6]);
    records.push_back(r);
  }
  return records;
}

// --- SVG ---------------------------------------------------------------------------

enum class SeriesKind { Welfare, Pollution, Regret };

struct SvgSeries {
  std::string label;
  std::vector<double> values;
};

// Mean across replicates per episode index, then smoothed (regret curves are
// cumulative already and are not smoothed).
inline SvgSeries ledger_series(const std::vector<RegretLedger>& replicates,
                               SeriesKind kind, int window, const std::string& label) {
  SvgSeries out;
  out.label = label;
  if (replicates.empty()) return out;
  const std::size_t n = replicates.front().records.size();
  for (const RegretLedger& l : replicates) {
    if (l.records.size() != n) throw ConfigError("ledger_series: replicate lengths differ");
  }
  std::vector<double> mean(n, 0.0);
  for (const RegretLedger& l : replicates) {
    for (std::size_t k = 0; k < n; ++k) {
      double v = 0.0;
      switch (kind) {
        case SeriesKind::Welfare: v = l.records[k].welfare; break;
        case SeriesKind::Pollution: v = l.records[k].terminal_pollution.value_or(0.0); break;
        case SeriesKind::Regret: v = l.regret_series[k]; break;
      }
      mean[k] += v;
    }
  }
  for (double& v : mean) v /= static_cast<double>(replicates.size());
  out.values = kind == SeriesKind::Regret ? mean : rolling_average(mean, window);
  return out;
}

// Static SVG 1.1 line chart, one polyline per series. Axes are drawn with
// <line> elements so the polyline count equals the series count.
inline void emit_svg(const std::vector<SvgSeries>& series, const std::string& path,
                     const std::string& title, const std::string& y_label) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  const double width = 860, height = 480;
  const double ml = 70, mr = 160, mt = 40, mb = 50;

  double lo = 0.0, hi = 1.0;
  std::size_t max_len = 1;
  bool have_data = false;
  for (const SvgSeries& s : series) {
    for (double v : s.values) {
      if (!have_data) {
        lo = hi = v;
        have_data = true;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    max_len = std::max(max_len, s.values.size());
  }
  if (!have_data) { lo = 0.0; hi = 1.0; }
  if (hi - lo < 1e-12) { hi += 0.5; lo -= 0.5; }

  const double plot_w = width - ml - mr, plot_h = height - mt - mb;
  auto x_of = [&](std::size_t i) {
    return ml + plot_w * (max_len > 1 ? static_cast<double>(i) / (max_len - 1) : 0.5);
  };
  auto y_of = [&](double v) { return mt + plot_h * (1.0 - (v - lo) / (hi - lo)); };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("emit_svg: cannot open " + path + " for writing");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + plot_h << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
      << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n"
      << "<text x=\"16\" y=\"" << mt + plot_h / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 16 " << mt + plot_h / 2 << ")\" "
      << "text-anchor=\"middle\">" << y_label << "</text>\n"
      << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"12\" text-anchor=\"middle\">episode</text>\n";
  // y-axis ticks
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    out << "<text x=\"" << ml - 6 << "\" y=\"" << y_of(v) + 4
        << "\" font-size=\"10\" text-anchor=\"end\">" << detail::format_double(v).substr(0, 8)
        << "</text>\n";
  }
  int color = 0;
  for (const SvgSeries& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << kColors[color % 8] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (i) out << ' ';
      out << x_of(i) << ',' << y_of(s.values[i]);
    }
    out << "\"/>\n";
    out << "<text x=\"" << ml + plot_w + 12 << "\" y=\"" << mt + 16 + 18 * color
        << "\" font-size=\"12\" fill=\"" << kColors[color % 8] << "\">" << s.label << "</text>\n";
    ++color;
  }
  out << "</svg>\n";
  if (!out) throw IoError("emit_svg: write failed for " + path);
}

inline void emit_svg(const std::vector<std::pair<std::string, const std::vector<RegretLedger>*>>&
                         scenarios,
                     const std::string& path, SeriesKind kind, int window) {
  std::vector<SvgSeries> series;
  std::string y_label, title;
  switch (kind) {
    case SeriesKind::Welfare:
      y_label = "rolling social welfare";
      title = "Social welfare";
      break;
    case SeriesKind::Pollution:
      y_label = "rolling terminal pollution";
      title = "Terminal pollution";
      break;
    case SeriesKind::Regret:
      y_label = "cumulative welfare regret";
      title = "Welfare regret";
      break;
  }
  for (const auto& [label, ledgers] : scenarios) {
    series.push_back(ledger_series(*ledgers, kind, window, label));
  }
  emit_svg(series, path, title, y_label);
}

}  // namespace pamdp
