#pragma once

// Per-episode accounting records and the welfare-regret ledger shared by the
// experiment harness and the two-phase mechanism.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pamdp/errors.hpp"

namespace pamdp {

enum class Phase { Phase1, Phase2, Baseline, Subsidy };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Phase1: return "Phase1";
    case Phase::Phase2: return "Phase2";
    case Phase::Baseline: return "Baseline";
    case Phase::Subsidy: return "Subsidy";
  }
  return "?";
}

inline Phase phase_from_name(const std::string& s) {
  if (s == "Phase1") return Phase::Phase1;
  if (s == "Phase2") return Phase::Phase2;
  if (s == "Baseline") return Phase::Baseline;
  if (s == "Subsidy") return Phase::Subsidy;
  throw ConfigError("unknown phase tag: " + s);
}

struct EpisodeRecord {
  long long episode = 0;       // 1-based index within the run
  Phase phase = Phase::Baseline;
  double agent_return = 0.0;      // transfer inclusive
  double principal_return = 0.0;  // transfer inclusive
  double welfare = 0.0;           // base rewards only
  std::optional<double> terminal_pollution;  // line-world runs only
  std::uint64_t seed = 0;
  int final_state = -1;  // bookkeeping for env-specific annotation; not serialized
};

// Least-squares power-law fit of a regret curve, with a crude confidence band.
struct FitResult {
  double exponent = 0.0;
  double intercept = 0.0;      // of the log-log line
  double exponent_stderr = 0.0;
  int points_used = 0;
  int points_excluded = 0;     // nonpositive regret values skipped (flagged)
};

// Breakdown of R_sw into estimation, principal-learning, and agent-deviation
// contributions (the latter includes trajectory sampling noise).
struct RegretDecomposition {
  double phase1 = 0.0;
  double phase2_planning = 0.0;
  double agent_deviation = 0.0;
};

struct RegretLedger {
  std::vector<EpisodeRecord> records;
  double w_star = 0.0;
  std::vector<double> regret_series;  // cumulative R_sw after each episode
  std::optional<RegretDecomposition> decomposition;
  std::optional<FitResult> exponent_fit;

  void rebuild_regret_series() {
    regret_series.clear();
    regret_series.reserve(records.size());
    double cum_welfare = 0.0;
    for (std::size_t k = 0; k < records.size(); ++k) {
      cum_welfare += records[k].welfare;
      regret_series.push_back(static_cast<double>(k + 1) * w_star - cum_welfare);
    }
  }

  // R_sw(T) for a prefix of the run.
  double regret_at(long long t) const {
    if (t < 1 || static_cast<std::size_t>(t) > regret_series.size()) {
      throw ConfigError("regret_at: prefix length out of range");
    }
    return regret_series[static_cast<std::size_t>(t - 1)];
  }
};

}  // namespace pamdp
