// Command-line driver for the principal-agent MDP simulator.
//
//   pamdp run                --config FILE [--seed N] [--episodes N] [--out DIR] [--plot] [--quiet]
//   pamdp estimate-transfers --config FILE [--seed N] [--episodes N] [--out DIR] [--quiet]
//   pamdp regret-sweep       --config FILE [--seed N] [--out DIR] [--quiet]
//   pamdp diffusion-check    [--mu0 X] [--var0 X] [--dim N] [--samples N] [--seed N]
//                            [--points N] [--out FILE] [--quiet]
//
// Exit codes: 0 success, 2 configuration error, 3 infeasible episode budget,
// 4 I/O failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pamdp/diffusion.hpp"
#include "pamdp/harness.hpp"
#include "pamdp/mechanism.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pamdp;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long long> episodes;
  std::string out_dir;
  bool plot = false;
  bool quiet = false;
};

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot open config file " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("config error: " + path + " is not valid JSON (" + e.what() + ")");
  }
}

ExperimentConfig load_experiment(const CommonFlags& flags) {
  ExperimentConfig cfg = parse_experiment_config(load_json_file(flags.config_path));
  if (flags.episodes) cfg.episodes = *flags.episodes;
  if (flags.seed) {
    cfg.seeds.clear();
    for (int i = 0; i < cfg.replicates; ++i) cfg.seeds.push_back(*flags.seed + i);
  }
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  return cfg;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << body;
  if (!out) throw IoError("write failed for " + path);
}

int cmd_run(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_experiment(flags);
  const std::vector<RegretLedger> ledgers = run_experiment(cfg);
  ensure_out_dir(cfg.out_dir);

  const std::string csv_path =
      (fs::path(cfg.out_dir) / (std::string(scenario_name(cfg.scenario)) + ".csv")).string();
  emit_csv(ledgers, csv_path);

  if (flags.plot) {
    const std::vector<std::pair<std::string, const std::vector<RegretLedger>*>> scenarios = {
        {scenario_name(cfg.scenario), &ledgers}};
    emit_svg(scenarios, (fs::path(cfg.out_dir) / "welfare.svg").string(), SeriesKind::Welfare,
             cfg.rolling_window);
    emit_svg(scenarios, (fs::path(cfg.out_dir) / "regret.svg").string(), SeriesKind::Regret,
             cfg.rolling_window);
    if (cfg.env_kind == ExperimentConfig::EnvKind::LineWorld) {
      emit_svg(scenarios, (fs::path(cfg.out_dir) / "pollution.svg").string(),
               SeriesKind::Pollution, cfg.rolling_window);
    }
  }

  if (!flags.quiet) {
    double mean_welfare = 0.0, regret = 0.0;
    long long n = 0;
    for (const RegretLedger& l : ledgers) {
      for (const EpisodeRecord& r : l.records) {
        mean_welfare += r.welfare;
        ++n;
      }
      regret += l.regret_series.back();
    }
    std::cout << "scenario " << scenario_name(cfg.scenario) << ": " << ledgers.size()
              << " replicate(s) x " << cfg.episodes << " episodes\n"
              << "  W* = " << ledgers.front().w_star
              << ", mean realized welfare = " << mean_welfare / static_cast<double>(n)
              << ", mean R_sw(T) = " << regret / static_cast<double>(ledgers.size()) << "\n"
              << "  wrote " << csv_path << "\n";
  }
  return 0;
}

int cmd_estimate_transfers(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_experiment(flags);
  const FiniteMDP mdp = build_env(cfg);
  const std::uint64_t seed = cfg.seeds.front();
  std::mt19937_64 rng(seed);
  std::unique_ptr<AgentLearner> agent = build_agent(cfg, mdp, seed);

  Phase1Config p1 = cfg.phase1;
  p1.T = cfg.episodes;
  if (cfg.agent_kind == ExperimentConfig::AgentKind::Oracle && std::isnan(p1.kappa_hint)) {
    p1.kappa_hint = 0.0;
  }
  const Phase1Result result = phase1_estimate(mdp, *agent, p1, rng, cfg.episodes, seed);
  if (result.warning && !flags.quiet) std::cerr << "warning: " << *result.warning << "\n";

  ensure_out_dir(cfg.out_dir);
  json tau = json::array();
  for (int h = 1; h <= mdp.horizon; ++h) {
    json by_state = json::array();
    for (int s = 0; s < mdp.num_states; ++s) {
      json row = json::array();
      for (int a = 0; a < mdp.num_actions; ++a) row.push_back(result.tau_hat.at(h, s, a));
      by_state.push_back(std::move(row));
    }
    tau.push_back(std::move(by_state));
  }
  const std::string tau_path = (fs::path(cfg.out_dir) / "tau_hat.json").string();
  write_text_file(tau_path, json{{"tau", tau}}.dump(2) + "\n");

  // Ground truth is available here, so grade the estimate as well.
  const MinimalTransferTable truth = minimal_transfers(mdp);
  const ImplementabilityReport impl = implementability_check(mdp, result.tau_hat);
  int aborted = 0, partial = 0;
  double max_over = 0.0;
  for (const Phase1TargetLog& t : result.targets) {
    if (t.status == TargetStatus::Aborted) ++aborted;
    if (t.status == TargetStatus::Partial) ++partial;
    if (t.status == TargetStatus::Completed && t.h != 0) {
      max_over = std::max(max_over, t.hi - truth.tau_star.at(t.h, t.s, t.a));
    }
  }
  json report;
  report["episodes_used"] = result.episodes_used;
  report["batches_per_target"] = result.batches_per_target;
  report["batch_length"] = result.batch_length;
  report["targets"] = static_cast<long long>(result.targets.size());
  report["aborted_targets"] = aborted;
  report["partial_targets"] = partial;
  report["all_implementable"] = impl.all_ok;
  report["max_overpayment_completed"] = max_over;
  if (result.warning) report["warning"] = *result.warning;
  const std::string report_path = (fs::path(cfg.out_dir) / "estimate_report.json").string();
  write_text_file(report_path, report.dump(2) + "\n");

  if (!flags.quiet) {
    std::cout << "phase 1 used " << result.episodes_used << " episodes over "
              << result.targets.size() << " targets (" << aborted << " aborted, " << partial
              << " partial)\n"
              << "  implementable everywhere: " << (impl.all_ok ? "yes" : "no")
              << ", max overpayment on completed targets: " << max_over << "\n"
              << "  wrote " << tau_path << " and " << report_path << "\n";
  }
  return 0;
}

int cmd_regret_sweep(const CommonFlags& flags) {
  ExperimentConfig cfg = load_experiment(flags);
  std::vector<long long> grid = cfg.t_grid;
  if (grid.empty()) {
    for (int p = 10; p <= 16; ++p) grid.push_back(1LL << p);
  }
  ensure_out_dir(cfg.out_dir);

  const FiniteMDP mdp = build_env(cfg);
  const std::uint64_t seed = cfg.seeds.front();
  std::vector<double> ts, regrets;
  std::string csv = "T,regret,regret_over_T\n";
  for (long long T : grid) {
    std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(T));
    std::unique_ptr<AgentLearner> agent = build_agent(cfg, mdp, seed ^ static_cast<std::uint64_t>(T));
    Phase1Config p1 = cfg.phase1;
    if (cfg.agent_kind == ExperimentConfig::AgentKind::Oracle && std::isnan(p1.kappa_hint)) {
      p1.kappa_hint = 0.0;
    }
    const RegretLedger ledger = two_phase_run(mdp, *agent, p1, cfg.phase2, T, rng, seed);
    const double r = ledger.regret_series.back();
    ts.push_back(static_cast<double>(T));
    regrets.push_back(r);
    csv += std::to_string(T) + "," + std::to_string(r) + "," +
           std::to_string(r / static_cast<double>(T)) + "\n";
    if (!flags.quiet) {
      std::cout << "T = " << T << "  R_sw = " << r << "  R_sw/T = " << r / static_cast<double>(T)
                << "\n";
    }
  }
  const std::string csv_path = (fs::path(cfg.out_dir) / "regret_sweep.csv").string();
  write_text_file(csv_path, csv);

  const FitResult fit = fit_power_law(ts, regrets);
  if (!flags.quiet) {
    std::cout << "fitted regret exponent: " << fit.exponent << " (stderr " << fit.exponent_stderr
              << ", " << fit.points_used << " points, " << fit.points_excluded
              << " excluded)\n  wrote " << csv_path << "\n";
  }
  return 0;
}

struct DiffusionFlags {
  double mu0 = 0.0;
  double var0 = 1.0;
  int dim = 2;
  long long samples = 100000;
  std::uint64_t seed = 1;
  int points = 5;
  std::string out_path;
  bool quiet = false;
};

int cmd_diffusion_check(const DiffusionFlags& flags) {
  const GaussianDiffusionSpec spec =
      GaussianDiffusionSpec::cosine(flags.mu0, flags.var0, flags.dim, flags.points);

  // Grid of 20 affine perturbations around the Bayes rule.
  std::vector<std::pair<double, double>> deltas;
  for (double dg : {-0.1, -0.05, 0.05, 0.1}) {
    for (double db : {-0.1, 0.0, 0.1}) deltas.emplace_back(dg, db);
  }
  for (double db : {-0.2, -0.1, -0.05, 0.05, 0.1, 0.2}) deltas.emplace_back(0.0, db);
  deltas.emplace_back(0.2, 0.0);
  deltas.emplace_back(-0.2, 0.0);

  json out = json::array();
  bool all_ok = true;
  for (const ScheduleEntry& e : spec.schedule) {
    const DominanceReport dom =
        planner_dominance_check(spec, e.t, deltas, flags.samples, flags.seed);
    const NoiseIdentityReport cor = noise_identity_check(spec, e.t, flags.samples, flags.seed + 1);
    json gaps = json::array();
    for (const DominanceEntry& d : dom.entries) {
      gaps.push_back({{"delta_gain", d.delta_gain},
                      {"delta_offset", d.delta_offset},
                      {"gap", d.welfare_gap},
                      {"predicted", d.predicted_gap},
                      {"stderr", d.gap_std_error},
                      {"dominated", d.dominated}});
    }
    json entry = {{"t", e.t},
                  {"welfare_bayes", dom.bayes_welfare.welfare},
                  {"gaps", gaps},
                  {"identity_max_err", cor.skipped ? json(nullptr) : json(cor.max_error)}};
    if (cor.skipped) entry["identity_note"] = cor.note;
    out.push_back(std::move(entry));
    all_ok = all_ok && dom.all_dominated && dom.all_gaps_match &&
             (cor.skipped || cor.max_error < 1e-9);
  }

  const std::string body = out.dump(2) + "\n";
  if (flags.out_path.empty()) {
    std::cout << body;
  } else {
    write_text_file(flags.out_path, body);
    if (!flags.quiet) std::cout << "wrote " << flags.out_path << "\n";
  }
  if (!flags.quiet) {
    std::cout << (all_ok ? "all diffusion checks passed\n" : "some diffusion checks FAILED\n");
  }
  return all_ok ? 0 : 1;
}

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "JSON experiment config");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "override config seeds (seed, seed+1, ...)");
  cmd->add_option("--episodes", flags.episodes, "override the episode budget");
  cmd->add_option("--out", flags.out_dir, "override the output directory");
  cmd->add_flag("--plot", flags.plot, "emit SVG charts alongside the CSV");
  cmd->add_flag("--quiet", flags.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"principal-agent MDP transfer mechanism simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags, est_flags, sweep_flags;
  DiffusionFlags diff_flags;

  CLI::App* run = app.add_subcommand("run", "run a configured scenario and emit CSV/SVG");
  add_common_flags(run, run_flags);

  CLI::App* est = app.add_subcommand("estimate-transfers",
                                     "estimate minimal transfers by batched binary search");
  add_common_flags(est, est_flags);

  CLI::App* sweep = app.add_subcommand("regret-sweep",
                                       "two-phase runs over a T grid plus an exponent fit");
  add_common_flags(sweep, sweep_flags);

  CLI::App* diff = app.add_subcommand("diffusion-check",
                                      "verify the Gaussian denoiser/planner equivalences");
  diff->add_option("--mu0", diff_flags.mu0, "prior mean");
  diff->add_option("--var0", diff_flags.var0, "prior variance");
  diff->add_option("--dim", diff_flags.dim, "dimension d");
  diff->add_option("--samples", diff_flags.samples, "Monte Carlo sample count");
  diff->add_option("--seed", diff_flags.seed, "sampling seed");
  diff->add_option("--points", diff_flags.points, "schedule points in [0,1]");
  diff->add_option("--out", diff_flags.out_path, "write the JSON report here instead of stdout");
  diff->add_flag("--quiet", diff_flags.quiet, "suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (est->parsed()) return cmd_estimate_transfers(est_flags);
    if (sweep->parsed()) return cmd_regret_sweep(sweep_flags);
    if (diff->parsed()) return cmd_diffusion_check(diff_flags);
  } catch (const BudgetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
