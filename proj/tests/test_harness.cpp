#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pamdp/harness.hpp"
#include "test_support.hpp"

using namespace pamdp;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal_config() {
  return nlohmann::json{
      {"env", {{"kind", "lineworld"}}},
      {"agent", {{"kind", "qlearning"}}},
      {"scenario", "baseline"},
      {"episodes", 50},
      {"replicates", 2},
      {"seeds", {11, 12}},
      {"out_dir", "out"},
  };
}

std::string records_to_string(const std::vector<RegretLedger>& ledgers) {
  std::ostringstream ss;
  std::vector<EpisodeRecord> all;
  for (const RegretLedger& l : ledgers) all.insert(all.end(), l.records.begin(), l.records.end());
  write_records_csv(ss, all);
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pamdp_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("rolling average on the worked examples") {
  CHECK(rolling_average({3, 1, 4}, 1) == std::vector<double>{3, 1, 4});
  CHECK(rolling_average({2, 2, 2, 2}, 3) == std::vector<double>{2, 2, 2, 2});
  const std::vector<double> out = rolling_average({0, 1, 0, 1}, 2);
  REQUIRE(out.size() == 4);
  CHECK(out[0] == Approx(0.0));
  CHECK(out[1] == Approx(0.5));
  CHECK(out[2] == Approx(0.5));
  CHECK(out[3] == Approx(0.5));
  CHECK(rolling_average({}, 4).empty());
  CHECK_THROWS_AS(rolling_average({1.0}, 0), ConfigError);
}

TEST_CASE("regret exponent fits recover exact power laws") {
  RegretLedger linear;
  linear.w_star = 1.0;
  RegretLedger sqrt_growth;
  sqrt_growth.w_star = 0.0;
  for (int k = 1; k <= 4096; ++k) {
    linear.records.push_back({k, Phase::Baseline, 0, 0, 0.0, std::nullopt, 1, -1});
    const double w = -(std::sqrt(double(k)) - std::sqrt(double(k - 1)));
    sqrt_growth.records.push_back({k, Phase::Baseline, 0, 0, w, std::nullopt, 1, -1});
  }
  linear.rebuild_regret_series();
  sqrt_growth.rebuild_regret_series();

  const std::vector<long long> grid = {64, 128, 256, 512, 1024, 2048, 4096};
  CHECK(fit_regret_exponent(linear, grid).exponent == Approx(1.0).margin(1e-6));
  CHECK(fit_regret_exponent(sqrt_growth, grid).exponent == Approx(0.5).margin(1e-6));

  SECTION("nonpositive regret points are excluded with a flag") {
    RegretLedger mixed = linear;
    mixed.w_star = 0.0;  // regret identically zero now
    mixed.rebuild_regret_series();
    CHECK_THROWS_AS(fit_regret_exponent(mixed, grid), FitError);
    CHECK_THROWS_AS(fit_power_law({1.0}, {1.0}), FitError);
    const FitResult partial = fit_power_law({10, 100, 1000}, {-1.0, 10.0, 100.0});
    CHECK(partial.points_excluded == 1);
    CHECK(partial.points_used == 2);
  }
  SECTION("grid points beyond the ledger are rejected") {
    CHECK_THROWS_AS(fit_regret_exponent(linear, {9999}), ConfigError);
  }
}

TEST_CASE("experiment config parsing reports field paths") {
  CHECK_NOTHROW(parse_experiment_config(minimal_config()));

  SECTION("missing env") {
    nlohmann::json j = minimal_config();
    j.erase("env");
    try {
      parse_experiment_config(j);
      FAIL();
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("$.env") != std::string::npos);
    }
  }
  SECTION("unknown scenario") {
    nlohmann::json j = minimal_config();
    j["scenario"] = "mystery";
    try {
      parse_experiment_config(j);
      FAIL();
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("$.scenario") != std::string::npos);
    }
  }
  SECTION("wrong type surfaces the path") {
    nlohmann::json j = minimal_config();
    j["episodes"] = "many";
    try {
      parse_experiment_config(j);
      FAIL();
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("$.episodes") != std::string::npos);
    }
  }
  SECTION("seed count must match replicates") {
    nlohmann::json j = minimal_config();
    j["seeds"] = {1, 2, 3};
    CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
  }
  SECTION("subsidy scenario demands a lineworld env") {
    nlohmann::json j = minimal_config();
    j["scenario"] = "subsidy";
    j["env"] = {{"kind", "random"}, {"S", 3}, {"K", 2}, {"H", 2}};
    const ExperimentConfig cfg = parse_experiment_config(j);
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  }
}

TEST_CASE("baseline experiments satisfy the accounting identity") {
  ExperimentConfig cfg = parse_experiment_config(minimal_config());
  cfg.episodes = 120;
  const std::vector<RegretLedger> ledgers = run_experiment(cfg);
  REQUIRE(ledgers.size() == 2);
  for (const RegretLedger& l : ledgers) {
    REQUIRE(l.records.size() == 120);
    for (const EpisodeRecord& r : l.records) {
      CHECK(r.agent_return + r.principal_return == Approx(r.welfare).margin(1e-9));
      CHECK(r.phase == Phase::Baseline);
      REQUIRE(r.terminal_pollution.has_value());
    }
    // Replaying the ledger reproduces the stored regret series exactly.
    RegretLedger copy = l;
    copy.rebuild_regret_series();
    CHECK(copy.regret_series == l.regret_series);
  }
}

TEST_CASE("infeasible two-phase budgets propagate from the mechanism") {
  nlohmann::json j = minimal_config();
  j["env"] = {{"kind", "random"}, {"S", 3}, {"K", 2}, {"H", 2}, {"seed", 4}};
  j["scenario"] = "two_phase";
  j["episodes"] = 64;  // far below the phase-1 need
  j["replicates"] = 1;
  j["seeds"] = {1};
  const ExperimentConfig cfg = parse_experiment_config(j);
  CHECK_THROWS_AS(run_experiment(cfg), BudgetError);
}

TEST_CASE("experiments are bitwise reproducible per seed") {
  const ExperimentConfig cfg = parse_experiment_config(minimal_config());
  const std::string first = records_to_string(run_experiment(cfg));
  const std::string second = records_to_string(run_experiment(cfg));
  CHECK(first == second);
}

TEST_CASE("file-backed environments load through the MDP JSON schema") {
  TempDir tmp;
  const fs::path mdp_path = tmp.path / "chain.json";
  {
    std::ofstream out(mdp_path);
    out << mdp_to_json(testsup::chain_mdp());
  }
  nlohmann::json j = minimal_config();
  j["env"] = {{"kind", "file"}, {"path", mdp_path.string()}};
  j["agent"] = {{"kind", "oracle"}};
  j["episodes"] = 10;
  j["replicates"] = 1;
  j["seeds"] = {5};
  const ExperimentConfig cfg = parse_experiment_config(j);
  const std::vector<RegretLedger> ledgers = run_experiment(cfg);
  REQUIRE(ledgers.size() == 1);
  CHECK(ledgers[0].w_star == Approx(1.0));
  for (const EpisodeRecord& r : ledgers[0].records) {
    CHECK(r.welfare == Approx(1.0));  // oracle plays the chain optimally
    CHECK_FALSE(r.terminal_pollution.has_value());
  }
}

TEST_CASE("CSV emission round-trips every numeric field") {
  TempDir tmp;
  const std::string path = (tmp.path / "ledger.csv").string();

  SECTION("empty ledger gives a header-only file") {
    RegretLedger empty;
    emit_csv(empty, path);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == kCsvHeader);
    CHECK_FALSE(std::getline(in, line));
  }

  SECTION("three records round trip at full precision") {
    RegretLedger ledger;
    ledger.records.push_back(
        {1, Phase::Baseline, 0.1 + 0.2, -1.0 / 3.0, 2.0 / 7.0, std::nullopt, 42, -1});
    ledger.records.push_back({2, Phase::Phase1, 1e-17, 12345.6789, 0.0, 3.0, 7, -1});
    ledger.records.push_back({3, Phase::Subsidy, -0.0, 1e300, -2.5e-13, 0.0, 1, -1});
    emit_csv(ledger, path);

    const std::vector<EpisodeRecord> back = read_records_csv(path);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back[i].episode == ledger.records[i].episode);
      CHECK(back[i].phase == ledger.records[i].phase);
      CHECK(back[i].agent_return == ledger.records[i].agent_return);
      CHECK(back[i].principal_return == ledger.records[i].principal_return);
      CHECK(back[i].welfare == ledger.records[i].welfare);
      CHECK(back[i].terminal_pollution.has_value() ==
            ledger.records[i].terminal_pollution.has_value());
      if (back[i].terminal_pollution) {
        CHECK(*back[i].terminal_pollution == *ledger.records[i].terminal_pollution);
      }
      CHECK(back[i].seed == ledger.records[i].seed);
    }
  }

  SECTION("unwritable path raises an IO error") {
    RegretLedger empty;
    CHECK_THROWS_AS(emit_csv(empty, "/nonexistent_dir_zzz/x.csv"), IoError);
  }
}

TEST_CASE("SVG charts carry one polyline per scenario") {
  TempDir tmp;
  const std::string path = (tmp.path / "chart.svg").string();
  const std::vector<SvgSeries> series = {{"baseline", {1, 2, 3, 2, 1}},
                                         {"subsidy", {2, 3, 4, 4, 4}}};
  emit_svg(series, path, "Social welfare", "welfare");

  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string body = buf.str();
  std::size_t count = 0, pos = 0;
  while ((pos = body.find("<polyline", pos)) != std::string::npos) {
    ++count;
    pos += 9;
  }
  CHECK(count == 2);
  CHECK(body.find("baseline") != std::string::npos);
  CHECK(body.find("subsidy") != std::string::npos);
  CHECK(body.find("<svg") != std::string::npos);
}

TEST_CASE("ledger series average replicates before smoothing") {
  RegretLedger a, b;
  a.w_star = b.w_star = 1.0;
  for (int k = 1; k <= 4; ++k) {
    a.records.push_back({k, Phase::Baseline, 0, 0, 1.0, 2.0, 1, -1});
    b.records.push_back({k, Phase::Baseline, 0, 0, 3.0, 4.0, 2, -1});
  }
  a.rebuild_regret_series();
  b.rebuild_regret_series();
  const std::vector<RegretLedger> reps = {a, b};
  CHECK(ledger_series(reps, SeriesKind::Welfare, 1, "w").values ==
        std::vector<double>{2, 2, 2, 2});
  CHECK(ledger_series(reps, SeriesKind::Pollution, 1, "p").values ==
        std::vector<double>{3, 3, 3, 3});
  const std::vector<double> regret = ledger_series(reps, SeriesKind::Regret, 1, "r").values;
  CHECK(regret == std::vector<double>{-1, -2, -3, -4});
}
