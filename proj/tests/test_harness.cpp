#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "vertfl/experiment.hpp"

using namespace vertfl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_run_config(const std::string& out) {
  ExperimentConfig cfg;
  cfg.seed = 11;
  cfg.users = 6;
  cfg.selected = 5;
  cfg.pr = 0.5;
  cfg.attack = AttackKind::Gn;
  cfg.defense = DefenseKind::Vert;
  cfg.kappa = 3;
  cfg.m = 4;
  cfg.s = 4;
  cfg.vert_epochs = 2;
  cfg.classes = 3;
  cfg.dims = 6;
  cfg.per_class = 20;
  cfg.test_per_class = 5;
  cfg.hidden = 4;
  cfg.rounds = 5;
  cfg.out_dir = out;
  return cfg;
}

fs::path temp_dir(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / "vertfl_harness" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("parse_config: minimal file applies the documented defaults") {
  const ExperimentConfig cfg = parse_config("seed = 1");
  CHECK(cfg.seed == 1);
  CHECK(cfg.users == 100);
  CHECK(cfg.selected == 80);
  CHECK(cfg.pr == 0.8);
  CHECK(cfg.m == 10);
  CHECK(cfg.kappa == 15);
  CHECK(cfg.rounds == 200);
  CHECK(cfg.warmup == 2);
}

TEST_CASE("parse_config: sections, comments, and full grammar") {
  const std::string text = R"(
# experiment setup
seed = 42
[experiment]
users = 10
selected = 8
pr = 0.5
[attack]
kind = alie
probability = 0.8
[defense]
kind = vert
successive = krum
[vert]
kappa = 3
s = 16
[data]
classes = 4
beta = 0.6
[training]
rounds = 30
lr_local = 0.01
)";
  const ExperimentConfig cfg = parse_config(text);
  CHECK(cfg.seed == 42);
  CHECK(cfg.users == 10);
  CHECK(cfg.attack == AttackKind::Alie);
  CHECK(cfg.attack_probability == 0.8);
  CHECK(cfg.successive == AggregatorKind::Krum);
  CHECK(cfg.kappa == 3);
  CHECK(cfg.beta == 0.6);
  CHECK(cfg.rounds == 30);
  CHECK(cfg.lr_local == 0.01);
}

TEST_CASE("parse_config rejects out-of-range and unknown input") {
  CHECK_THROWS_WITH_AS(parse_config("experiment.pr = 1.5"),
                       "config field 'experiment.pr': must be in [0, 1]",
                       std::runtime_error);
  // kappa above |C_t|
  CHECK_THROWS_AS(parse_config("experiment.selected = 10\nvert.kappa = 11\n"
                               "experiment.users = 20"),
                  std::runtime_error);
  CHECK_THROWS_AS(parse_config("no_such_key = 3"), std::runtime_error);
  CHECK_THROWS_AS(parse_config("[experiment]\ntypo_users = 5"),
                  std::runtime_error);
  CHECK_THROWS_AS(parse_config("experiment.users"), std::runtime_error);
  CHECK_THROWS_AS(parse_config("experiment.users = ten"), std::runtime_error);
}

TEST_CASE("environment overrides any key") {
  setenv("VERTFL_EXPERIMENT_USERS", "33", 1);
  setenv("VERTFL_ATTACK_KIND", "agr", 1);
  const ExperimentConfig cfg = parse_config("seed = 2", /*apply_env=*/true);
  unsetenv("VERTFL_EXPERIMENT_USERS");
  unsetenv("VERTFL_ATTACK_KIND");
  CHECK(cfg.users == 33);
  CHECK(cfg.attack == AttackKind::Agr);
}

TEST_CASE("set_config_key accepts the short aliases") {
  ExperimentConfig cfg;
  set_config_key(cfg, "pr", "0.9");
  set_config_key(cfg, "defense", "median");
  set_config_key(cfg, "kappa", "7");
  CHECK(cfg.pr == 0.9);
  CHECK(cfg.defense == DefenseKind::Median);
  CHECK(cfg.kappa == 7);
  CHECK_THROWS_AS(set_config_key(cfg, "bogus", "1"), std::runtime_error);
}

TEST_CASE("run_experiment: metrics.csv has T data rows and a fixed header") {
  const fs::path dir = temp_dir("rows");
  const ExperimentConfig cfg = small_run_config(dir.string());
  REQUIRE(run_experiment(cfg) == 0);
  const std::string csv = slurp(dir / "metrics.csv");
  std::istringstream lines(csv);
  std::string line;
  int count = 0;
  REQUIRE(std::getline(lines, line));
  CHECK(line == kMetricsHeader);
  while (std::getline(lines, line))
    if (!line.empty()) ++count;
  CHECK(count == cfg.rounds);
}

TEST_CASE("run_experiment: reruns are byte-identical") {
  const fs::path dir_a = temp_dir("rerun_a");
  const fs::path dir_b = temp_dir("rerun_b");
  ExperimentConfig cfg = small_run_config(dir_a.string());
  REQUIRE(run_experiment(cfg) == 0);
  cfg.out_dir = dir_b.string();
  REQUIRE(run_experiment(cfg) == 0);
  CHECK(slurp(dir_a / "metrics.csv") == slurp(dir_b / "metrics.csv"));
}

TEST_CASE("run_experiment: summary max_accuracy equals the CSV max") {
  const fs::path dir = temp_dir("summary");
  const ExperimentConfig cfg = small_run_config(dir.string());
  REQUIRE(run_experiment(cfg) == 0);

  nlohmann::json summary;
  std::ifstream(dir / "summary.json") >> summary;

  const std::string csv = slurp(dir / "metrics.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  double best = 0.0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');  // round
    std::getline(cells, cell, ',');  // accuracy
    best = std::max(best, std::stod(cell));
  }
  CHECK(summary["max_accuracy"].get<double>() == doctest::Approx(best));
  CHECK(summary["seed"].get<std::uint64_t>() == cfg.seed);
}

TEST_CASE("sweep: one directory per value plus an index") {
  const fs::path dir = temp_dir("sweep");
  ExperimentConfig cfg = small_run_config(dir.string());
  cfg.rounds = 3;
  REQUIRE(sweep(cfg, "defense", {"fedavg", "median", "vert"}) == 0);

  const fs::path root = dir / "sweep_defense";
  CHECK(fs::exists(root / "fedavg" / "summary.json"));
  CHECK(fs::exists(root / "median" / "summary.json"));
  CHECK(fs::exists(root / "vert" / "summary.json"));

  nlohmann::json index;
  std::ifstream(root / "index.json") >> index;
  CHECK(index["axis"] == "defense");
  CHECK(index["runs"].size() == 3);
  for (const auto& entry : index["runs"]) CHECK(entry["status"] == "ok");
}

TEST_CASE("sweep: failures are recorded and the sweep continues") {
  const fs::path dir = temp_dir("sweep_fail");
  ExperimentConfig cfg = small_run_config(dir.string());
  cfg.rounds = 3;
  CHECK(sweep(cfg, "pr", {"0.5", "1.5"}) != 0);  // 1.5 violates the bound
  nlohmann::json index;
  std::ifstream(dir / "sweep_pr" / "index.json") >> index;
  CHECK(index["runs"][0]["status"] == "ok");
  CHECK(index["runs"][1]["status"] == "failed");
}

TEST_CASE("sweep: empty value list is an error") {
  ExperimentConfig cfg = small_run_config("unused");
  CHECK(sweep(cfg, "pr", {}) != 0);
}

TEST_CASE("bench_scaling: rejects fewer than two sizes") {
  ExperimentConfig cfg;
  cfg.s = 4;
  CHECK_THROWS_AS(bench_scaling(cfg, {64}), std::invalid_argument);
}

TEST_CASE("bench_scaling: reports one point per size with linear state") {
  const fs::path dir = temp_dir("bench");
  ExperimentConfig cfg;
  cfg.seed = 3;
  cfg.m = 4;
  cfg.s = 8;
  cfg.vert_epochs = 2;
  cfg.out_dir = dir.string();
  const auto points = bench_scaling(cfg, {64, 128, 256}, /*users=*/3,
                                    /*rounds=*/2);
  REQUIRE(points.size() == 3);
  CHECK(points[0].d == 64);
  CHECK(points[2].state_elements - points[1].state_elements ==
        2 * (points[1].state_elements - points[0].state_elements));
  CHECK(fs::exists(dir / "bench.json"));
}

TEST_CASE("timings stay zero unless requested") {
  std::vector<RoundReport> reports(2);
  reports[0].t = 1;
  reports[0].times.round_ms = 12.5;
  reports[1].t = 2;
  reports[1].times.round_ms = 13.5;
  const auto quiet = to_metrics(reports, false);
  CHECK(quiet[0].round_ms == 0.0);
  const auto timed = to_metrics(reports, true);
  CHECK(timed[1].round_ms == 13.5);
}
