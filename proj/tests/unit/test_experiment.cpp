#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "chernoff/experiment.hpp"

using namespace chernoff;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("chernoff_exp_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CHERNOFF_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error(const std::string& command, const std::string& text) {
  try {
    parse_config(command, text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("tukey box statistics") {
  const BoxStats a = box_stats({1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(a.median == 5.0);
  CHECK(a.q1 == 3.0);
  CHECK(a.q3 == 7.0);
  CHECK(a.mean == 5.0);
  CHECK(a.outliers == 0);

  const BoxStats b = box_stats({4, 1, 3, 2});
  CHECK(b.median == 2.5);
  CHECK(b.q1 == 1.5);
  CHECK(b.q3 == 3.5);

  const BoxStats c = box_stats({1, 2, 3, 4, 100});
  CHECK(c.q1 == 2.0);
  CHECK(c.q3 == 4.0);
  CHECK(c.outliers == 1);
  CHECK(c.whisker_high == 4.0);
  CHECK(c.whisker_low == 1.0);
  CHECK(c.max == 100.0);

  const BoxStats d = box_stats({7});
  CHECK(d.q1 == 7.0);
  CHECK(d.q3 == 7.0);
}

TEST_CASE("parallel_for visits every index once") {
  for (std::size_t workers : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), workers, [&](std::size_t k) { ++hits[k]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 4, [](std::size_t k) {
                    if (k == 5) throw IoError("boom");
                  }),
                  IoError);
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config("test",
                                         R"j({"env": {"name": "minimax", "J": 5, "gamma": 2.0, "seed": 3},
                                             "policies": ["cs", "batch_cs(4)"], "delta": 0.05, "trials": 7,
                                             "seed": 11, "workers": 2, "format": "csv"})j");
  CHECK(c.env.name == "minimax");
  CHECK(c.env.hyp_count == 5);
  CHECK(c.env.gamma == 2.0);
  CHECK(c.env.seed_set);
  CHECK(c.policies.size() == 2);
  CHECK(c.delta == 0.05);
  CHECK(c.trials == 7);
  CHECK(c.seed == 11);
  CHECK(c.workers == 2);
  CHECK(c.format == OutputFormat::csv);
  CHECK(parse_config("regress", R"({"env": "relu_net"})").env.name == "relu_net");
}

TEST_CASE("config errors name the line") {
  CHECK(config_error("test", "{\n  \"delta\": 0.1,\n  \"trials\": 0\n}") == "cfg.json:3: 'trials': must be >= 1");
  CHECK(config_error("test", "{\n  \"delta\": 3\n}") == "cfg.json:2: 'delta': must lie in (0, 1)");
  CHECK(config_error("test", "{\n\n  \"colour\": 1\n}") == "cfg.json:3: 'colour': unknown key in config");
  CHECK(config_error("test", "{\n  \"policies\": [\"cs\",\n  \"best\"]\n}").rfind("cfg.json:2: 'policies'", 0) == 0);
  CHECK(config_error("test", "{\n  \"trials\": 5,\n  ]").rfind("cfg.json:3: malformed JSON", 0) == 0);
  CHECK(config_error("test", "{\"env\": \"relu_net\"}").find("needs a finite testing environment") != std::string::npos);
  CHECK(config_error("regress", "{\"env\": \"example1\"}").find("needs a regression environment") != std::string::npos);
  CHECK(config_error("test", "{\"env\": {\"name\": \"nowhere\"}}").find("unknown environment") != std::string::npos);
  CHECK(config_error("test", "{\"trials\": \"many\"}") == "cfg.json:1: 'trials': expected a non-negative integer");
}

TEST_CASE("test report") {
  ExperimentConfig c = default_config("test");
  c.trials = 30;
  c.seed = 4;
  c.policies = {"cs", "uniform"};
  const CommandOutput out = cmd_test(c);
  const auto& r = out.report;
  CHECK(r["command"] == "test");
  CHECK(r["artifact"]["version"] == kArtifactVersion);
  CHECK(r["policies"].size() == 2);
  for (const auto& p : r["policies"]) {
    const auto& b = p["stopping_time"];
    CHECK(b["q1"].get<double>() <= b["median"].get<double>());
    CHECK(b["median"].get<double>() <= b["q3"].get<double>());
    CHECK(p["error_rate"].get<double>() >= 0.0);
    CHECK(p["error_rate"].get<double>() <= 1.0);
    CHECK(p["stopping_times"].size() == 30);
  }
  CHECK(r["stopping_rule"]["beta"].get<double>() == doctest::Approx(std::log(30.0)));
  CHECK(r["constants"]["d0"].get<double>() == doctest::Approx(0.998001));
  // header plus three rows per trial
  CHECK(std::count(out.csv.begin(), out.csv.end(), '\n') == 1 + 2 * 30 * 3);
}

TEST_CASE("reports do not depend on the worker count") {
  ExperimentConfig c = default_config("test");
  c.env.name = "three_group";
  c.trials = 40;
  c.seed = 9;
  const std::string one = render(cmd_test(c), OutputFormat::json);
  c.workers = 4;
  CHECK(render(cmd_test(c), OutputFormat::json) == one);
  CHECK(render(cmd_test(c), OutputFormat::json) == one);

  ExperimentConfig g = default_config("regress");
  g.trials = 4;
  g.horizon = 60;
  const std::string r1 = render(cmd_regress(g), OutputFormat::csv);
  g.workers = 4;
  CHECK(render(cmd_regress(g), OutputFormat::csv) == r1);
}

TEST_CASE("regress report") {
  ExperimentConfig g = default_config("regress");
  g.trials = 5;
  g.horizon = 80;
  g.policies = {"cs", "uniform"};
  const auto r = cmd_regress(g).report;
  CHECK(r["checkpoints"].back() == 80);
  for (const auto& p : r["policies"]) {
    CHECK(p["curves"].size() == r["checkpoints"].size());
    CHECK(p["min_pt_gap"].get<double>() >= -1e-9);
    for (const auto& pt : p["curves"]) {
      CHECK(pt["est_err"]["q1"].get<double>() <= pt["est_err"]["median"].get<double>());
      CHECK(pt.contains("support_size"));
    }
  }
  g.horizon = 1;
  CHECK_THROWS_AS(cmd_regress(g), ConfigError);
}

TEST_CASE("design command") {
  ExperimentConfig c = default_config("design");
  c.hyp = 0;
  auto d = cmd_design(c).report["design"];
  CHECK(d["kind"] == "verification_lp");
  CHECK(d["probs"][0].get<double>() == doctest::Approx(1.0));

  c.env.name = "linear";
  c.env.features = {{1.0, 0.0}, {0.0, 1.0}};
  c.env.theta_star = {0.2, 0.4};
  c.hyp.reset();
  d = cmd_design(c).report["design"];
  CHECK(d["kind"] == "min_eigenvalue");
  CHECK(d["probs"][0].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(d["probs"][1].get<double>() == doctest::Approx(0.5).epsilon(1e-6));

  c.env = EnvSpec{};
  c.env.name = "logistic_groups";
  d = cmd_design(c).report["design"];
  std::vector<double> p = d["probs"].get<std::vector<double>>();
  std::sort(p.rbegin(), p.rend());
  CHECK(p[0] + p[1] + p[2] >= 0.9);
  CHECK(d["support_size"].get<std::size_t>() <= 3);

  c.env.name = "example1";
  c.hyp = 7;
  CHECK_THROWS_AS(cmd_design(c), ConfigError);
}

TEST_CASE("diagnose command") {
  ExperimentConfig c = default_config("diagnose");
  c.env.name = "minimax";
  c.env.hyp_count = 4;
  const auto k = cmd_diagnose(c).report["constants"];
  CHECK(k["d0"].get<double>() == doctest::Approx(1.0 / 16.0));
  CHECK_FALSE(k["eta0_zero"].get<bool>());

  c.env = EnvSpec{};
  c.env.name = "means";
  c.env.rows = {{1.0, 0.0, 0.0}, {0.0, 1.0, 1.0}};
  c.env.true_hyp = 1;
  const auto z = cmd_diagnose(c).report["constants"];
  CHECK(z["eta0_zero"].get<bool>());
  CHECK(z["predicted_terms"]["exploration"].is_null());
}

TEST_CASE("cli exit codes and output") {
  const std::string out = temp_path("cli.json");
  CHECK(run_cli("test --trials 3 --seed 2 --out " + out) == 0);
  const std::string first = slurp(out);
  CHECK(run_cli("test --trials 3 --seed 2 --workers 4 --out " + out) == 0);
  CHECK(slurp(out) == first);
  CHECK(run_cli("test --delta 1.5") == 2);
  CHECK(run_cli("test --trials 0") == 2);
  CHECK(run_cli("test --format yaml") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("test --config " + temp_path("missing.json")) == 3);
  CHECK(run_cli("test --trials 2 --out /nonexistent_dir/x/y.json") == 3);
  const std::string bad = temp_path("bad.json");
  std::ofstream(bad) << "{\"trials\": -1}";
  CHECK(run_cli("test --config " + bad) == 2);
  CHECK(run_cli("diagnose --env example1 --format csv --out " + out) == 0);
  CHECK(slurp(out).rfind("name,value\n", 0) == 0);
  std::remove(out.c_str());
  std::remove(bad.c_str());
}
