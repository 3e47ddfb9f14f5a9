#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chernoff/experiment.hpp"

using namespace chernoff;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<double> delta;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::size_t> workers;
  std::optional<std::string> env;
  std::vector<std::string> policies;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> hyp;
  std::vector<double> theta;
  std::optional<std::string> stopping;
  bool no_sparsify = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output path (stdout when omitted)");
  cmd->add_option("--format", f.format, "output format")->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--env", f.env, "environment name");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig build_config(const std::string& command, const Flags& f) {
  ExperimentConfig c = f.config.empty() ? default_config(command) : parse_config(command, read_file(f.config), f.config);
  if (f.env) {
    c.env = EnvSpec{};
    c.env.name = *f.env;
  }
  if (f.seed) c.seed = *f.seed;
  if (f.trials) c.trials = *f.trials;
  if (f.delta) c.delta = *f.delta;
  if (f.out) c.out = *f.out;
  if (f.format) c.format = *f.format == "csv" ? OutputFormat::csv : OutputFormat::json;
  if (f.workers) c.workers = *f.workers;
  if (!f.policies.empty()) c.policies = f.policies;
  if (f.horizon) c.horizon = *f.horizon;
  if (f.hyp) c.hyp = *f.hyp;
  if (!f.theta.empty()) c.theta = f.theta;
  if (f.stopping) {
    if (*f.stopping == "gaussian") c.stopping = StopVariant::gaussian;
    else if (*f.stopping == "sub_gaussian") c.stopping = StopVariant::sub_gaussian;
    else throw ConfigError("--stopping: expected 'gaussian' or 'sub_gaussian'");
  }
  if (f.no_sparsify) c.sparsify = false;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chernoff sampling simulator for active testing and active regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);
  Flags f;

  CLI::App* test = app.add_subcommand("test", "run sequential testing trials");
  add_common(test, f);
  test->add_option("--trials", f.trials, "trials per policy");
  test->add_option("--delta", f.delta, "confidence parameter");
  test->add_option("--workers", f.workers, "worker threads");
  test->add_option("--policy", f.policies, "policy (repeatable): cs, top2, eps_cs, uniform, batch_cs(B)");
  test->add_option("--stopping", f.stopping, "gaussian or sub_gaussian");

  CLI::App* regress = app.add_subcommand("regress", "run active regression trials");
  add_common(regress, f);
  regress->add_option("--trials", f.trials, "trials per policy");
  regress->add_option("--workers", f.workers, "worker threads");
  regress->add_option("--policy", f.policies, "policy (repeatable): cs, eps_cs, uniform");
  regress->add_option("--horizon", f.horizon, "rounds per trial");

  CLI::App* design = app.add_subcommand("design", "compute one sampling design");
  add_common(design, f);
  design->add_option("--hyp", f.hyp, "hypothesis to verify (finite environments)");
  design->add_option("--theta", f.theta, "parameter vector (regression environments)");
  design->add_flag("--no-sparsify", f.no_sparsify, "keep the raw solver output");

  CLI::App* diagnose = app.add_subcommand("diagnose", "report problem constants");
  add_common(diagnose, f);
  diagnose->add_option("--delta", f.delta, "confidence parameter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const ExperimentConfig config = build_config(command, f);
    const std::string text = render(run_command(config), config.format);
    if (config.out.empty()) {
      std::cout << text;
      std::cout.flush();
      if (!std::cout) throw IoError("failed writing to stdout");
    } else {
      write_output(config.out, text);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
