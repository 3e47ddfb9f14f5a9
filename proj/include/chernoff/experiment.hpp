#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chernoff/core.hpp"
#include "chernoff/envs.hpp"
#include "chernoff/regression.hpp"
#include "chernoff/testing.hpp"
#include "json.hpp"

namespace chernoff {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Invalid experiment configuration. The message names the offending key and,
/// when it came from a file, its line.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class OutputFormat { json, csv };

/// Environment selector plus builder arguments.
struct EnvSpec {
  std::string name = "example1";
  std::uint64_t seed = 0;
  bool seed_set = false;
  // minimax
  std::size_t hyp_count = 4;
  std::size_t arm_count = 0;
  double gamma = 1.0;
  // relu_net
  std::size_t n_points = 100;
  // means (inline testing table)
  std::vector<std::vector<double>> rows;
  HypIndex true_hyp = 0;
  // linear (inline features) and csv
  std::vector<std::vector<double>> features;
  std::vector<double> theta_star;
  DatasetSpec dataset;
  double noise_std = 0.7071067811865476;
};

struct ExperimentConfig {
  std::string command;
  EnvSpec env;
  std::vector<std::string> policies;
  double delta = 0.1;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t horizon = 500;
  std::size_t workers = 1;
  OutputFormat format = OutputFormat::json;
  std::string out;
  StopVariant stopping = StopVariant::gaussian;
  std::optional<double> eta;
  std::uint64_t max_rounds = 10'000'000;
  /// Design refresh period for regression policies.
  std::size_t batch = 1;
  std::optional<HypIndex> hyp;
  std::vector<double> theta;
  bool sparsify = true;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// Parses a JSON config document for `command`. `source` names the file in
/// error messages.
ExperimentConfig parse_config(const std::string& command, const std::string& text,
                              const std::string& source = "config");
ExperimentConfig default_config(const std::string& command);

TestingEnv make_testing_env(const EnvSpec& spec);
RegressionEnv make_regression_env(const EnvSpec& spec);
bool is_testing_env(const std::string& name);

/// Tukey box statistics: hinges as quartiles, whiskers at the furthest
/// points within 1.5 IQR of them.
struct BoxStats {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::size_t outliers = 0;
};

BoxStats box_stats(std::vector<double> values);

/// Runs `count` independent tasks on up to `workers` threads. Each task
/// writes only its own slot, so results do not depend on scheduling.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task);

struct CommandOutput {
  nlohmann::ordered_json report;
  /// Tidy long-format rows (header included).
  std::string csv;
};

CommandOutput cmd_test(const ExperimentConfig& config);
CommandOutput cmd_regress(const ExperimentConfig& config);
CommandOutput cmd_design(const ExperimentConfig& config);
CommandOutput cmd_diagnose(const ExperimentConfig& config);
CommandOutput run_command(const ExperimentConfig& config);

/// Serializes in the configured format with a trailing newline.
std::string render(const CommandOutput& out, OutputFormat format);

/// Writes `text` to `path`. Throws IoError.
void write_output(const std::string& path, const std::string& text);

}  // namespace chernoff
