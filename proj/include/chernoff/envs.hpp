#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "chernoff/regression.hpp"
#include "chernoff/testing.hpp"

namespace chernoff {

/// Two arms, three hypotheses; the first arm separates the truth from both
/// alternatives, the second separates the alternatives from each other.
TestingEnv build_example1();

/// 50 arms x 6 hypotheses: one strongly informative arm, five arms each
/// singling out one hypothesis, and 44 nearly uninformative arms.
TestingEnv build_three_group(std::uint64_t seed);

/// One arm carries all the discrimination power (means gamma * (1 - j/J));
/// the other n - 1 arms hold distinct values below gamma / (4J).
/// n = 0 means n = J.
TestingEnv build_minimax(std::size_t hyp_count, std::size_t arm_count, double gamma,
                         std::uint64_t seed);

/// Logistic model on 50 features: (1,0), (0,1) and 48 perturbed diagonal
/// directions; theta* = (1, 0).
RegressionEnv build_logistic_groups(std::uint64_t seed);

/// Two-unit ReLU network over a two-cluster point cloud with a seeded theta*.
RegressionEnv build_relu_net(std::uint64_t seed, std::size_t n_points);

enum class Normalize { none, standardize };

struct DatasetSpec {
  std::string path;
  /// Column name, or a 0-based index when no column carries that name.
  std::string target_column;
  /// Empty selects every column except the target.
  std::vector<std::string> feature_columns;
  Normalize normalize = Normalize::none;
  double noise_std = 0.7071067811865476;
};

struct IngestInfo {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
  std::vector<std::string> feature_names;
  std::string target_name;
};

/// Linear model whose arms are the dataset rows; theta* is the OLS fit of
/// the target on the features. Throws IoError for unreadable files and
/// InvalidArgument for malformed content.
RegressionEnv ingest_csv(const DatasetSpec& spec, IngestInfo* info = nullptr);

/// Writes a header row and one line per row of `features`, followed by the
/// target column. Throws IoError on failure.
void write_csv(const std::string& path, const std::vector<std::string>& feature_names,
               const Eigen::MatrixXd& features, const std::string& target_name,
               const Eigen::VectorXd& target);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace chernoff
