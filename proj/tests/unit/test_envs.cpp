#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "chernoff/envs.hpp"

using namespace chernoff;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("chernoff_" + name)).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

// Plain evaluation of the two-unit network.
double relu_reference(const Eigen::VectorXd& th, double a, double b) {
  const double h1 = std::max(0.0, th(0) * a + th(1) * b + th(2));
  const double h2 = std::max(0.0, th(3) * a + th(4) * b + th(5));
  return th(6) * h1 + th(7) * h2;
}

// Synthetic linear dataset y = X beta (+ noise).
void synthetic_dataset(std::size_t rows, std::size_t d, std::uint64_t seed, double noise,
                       Eigen::MatrixXd& x, Eigen::VectorXd& beta, Eigen::VectorXd& y) {
  Rng rng(seed);
  x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  beta.resize(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < beta.size(); ++k) beta(k) = standard_normal(rng);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) x(i, k) = standard_normal(rng);
  }
  y = x * beta;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise * standard_normal(rng);
}

std::vector<std::string> names(std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < d; ++k) out.push_back("x" + std::to_string(k));
  return out;
}

}  // namespace

TEST_CASE("example 1 table") {
  const TestingEnv env = build_example1();
  CHECK(env.means.arm_count() == 2);
  CHECK(env.means.hyp_count() == 3);
  CHECK(env.means.rows()[0] == std::vector<double>{1.0, 0.001, 0.0});
  CHECK(env.means.rows()[1] == std::vector<double>{1.0, 1.002, 0.998});
  CHECK(env.true_hyp == 0);
}

TEST_CASE("three group table") {
  const TestingEnv env = build_three_group(12);
  CHECK(env.means.arm_count() == 50);
  CHECK(env.means.hyp_count() == 6);
  CHECK(env.means.rows()[0] == std::vector<double>{3, 0, 0, 0, 0, 0});
  for (std::size_t j = 0; j < 6; ++j) CHECK(env.means(3, j) == (j == 3 ? 3.0 : 2.0));
  std::set<double> iota;
  for (std::size_t i = 6; i < 50; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      const double e = env.means(i, j) - 1.0;
      CHECK(e > 0.0);
      CHECK(e < 0.01);
      iota.insert(env.means(i, j));
    }
  }
  CHECK(iota.size() == 44 * 6);
  CHECK(build_three_group(12).means.data() == env.means.data());
  CHECK(build_three_group(13).means.data() != env.means.data());
}

TEST_CASE("minimax table") {
  const TestingEnv env = build_minimax(4, 0, 1.0, 3);
  CHECK(env.means.arm_count() == 4);
  CHECK(env.means.rows()[0] == std::vector<double>{1.0, 0.75, 0.5, 0.25});
  std::set<double> eps;
  for (std::size_t i = 1; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(env.means(i, j) > 0.0);
      CHECK(env.means(i, j) < 1.0 / 16.0);
      eps.insert(env.means(i, j));
    }
  }
  CHECK(eps.size() == 12);
  CHECK(min_squared_gap(env.means) > 0.0);
  CHECK(build_minimax(6, 10, 2.0, 1).means.arm_count() == 10);
  CHECK_THROWS_AS(build_minimax(4, 0, 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(build_minimax(4, 0, -1.0, 1), InvalidArgument);
}

TEST_CASE("logistic groups") {
  const RegressionEnv env = build_logistic_groups(4);
  const Eigen::MatrixXd& x = env.model.features();
  CHECK(x.rows() == 50);
  CHECK(x.cols() == 2);
  CHECK(x(0, 0) == 1.0);
  CHECK(x(0, 1) == 0.0);
  CHECK(x(1, 0) == 0.0);
  CHECK(x(1, 1) == 1.0);
  for (Eigen::Index i = 2; i < 50; ++i) {
    CHECK(std::abs(x(i, 0) + x(i, 1) - 1.42) < 1e-12);
    CHECK(std::abs(x(i, 0) - 0.71) < 0.05);
  }
  CHECK(env.model.mean(0, env.theta_star) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(env.model.mean(0, env.theta_star) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(env.theta_star.norm() == 1.0);
}

TEST_CASE("relu network environment") {
  const RegressionEnv env = build_relu_net(21, 200);
  const Eigen::VectorXd& th = env.theta_star;
  CHECK(th.size() == 8);
  CHECK(std::abs(th(6)) == 1.0);
  CHECK(std::abs(th(7)) == 1.0);
  const Eigen::MatrixXd& x = env.model.features();
  CHECK(x.rows() == 200);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    CHECK(std::abs(env.model.mean(static_cast<ArmIndex>(i), th) - relu_reference(th, x(i, 0), x(i, 1))) <= 1e-12);
  }
  // a point where both preactivations are negative
  Eigen::MatrixXd far(1, 2);
  Eigen::VectorXd t(8);
  t << 1.0, 0.0, -5.0, 0.0, 1.0, -5.0, 1.0, -1.0;
  far << 1.0, 1.0;
  CHECK(ParamModel::relu_net(far).mean(0, t) == 0.0);
  CHECK(build_relu_net(21, 200).theta_star == th);
  CHECK(build_relu_net(21, 200).model.features() == x);
  CHECK_THROWS_AS(build_relu_net(1, 9), InvalidArgument);
}

TEST_CASE("csv shapes") {
  struct Shape { std::size_t rows, d; };
  for (const Shape s : {Shape{1600, 11}, Shape{1500, 6}}) {
    Eigen::MatrixXd x;
    Eigen::VectorXd beta, y;
    synthetic_dataset(s.rows, s.d, s.rows, 0.3, x, beta, y);
    const std::string path = temp_path("shape.csv");
    write_csv(path, names(s.d), x, "quality", y);
    IngestInfo info;
    const RegressionEnv env = ingest_csv({path, "quality"}, &info);
    CHECK(env.model.arm_count() == s.rows);
    CHECK(env.model.dim() == s.d);
    CHECK(info.rows_read == s.rows);
    CHECK(info.rows_dropped == 0);
    CHECK(info.target_name == "quality");
    std::remove(path.c_str());
  }
}

TEST_CASE("csv ingestion recovers an exact linear target") {
  Eigen::MatrixXd x;
  Eigen::VectorXd beta, y;
  synthetic_dataset(200, 5, 9, 0.0, x, beta, y);
  const std::string path = temp_path("exact.csv");
  write_csv(path, names(5), x, "y", y);
  const RegressionEnv env = ingest_csv({path, "y"});
  CHECK((env.theta_star - beta).norm() <= 1e-8);
  CHECK(env.model.kind() == ModelKind::linear);
  CHECK(env.noise.variance() == doctest::Approx(0.5));

  // target by index, explicit feature subset
  DatasetSpec by_index{path, "5", {"x0", "x2"}};
  const RegressionEnv sub = ingest_csv(by_index);
  CHECK(sub.model.dim() == 2);
  std::remove(path.c_str());
}

TEST_CASE("csv missing values and errors") {
  const std::string path = temp_path("missing.csv");
  write_text(path, "\xEF\xBB\xBF" "a,\"b\",y\n1,2,3\n4,,6\n7,NA,9\n1,0,1\n0,1,2\n2,2,4\n");
  IngestInfo info;
  const RegressionEnv env = ingest_csv({path, "y"}, &info);
  CHECK(info.rows_read == 6);
  CHECK(info.rows_dropped == 2);
  CHECK(env.model.arm_count() == 4);
  CHECK(info.feature_names == std::vector<std::string>{"a", "b"});

  write_text(path, "a,y\n1,2\nfoo,3\n");
  CHECK_THROWS_AS(ingest_csv({path, "y"}), InvalidArgument);
  write_text(path, "a,b,y\n1,2,3\n");
  CHECK_THROWS_AS(ingest_csv({path, "y"}), InvalidArgument);  // n < d
  write_text(path, "a,y\n1,2\n3,4\n");
  CHECK_THROWS_AS(ingest_csv({path, "z"}), InvalidArgument);
  std::remove(path.c_str());
  CHECK_THROWS_AS(ingest_csv({temp_path("does_not_exist.csv"), "y"}), IoError);
}

TEST_CASE("csv standardization") {
  Eigen::MatrixXd x;
  Eigen::VectorXd beta, y;
  synthetic_dataset(300, 3, 5, 0.1, x, beta, y);
  x.col(1) = x.col(1) * 50.0 + Eigen::VectorXd::Constant(300, 7.0);
  const std::string path = temp_path("std.csv");
  write_csv(path, names(3), x, "y", y);
  DatasetSpec spec{path, "y"};
  spec.normalize = Normalize::standardize;
  const RegressionEnv env = ingest_csv(spec);
  const Eigen::MatrixXd& f = env.model.features();
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(std::abs(f.col(k).mean()) < 1e-12);
    const double var = (f.col(k).array() - f.col(k).mean()).square().sum() / 300.0;
    CHECK(var == doctest::Approx(1.0));
  }
  std::remove(path.c_str());
}

TEST_CASE("csv round trip is idempotent") {
  Eigen::MatrixXd x;
  Eigen::VectorXd beta, y;
  synthetic_dataset(120, 4, 17, 0.5, x, beta, y);
  const std::string a = temp_path("rt_a.csv"), b = temp_path("rt_b.csv");
  write_csv(a, names(4), x, "y", y);
  IngestInfo info;
  const RegressionEnv e1 = ingest_csv({a, "y"}, &info);
  write_csv(b, info.feature_names, e1.model.features(), "y", y);
  const RegressionEnv e2 = ingest_csv({b, "y"});
  CHECK(e1.model.features() == e2.model.features());
  CHECK(e1.theta_star == e2.theta_star);
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST_CASE("format_double round-trips") {
  Rng rng(2);
  for (int k = 0; k < 1000; ++k) {
    const double v = standard_normal(rng) * std::pow(10.0, static_cast<double>(k % 20) - 10.0);
    CHECK(std::stod(format_double(v)) == v);
  }
}
