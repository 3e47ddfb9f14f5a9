#include "chernoff/envs.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace chernoff {

namespace {

// Draws `count` distinct values in (0, width).
std::vector<double> distinct_perturbations(Rng& rng, std::size_t count, double width) {
  std::set<double> seen;
  std::vector<double> out;
  out.reserve(count);
  while (out.size() < count) {
    const double v = width * uniform01(rng);
    if (v <= 0.0 || !seen.insert(v).second) continue;
    out.push_back(v);
  }
  return out;
}

void require_positive_eta0(const TestingEnv& env) {
  if (!(min_squared_gap(env.means) > 0.0)) {
    throw InvalidArgument(env.name + ": two hypotheses share a mean on some arm");
  }
}

}  // namespace

TestingEnv build_example1() {
  TestingEnv env;
  env.name = "example1";
  env.means = MeansTable::from_rows({{1.0, 0.001, 0.0}, {1.0, 1.002, 0.998}});
  env.noise = NoiseSpec::gaussian();
  env.true_hyp = 0;
  require_positive_eta0(env);
  return env;
}

TestingEnv build_three_group(std::uint64_t seed) {
  constexpr std::size_t n = 50, J = 6;
  Rng rng(seed);
  std::vector<double> flat(n * J);
  for (std::size_t j = 0; j < J; ++j) flat[j] = j == 0 ? 3.0 : 0.0;
  for (std::size_t i = 1; i < 6; ++i) {
    for (std::size_t j = 0; j < J; ++j) flat[i * J + j] = i == j ? 3.0 : 2.0;
  }
  const auto iota = distinct_perturbations(rng, (n - 6) * J, 0.01);
  for (std::size_t k = 0; k < iota.size(); ++k) flat[6 * J + k] = 1.0 + iota[k];
  TestingEnv env;
  env.name = "three_group";
  env.means = MeansTable(n, J, std::move(flat));
  env.noise = NoiseSpec::gaussian();
  env.true_hyp = 0;
  // The first six rows repeat values across hypotheses, so eta0 is 0 here
  // and only the gaussian stopping rule applies.
  return env;
}

TestingEnv build_minimax(std::size_t hyp_count, std::size_t arm_count, double gamma,
                         std::uint64_t seed) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("minimax: gamma must be > 0");
  if (hyp_count < 2) throw InvalidArgument("minimax: need at least two hypotheses");
  const std::size_t n = arm_count == 0 ? hyp_count : arm_count;
  const std::size_t J = hyp_count;
  Rng rng(seed);
  std::vector<double> flat(n * J);
  for (std::size_t j = 0; j < J; ++j) {
    flat[j] = gamma * (1.0 - static_cast<double>(j) / static_cast<double>(J));
  }
  const auto eps = distinct_perturbations(rng, (n - 1) * J, gamma / (4.0 * static_cast<double>(J)));
  std::copy(eps.begin(), eps.end(), flat.begin() + static_cast<std::ptrdiff_t>(J));
  TestingEnv env;
  env.name = "minimax";
  env.means = MeansTable(n, J, std::move(flat));
  env.noise = NoiseSpec::gaussian();
  env.true_hyp = 0;
  require_positive_eta0(env);
  return env;
}

RegressionEnv build_logistic_groups(std::uint64_t seed) {
  constexpr Eigen::Index n = 50;
  Rng rng(seed);
  Eigen::MatrixXd x(n, 2);
  x.row(0) << 1.0, 0.0;
  x.row(1) << 0.0, 1.0;
  const auto iota = distinct_perturbations(rng, n - 2, 0.05);
  for (Eigen::Index i = 2; i < n; ++i) {
    const double s = (i % 2 == 0) ? 1.0 : -1.0;
    const double e = iota[static_cast<std::size_t>(i - 2)];
    x.row(i) << 0.71 + s * e, 0.71 - s * e;
  }
  RegressionEnv env;
  env.name = "logistic_groups";
  env.model = ParamModel::logistic(std::move(x));
  env.theta_star = Eigen::Vector2d(1.0, 0.0);
  env.noise = NoiseSpec::gaussian();
  // Per-arm averages outside (0, 1) push the unconstrained minimizer to
  // infinity; a bounded parameter set keeps the estimate defined.
  env.theta_bound = 10.0;
  return env;
}

RegressionEnv build_relu_net(std::uint64_t seed, std::size_t n_points) {
  if (n_points < 10) throw InvalidArgument("relu_net: need at least 10 points");
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(n_points);
  Eigen::MatrixXd x(n, 2);
  // Uneven two-cluster cloud: 70% around (-1, 0.5), 30% around (1.2, -0.8).
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool first = uniform01(rng) < 0.7;
    const double cx = first ? -1.0 : 1.2;
    const double cy = first ? 0.5 : -0.8;
    const double sd = first ? 0.6 : 0.4;
    const double a = cx + sd * standard_normal(rng);
    const double b = cy + sd * standard_normal(rng);
    x.row(i) << a, b;
  }
  ParamModel model = ParamModel::relu_net(x);
  // Both units must be active on a fair share of the cloud, else their
  // parameters are not identifiable from the data.
  Eigen::VectorXd theta(8);
  for (;;) {
    for (Eigen::Index k = 0; k < 6; ++k) theta(k) = standard_normal(rng);
    theta(6) = uniform01(rng) < 0.5 ? 1.0 : -1.0;
    theta(7) = uniform01(rng) < 0.5 ? 1.0 : -1.0;
    Eigen::Index on1 = 0, on2 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      on1 += theta(0) * x(i, 0) + theta(1) * x(i, 1) + theta(2) > 0.0;
      on2 += theta(3) * x(i, 0) + theta(4) * x(i, 1) + theta(5) > 0.0;
    }
    const Eigen::Index lo = n / 5, hi = n - n / 5;
    if (on1 >= lo && on1 <= hi && on2 >= lo && on2 <= hi) break;
  }
  RegressionEnv env;
  env.name = "relu_net";
  env.model = std::move(model);
  env.theta_star = theta;
  env.noise = NoiseSpec::gaussian();
  return env;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "N/A" || s == "NaN" || s == "nan" || s == "?";
}

std::size_t resolve_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  std::size_t idx = 0;
  const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), idx);
  if (!name.empty() && ec == std::errc() && ptr == name.data() + name.size() && idx < header.size()) {
    return idx;
  }
  throw InvalidArgument("csv: no column named '" + name + "'");
}

}  // namespace

RegressionEnv ingest_csv(const DatasetSpec& spec, IngestInfo* info) {
  std::ifstream in(spec.path);
  if (!in) throw IoError("cannot open '" + spec.path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("csv '" + spec.path + "': missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  const std::size_t target = resolve_column(header, spec.target_column);
  std::vector<std::size_t> feats;
  if (spec.feature_columns.empty()) {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (k != target) feats.push_back(k);
    }
  } else {
    for (const auto& f : spec.feature_columns) feats.push_back(resolve_column(header, f));
  }
  if (feats.empty()) throw InvalidArgument("csv: no feature columns");
  if (!(spec.noise_std >= 0.0)) throw InvalidArgument("csv: noise_std must be >= 0");

  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t read = 0, dropped = 0, lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    ++read;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw InvalidArgument("csv line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    }
    std::vector<double> row(feats.size(), 0.0);
    bool missing = false;
    auto parse = [&](std::size_t col, double& out) {
      const std::string s = trim(cells[col]);
      if (is_missing(s)) {
        missing = true;
        return;
      }
      const char* b = s.data();
      const char* e = s.data() + s.size();
      if (*b == '+') ++b;
      const auto [ptr, ec] = std::from_chars(b, e, out);
      if (ec != std::errc() || ptr != e || !std::isfinite(out)) {
        throw InvalidArgument("csv line " + std::to_string(lineno) + ", column '" + header[col] +
                              "': not a number: '" + s + "'");
      }
    };
    for (std::size_t k = 0; k < feats.size(); ++k) parse(feats[k], row[k]);
    double y = 0.0;
    parse(target, y);
    if (missing) {
      ++dropped;
      continue;
    }
    xs.insert(xs.end(), row.begin(), row.end());
    ys.push_back(y);
  }
  if (in.bad()) throw IoError("error reading '" + spec.path + "'");

  const auto d = static_cast<Eigen::Index>(feats.size());
  const auto n = static_cast<Eigen::Index>(ys.size());
  if (n < d || n == 0) {
    throw InvalidArgument("csv: " + std::to_string(n) + " usable rows for " + std::to_string(d) + " features");
  }
  Eigen::MatrixXd x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      xs.data(), n, d);
  const Eigen::Map<Eigen::VectorXd> y(ys.data(), n);
  if (spec.normalize == Normalize::standardize) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const double mu = x.col(c).mean();
      x.col(c).array() -= mu;
      const double sd = std::sqrt(x.col(c).squaredNorm() / static_cast<double>(n));
      if (sd > 0.0) x.col(c) /= sd;
    }
  }

  RegressionEnv env;
  env.name = "csv";
  env.theta_star = x.completeOrthogonalDecomposition().solve(y);
  env.model = ParamModel::linear(std::move(x));
  env.noise = NoiseSpec::gaussian(spec.noise_std);
  if (info) {
    info->rows_read = read;
    info->rows_dropped = dropped;
    info->target_name = header[target];
    info->feature_names.clear();
    for (std::size_t k : feats) info->feature_names.push_back(header[k]);
  }
  return env;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void write_csv(const std::string& path, const std::vector<std::string>& feature_names,
               const Eigen::MatrixXd& features, const std::string& target_name,
               const Eigen::VectorXd& target) {
  if (static_cast<Eigen::Index>(feature_names.size()) != features.cols() ||
      target.size() != features.rows()) {
    throw InvalidArgument("write_csv: dimension mismatch");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& name : feature_names) out << name << ',';
  out << target_name << '\n';
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) out << format_double(features(i, c)) << ',';
    out << format_double(target(i)) << '\n';
  }
  if (!out) throw IoError("error writing '" + path + "'");
}

}  // namespace chernoff
