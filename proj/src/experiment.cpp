#include "chernoff/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "chernoff/diagnostics.hpp"

namespace chernoff {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::set<std::string> kTestingEnvs{"example1", "three_group", "minimax", "means"};
const std::set<std::string> kRegressionEnvs{"logistic_groups", "relu_net", "linear", "csv"};
const std::set<std::string> kCommands{"test", "regress", "design", "diagnose"};

// Locates keys in the raw config text so errors can point at a line.
class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::string where = source_;
    const std::size_t pos = key.empty() ? std::string::npos : text_.find("\"" + key + "\"");
    if (pos != std::string::npos) where += ":" + std::to_string(line_at(pos));
    throw ConfigError(where + ": " + (key.empty() ? "" : "'" + key + "': ") + msg);
  }

  [[noreturn]] void fail_at(std::size_t byte, const std::string& msg) const {
    throw ConfigError(source_ + ":" + std::to_string(line_at(byte)) + ": " + msg);
  }

  template <class T>
  T get(const json& obj, const std::string& key) const {
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, std::string("expected ") + type_name<T>());
    }
  }

  void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) const {
    if (!obj.is_object()) fail(where, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      if (!allowed.count(k)) fail(k, "unknown key in " + where);
    }
  }

 private:
  std::size_t line_at(std::size_t byte) const {
    byte = std::min(byte, text_.size());
    return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
  }

  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_integral_v<T>) return "a non-negative integer";
    else return "an array of numbers";
  }

  const std::string& text_;
  std::string source_;
};

std::uint64_t non_negative(const ConfigReader& r, const json& obj, const std::string& key) {
  const json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    r.fail(key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

void parse_env(const ConfigReader& r, const json& e, EnvSpec& env) {
  r.only_keys(e, {"name", "seed", "J", "n", "gamma", "n_points", "rows", "true_hyp", "features",
                  "theta_star", "path", "target", "columns", "normalize", "noise_std"},
              "env");
  if (e.contains("name")) env.name = r.get<std::string>(e, "name");
  if (!kTestingEnvs.count(env.name) && !kRegressionEnvs.count(env.name)) r.fail("name", "unknown environment '" + env.name + "'");
  if (e.contains("seed")) {
    env.seed = non_negative(r, e, "seed");
    env.seed_set = true;
  }
  if (e.contains("J")) env.hyp_count = non_negative(r, e, "J");
  if (e.contains("n")) env.arm_count = non_negative(r, e, "n");
  if (e.contains("gamma")) env.gamma = r.get<double>(e, "gamma");
  if (e.contains("n_points")) env.n_points = non_negative(r, e, "n_points");
  if (e.contains("rows")) env.rows = r.get<std::vector<std::vector<double>>>(e, "rows");
  if (e.contains("true_hyp")) env.true_hyp = non_negative(r, e, "true_hyp");
  if (e.contains("features")) env.features = r.get<std::vector<std::vector<double>>>(e, "features");
  if (e.contains("theta_star")) env.theta_star = r.get<std::vector<double>>(e, "theta_star");
  if (e.contains("path")) env.dataset.path = r.get<std::string>(e, "path");
  if (e.contains("target")) {
    const json& t = e.at("target");
    if (t.is_string()) env.dataset.target_column = t.get<std::string>();
    else if (t.is_number_unsigned()) env.dataset.target_column = std::to_string(t.get<std::uint64_t>());
    else r.fail("target", "expected a column name or index");
  }
  if (e.contains("columns")) env.dataset.feature_columns = r.get<std::vector<std::string>>(e, "columns");
  if (e.contains("normalize")) {
    const auto v = r.get<std::string>(e, "normalize");
    if (v == "none") env.dataset.normalize = Normalize::none;
    else if (v == "standardize") env.dataset.normalize = Normalize::standardize;
    else r.fail("normalize", "expected 'none' or 'standardize'");
  }
  if (e.contains("noise_std")) {
    env.noise_std = r.get<double>(e, "noise_std");
    env.dataset.noise_std = env.noise_std;
  }
}

ordered_json env_to_json(const EnvSpec& e) {
  ordered_json j;
  j["name"] = e.name;
  if (e.seed_set) j["seed"] = e.seed;
  if (e.name == "minimax") {
    j["J"] = e.hyp_count;
    j["n"] = e.arm_count;
    j["gamma"] = e.gamma;
  }
  if (e.name == "relu_net") j["n_points"] = e.n_points;
  if (e.name == "means") {
    j["rows"] = e.rows;
    j["true_hyp"] = e.true_hyp;
  }
  if (e.name == "linear") {
    j["features"] = e.features;
    j["theta_star"] = e.theta_star;
  }
  if (e.name == "csv") {
    j["path"] = e.dataset.path;
    j["target"] = e.dataset.target_column;
    j["columns"] = e.dataset.feature_columns;
    j["normalize"] = e.dataset.normalize == Normalize::standardize ? "standardize" : "none";
  }
  if (e.name == "means" || e.name == "linear" || e.name == "csv") j["noise_std"] = e.noise_std;
  return j;
}

std::uint64_t env_seed(const EnvSpec& spec, std::uint64_t master) {
  return spec.seed_set ? spec.seed : derive_seed(master, "env", 0);
}

double quantile_sorted(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  // median of v[lo, hi)
  const std::size_t n = hi - lo;
  const std::size_t m = lo + n / 2;
  return n % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

ordered_json box_json(const BoxStats& b) {
  ordered_json j;
  j["count"] = b.count;
  j["mean"] = b.mean;
  j["min"] = b.min;
  j["q1"] = b.q1;
  j["median"] = b.median;
  j["q3"] = b.q3;
  j["max"] = b.max;
  j["whisker_low"] = b.whisker_low;
  j["whisker_high"] = b.whisker_high;
  j["outliers"] = b.outliers;
  return j;
}

ordered_json quartiles_json(const BoxStats& b) {
  ordered_json j;
  j["q1"] = b.q1;
  j["median"] = b.median;
  j["q3"] = b.q3;
  return j;
}

// Numbers that may be infinite are written as null.
ordered_json finite_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json header(const ExperimentConfig& c) {
  ordered_json j;
  j["artifact"] = {{"name", "chernoff"}, {"version", kArtifactVersion}};
  j["command"] = c.command;
  j["config"] = c.to_json();
  return j;
}

ordered_json constants_json(const MeansTable& means, HypIndex truth, double delta) {
  const ProblemConstants c = compute_constants(means, truth);
  const PredictedTerms t = predicted_terms(c, means.hyp_count(), delta);
  ordered_json j;
  j["d0"] = c.d0;
  j["d1"] = c.d1;
  j["de"] = c.de;
  j["dnj"] = c.dnj;
  j["eta0"] = c.eta0;
  j["eta0_zero"] = c.eta0_zero;
  j["d1_argmin"] = c.d1_argmin;
  j["ordering_holds"] = c.ordering_holds;
  j["dnj_note"] = "computed from the literal two-phase formula; reported only";
  j["per_hyp_objectives"] = c.per_hyp_objectives;
  ordered_json designs = ordered_json::array();
  for (const Design& p : c.per_hyp_designs) designs.push_back(p.probs);
  j["per_hyp_designs"] = designs;
  ordered_json pt;
  pt["delta"] = delta;
  pt["exploration"] = finite_or_null(t.exploration);
  pt["exploitation"] = finite_or_null(t.exploitation);
  pt["uniform"] = finite_or_null(t.uniform);
  pt["infinite"] = t.infinite;
  pt["formulas"] = {{"exploration", "log(J) / d1"},
                    {"exploitation", "log(J / delta) / d0"},
                    {"uniform", "log(J) / de"}};
  pt["note"] = "scaling terms without constant factors, not bounds";
  j["predicted_terms"] = pt;
  return j;
}

ordered_json testing_env_json(const TestingEnv& env) {
  ordered_json j;
  j["name"] = env.name;
  j["arms"] = env.means.arm_count();
  j["hypotheses"] = env.means.hyp_count();
  j["true_hyp"] = env.true_hyp;
  return j;
}

ordered_json regression_env_json(const RegressionEnv& env) {
  ordered_json j;
  j["name"] = env.name;
  j["model"] = model_kind_name(env.model.kind());
  j["arms"] = env.model.arm_count();
  j["dim"] = env.model.dim();
  j["theta_star"] = std::vector<double>(env.theta_star.data(), env.theta_star.data() + env.theta_star.size());
  j["theta_bound"] = env.theta_bound;
  return j;
}

std::string csv_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

struct CsvWriter {
  std::ostringstream out;
  CsvWriter() { out << "policy,trial,metric,checkpoint,value\n"; }
  void row(const std::string& policy, std::size_t trial, const char* metric, std::optional<std::size_t> checkpoint,
           double value) {
    out << policy << ',' << trial << ',' << metric << ',';
    if (checkpoint) out << *checkpoint;
    out << ',' << csv_value(value) << '\n';
  }
};

std::vector<std::string> test_policies(const ExperimentConfig& c) {
  if (!c.policies.empty()) return c.policies;
  return {"cs", "top2", "eps_cs", "uniform", "batch_cs(10)"};
}

std::vector<std::string> regress_policies(const ExperimentConfig& c) {
  if (!c.policies.empty()) return c.policies;
  return {"cs", "eps_cs", "uniform"};
}

}  // namespace

bool is_testing_env(const std::string& name) { return kTestingEnvs.count(name) > 0; }

void ExperimentConfig::validate() const {
  if (!kCommands.count(command)) throw ConfigError("unknown command '" + command + "'");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("'delta' must lie in (0, 1)");
  if (trials < 1) throw ConfigError("'trials' must be >= 1");
  if (workers < 1) throw ConfigError("'workers' must be >= 1");
  if (max_rounds < 1) throw ConfigError("'max_rounds' must be >= 1");
  if (batch < 1) throw ConfigError("'batch' must be >= 1");
  const bool testing = is_testing_env(env.name);
  if (!testing && !kRegressionEnvs.count(env.name)) throw ConfigError("unknown environment '" + env.name + "'");
  if ((command == "test" || command == "diagnose") && !testing) {
    throw ConfigError("command '" + command + "' needs a finite testing environment, got '" + env.name + "'");
  }
  if (command == "regress" && testing) {
    throw ConfigError("command 'regress' needs a regression environment, got '" + env.name + "'");
  }
  if (command == "test") {
    for (const auto& p : policies) {
      try {
        parse_policy(p);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("'policies': ") + e.what());
      }
    }
  }
  if (command == "regress") {
    for (const auto& p : policies) {
      try {
        parse_regression_policy(p);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("'policies': ") + e.what());
      }
    }
    if (horizon < 1) throw ConfigError("'horizon' must be >= 1");
  }
  if (eta && !(*eta > 0.0)) throw ConfigError("'eta' must be > 0");
  if (!(env.noise_std >= 0.0)) throw ConfigError("'noise_std' must be >= 0");
  if (env.name == "minimax" && !(env.gamma > 0.0)) throw ConfigError("'gamma' must be > 0");
  if (env.name == "means" && env.rows.empty()) throw ConfigError("env 'means' needs 'rows'");
  if (env.name == "linear" && (env.features.empty() || env.theta_star.empty())) {
    throw ConfigError("env 'linear' needs 'features' and 'theta_star'");
  }
  if (env.name == "csv" && (env.dataset.path.empty() || env.dataset.target_column.empty())) {
    throw ConfigError("env 'csv' needs 'path' and 'target'");
  }
}

ordered_json ExperimentConfig::to_json() const {
  // workers, out and format never change the numbers, so they are not echoed.
  ordered_json j;
  j["env"] = env_to_json(env);
  j["seed"] = seed;
  if (command == "test" || command == "diagnose") j["delta"] = delta;
  if (command == "test") {
    j["policies"] = test_policies(*this);
    j["trials"] = trials;
    j["stopping"] = stopping == StopVariant::gaussian ? "gaussian" : "sub_gaussian";
    if (eta) j["eta"] = *eta;
    j["max_rounds"] = max_rounds;
  }
  if (command == "regress") {
    j["policies"] = regress_policies(*this);
    j["trials"] = trials;
    j["horizon"] = horizon;
    j["batch"] = batch;
  }
  if (command == "design") {
    if (hyp) j["hyp"] = *hyp;
    if (!theta.empty()) j["theta"] = theta;
    j["sparsify"] = sparsify;
  }
  return j;
}

ExperimentConfig default_config(const std::string& command) {
  ExperimentConfig c;
  c.command = command;
  if (command == "regress") c.env.name = "logistic_groups";
  return c;
}

ExperimentConfig parse_config(const std::string& command, const std::string& text, const std::string& source) {
  const ConfigReader r(text, source);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    r.fail_at(e.byte == 0 ? 0 : e.byte - 1, std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c = default_config(command);
  r.only_keys(doc, {"env", "policies", "delta", "trials", "seed", "horizon", "workers", "format", "out",
                    "stopping", "eta", "max_rounds", "batch", "hyp", "theta", "sparsify"},
              "config");
  if (doc.contains("env")) {
    const json& e = doc.at("env");
    if (e.is_string()) c.env.name = e.get<std::string>();
    else parse_env(r, e, c.env);
    if (!kTestingEnvs.count(c.env.name) && !kRegressionEnvs.count(c.env.name)) {
      r.fail("env", "unknown environment '" + c.env.name + "'");
    }
  }
  if (doc.contains("policies")) c.policies = r.get<std::vector<std::string>>(doc, "policies");
  if (doc.contains("delta")) c.delta = r.get<double>(doc, "delta");
  if (doc.contains("trials")) c.trials = non_negative(r, doc, "trials");
  if (doc.contains("seed")) c.seed = non_negative(r, doc, "seed");
  if (doc.contains("horizon")) c.horizon = non_negative(r, doc, "horizon");
  if (doc.contains("workers")) c.workers = non_negative(r, doc, "workers");
  if (doc.contains("format")) {
    const auto f = r.get<std::string>(doc, "format");
    if (f == "json") c.format = OutputFormat::json;
    else if (f == "csv") c.format = OutputFormat::csv;
    else r.fail("format", "expected 'json' or 'csv'");
  }
  if (doc.contains("out")) c.out = r.get<std::string>(doc, "out");
  if (doc.contains("stopping")) {
    const auto s = r.get<std::string>(doc, "stopping");
    if (s == "gaussian") c.stopping = StopVariant::gaussian;
    else if (s == "sub_gaussian") c.stopping = StopVariant::sub_gaussian;
    else r.fail("stopping", "expected 'gaussian' or 'sub_gaussian'");
  }
  if (doc.contains("eta")) c.eta = r.get<double>(doc, "eta");
  if (doc.contains("max_rounds")) c.max_rounds = non_negative(r, doc, "max_rounds");
  if (doc.contains("batch")) c.batch = non_negative(r, doc, "batch");
  if (doc.contains("hyp")) c.hyp = non_negative(r, doc, "hyp");
  if (doc.contains("theta")) c.theta = r.get<std::vector<double>>(doc, "theta");
  if (doc.contains("sparsify")) c.sparsify = r.get<bool>(doc, "sparsify");

  // Re-run the semantic checks so their messages carry the key's line.
  try {
    c.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.size() > 2 && msg[0] == '\'') {
      const std::size_t close = msg.find('\'', 1);
      std::string rest = msg.substr(close + 1);
      while (!rest.empty() && (rest[0] == ':' || rest[0] == ' ')) rest.erase(0, 1);
      r.fail(msg.substr(1, close - 1), rest);
    }
    r.fail(msg.find("environment") != std::string::npos ? "env" : "", msg);
  }
  return c;
}

TestingEnv make_testing_env(const EnvSpec& spec) {
  if (spec.name == "example1") return build_example1();
  if (spec.name == "three_group") return build_three_group(spec.seed);
  if (spec.name == "minimax") return build_minimax(spec.hyp_count, spec.arm_count, spec.gamma, spec.seed);
  if (spec.name == "means") {
    TestingEnv env;
    env.name = "means";
    env.means = MeansTable::from_rows(spec.rows);
    if (spec.true_hyp >= env.means.hyp_count()) throw ConfigError("'true_hyp' out of range");
    env.true_hyp = spec.true_hyp;
    env.noise = NoiseSpec::gaussian(spec.noise_std);
    return env;
  }
  throw ConfigError("'" + spec.name + "' is not a finite testing environment");
}

RegressionEnv make_regression_env(const EnvSpec& spec) {
  if (spec.name == "logistic_groups") return build_logistic_groups(spec.seed);
  if (spec.name == "relu_net") return build_relu_net(spec.seed, spec.n_points);
  if (spec.name == "csv") return ingest_csv(spec.dataset);
  if (spec.name == "linear") {
    const std::size_t n = spec.features.size();
    const std::size_t d = n ? spec.features[0].size() : 0;
    if (n == 0 || d == 0) throw ConfigError("'features' must be a non-empty matrix");
    if (spec.theta_star.size() != d) throw ConfigError("'theta_star' length differs from the feature dimension");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
      if (spec.features[i].size() != d) throw ConfigError("'features' rows differ in length");
      for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = spec.features[i][k];
    }
    RegressionEnv env;
    env.name = "linear";
    env.model = ParamModel::linear(std::move(x));
    env.theta_star = Eigen::Map<const Eigen::VectorXd>(spec.theta_star.data(), static_cast<Eigen::Index>(d));
    env.noise = NoiseSpec::gaussian(spec.noise_std);
    return env;
  }
  throw ConfigError("'" + spec.name + "' is not a regression environment");
}

BoxStats box_stats(std::vector<double> v) {
  BoxStats b;
  b.count = v.size();
  if (v.empty()) return b;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  b.mean = sum / static_cast<double>(n);
  b.min = v.front();
  b.max = v.back();
  b.median = quantile_sorted(v, 0, n);
  // Tukey hinges: medians of the halves, each including the median when n is odd.
  const std::size_t half = (n + 1) / 2;
  b.q1 = quantile_sorted(v, 0, half);
  b.q3 = quantile_sorted(v, n - half, n);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  b.whisker_low = b.max;
  b.whisker_high = b.min;
  for (double x : v) {
    if (x < lo || x > hi) {
      ++b.outliers;
      continue;
    }
    b.whisker_low = std::min(b.whisker_low, x);
    b.whisker_high = std::max(b.whisker_high, x);
  }
  return b;
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        task(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

CommandOutput cmd_test(const ExperimentConfig& config) {
  config.validate();
  EnvSpec spec = config.env;
  spec.seed = env_seed(spec, config.seed);
  const TestingEnv env = make_testing_env(spec);
  const std::size_t J = env.means.hyp_count();
  StoppingRule rule;
  if (config.stopping == StopVariant::gaussian) {
    rule = StoppingRule::gaussian(J, config.delta);
  } else {
    rule = StoppingRule::sub_gaussian(J, config.delta, config.eta.value_or(env.noise.eta), min_squared_gap(env.means));
  }
  const VerificationDesigns designs(env.means);

  std::vector<PolicyConfig> policies;
  for (const auto& name : test_policies(config)) {
    PolicyConfig p = parse_policy(name);
    p.max_rounds = config.max_rounds;
    policies.push_back(p);
  }
  const std::size_t T = config.trials;
  std::vector<TrialReport> results(policies.size() * T);
  parallel_for(results.size(), config.workers, [&](std::size_t k) {
    PolicyConfig p = policies[k / T];
    p.seed = derive_seed(config.seed, p.label(), k % T);
    results[k] = run_trial(env, designs, p, rule);
  });

  CommandOutput out;
  out.report = header(config);
  out.report["environment"] = testing_env_json(env);
  out.report["stopping_rule"] = {{"variant", config.stopping == StopVariant::gaussian ? "gaussian" : "sub_gaussian"},
                                 {"delta", rule.delta},
                                 {"beta", rule.beta}};
  out.report["constants"] = constants_json(env.means, env.true_hyp, config.delta);
  CsvWriter csv;
  ordered_json arr = ordered_json::array();
  for (std::size_t pi = 0; pi < policies.size(); ++pi) {
    const std::string label = policies[pi].label();
    std::vector<double> times;
    std::vector<std::uint64_t> raw, declared;
    std::size_t errors = 0, truncated = 0;
    std::uint64_t degenerate = 0, refreshes = 0;
    for (std::size_t t = 0; t < T; ++t) {
      const TrialReport& r = results[pi * T + t];
      times.push_back(static_cast<double>(r.stop_time));
      raw.push_back(r.stop_time);
      declared.push_back(r.declared_hyp);
      errors += r.correct ? 0 : 1;
      truncated += r.truncated ? 1 : 0;
      degenerate += r.degenerate_rounds;
      refreshes += r.design_refreshes;
      csv.row(label, t, "stopping_time", std::nullopt, static_cast<double>(r.stop_time));
      csv.row(label, t, "correct", std::nullopt, r.correct ? 1.0 : 0.0);
      csv.row(label, t, "truncated", std::nullopt, r.truncated ? 1.0 : 0.0);
    }
    ordered_json p;
    p["policy"] = label;
    p["trials"] = T;
    p["stopping_time"] = box_json(box_stats(times));
    p["errors"] = errors;
    p["error_rate"] = static_cast<double>(errors) / static_cast<double>(T);
    p["truncated"] = truncated;
    p["degenerate_rounds"] = degenerate;
    p["design_refreshes"] = refreshes;
    p["stopping_times"] = raw;
    p["declared"] = declared;
    arr.push_back(std::move(p));
  }
  out.report["policies"] = std::move(arr);
  out.csv = csv.out.str();
  return out;
}

CommandOutput cmd_regress(const ExperimentConfig& config) {
  config.validate();
  EnvSpec spec = config.env;
  spec.seed = env_seed(spec, config.seed);
  IngestInfo info;
  RegressionEnv env;
  if (spec.name == "csv") env = ingest_csv(spec.dataset, &info);
  else env = make_regression_env(spec);
  if (config.horizon < env.model.dim()) throw ConfigError("'horizon' must be at least the parameter dimension");

  std::vector<RegressionPolicy> policies;
  for (const auto& name : regress_policies(config)) policies.push_back(parse_regression_policy(name));
  const std::size_t T = config.trials;
  std::vector<RegressionMetrics> results(policies.size() * T);
  parallel_for(results.size(), config.workers, [&](std::size_t k) {
    RegressionOptions opts;
    opts.policy = policies[k / T];
    opts.batch = config.batch;
    results[k] = run_regression(env, opts, config.horizon, derive_seed(config.seed, regression_policy_name(opts.policy), k % T));
  });

  CommandOutput out;
  out.report = header(config);
  ordered_json ej = regression_env_json(env);
  if (spec.name == "csv") {
    ej["rows_read"] = info.rows_read;
    ej["rows_dropped"] = info.rows_dropped;
    ej["feature_names"] = info.feature_names;
    ej["target_name"] = info.target_name;
  }
  out.report["environment"] = ej;
  const std::vector<std::size_t> checkpoints = checkpoint_schedule(config.horizon);
  out.report["checkpoints"] = checkpoints;
  CsvWriter csv;
  ordered_json arr = ordered_json::array();
  for (std::size_t pi = 0; pi < policies.size(); ++pi) {
    const std::string label = regression_policy_name(policies[pi]);
    ordered_json curves = ordered_json::array();
    std::uint64_t non_spanning = 0, warnings = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < T; ++t) {
      const RegressionMetrics& m = results[pi * T + t];
      non_spanning += m.non_spanning_rounds;
      warnings += m.fit_warnings;
      for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        csv.row(label, t, "est_err", checkpoints[c], m.est_err[c]);
        csv.row(label, t, "pt_gap", checkpoints[c], m.pt_gap[c]);
        csv.row(label, t, "support_size", checkpoints[c], static_cast<double>(m.support_sizes[c]));
        min_gap = std::min(min_gap, m.pt_gap[c]);
      }
    }
    std::vector<double> finals;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      std::vector<double> err, gap, sup;
      for (std::size_t t = 0; t < T; ++t) {
        const RegressionMetrics& m = results[pi * T + t];
        err.push_back(m.est_err[c]);
        gap.push_back(m.pt_gap[c]);
        sup.push_back(static_cast<double>(m.support_sizes[c]));
      }
      if (c + 1 == checkpoints.size()) finals = err;
      ordered_json point;
      point["t"] = checkpoints[c];
      point["est_err"] = quartiles_json(box_stats(err));
      point["pt_gap"] = quartiles_json(box_stats(gap));
      point["support_size"] = quartiles_json(box_stats(sup));
      curves.push_back(std::move(point));
    }
    ordered_json p;
    p["policy"] = label;
    p["trials"] = T;
    p["final_est_err"] = box_json(box_stats(finals));
    p["min_pt_gap"] = min_gap;
    p["non_spanning_rounds"] = non_spanning;
    p["fit_warnings"] = warnings;
    p["curves"] = std::move(curves);
    arr.push_back(std::move(p));
  }
  out.report["policies"] = std::move(arr);
  out.csv = csv.out.str();
  return out;
}

CommandOutput cmd_design(const ExperimentConfig& config) {
  config.validate();
  EnvSpec spec = config.env;
  spec.seed = env_seed(spec, config.seed);
  CommandOutput out;
  out.report = header(config);
  ordered_json d;
  Design design;
  if (is_testing_env(spec.name)) {
    const TestingEnv env = make_testing_env(spec);
    out.report["environment"] = testing_env_json(env);
    const HypIndex h = config.hyp.value_or(env.true_hyp);
    if (h >= env.means.hyp_count()) throw ConfigError("'hyp' out of range");
    const LpInstance inst = LpInstance::verification(env.means, h);
    const DesignSolution sol = solve_verification_lp(inst);
    design = config.sparsify ? sparsify_design(sol.design, inst) : sol.design;
    d["kind"] = "verification_lp";
    d["hyp"] = h;
    d["objective"] = inst.objective(design.probs);
    d["solver_objective"] = sol.objective;
    d["duality_gap"] = finite_or_null(sol.duality_gap);
    d["converged"] = sol.converged;
    d["degenerate"] = sol.degenerate;
  } else {
    const RegressionEnv env = make_regression_env(spec);
    out.report["environment"] = regression_env_json(env);
    Eigen::VectorXd theta = env.theta_star;
    if (!config.theta.empty()) {
      if (config.theta.size() != env.model.param_size()) throw ConfigError("'theta' has the wrong length");
      theta = Eigen::Map<const Eigen::VectorXd>(config.theta.data(), static_cast<Eigen::Index>(config.theta.size()));
      env.model.check_theta(theta);
    }
    const EigInstance inst{env.model.jacobian(theta)};
    EigSolverOptions opts;
    opts.max_iters = 2000;
    opts.tol = 1e-8;
    const DesignSolution sol = solve_min_eig_design(inst, opts);
    design = config.sparsify ? sparsify_design(sol.design, inst) : sol.design;
    d["kind"] = "min_eigenvalue";
    d["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    d["objective"] = inst.objective(design.probs);
    d["solver_objective"] = sol.objective;
    d["duality_gap"] = finite_or_null(sol.duality_gap);
    d["converged"] = sol.converged;
    d["non_spanning"] = sol.non_spanning;
  }
  d["support_size"] = design.support_size();
  d["support"] = design.support();
  d["probs"] = design.probs;
  out.report["design"] = d;

  std::ostringstream csv;
  csv << "arm,probability\n";
  for (std::size_t i = 0; i < design.size(); ++i) csv << i << ',' << csv_value(design.probs[i]) << '\n';
  out.csv = csv.str();
  return out;
}

CommandOutput cmd_diagnose(const ExperimentConfig& config) {
  config.validate();
  EnvSpec spec = config.env;
  spec.seed = env_seed(spec, config.seed);
  const TestingEnv env = make_testing_env(spec);
  CommandOutput out;
  out.report = header(config);
  out.report["environment"] = testing_env_json(env);
  out.report["constants"] = constants_json(env.means, env.true_hyp, config.delta);
  const ordered_json& c = out.report["constants"];
  std::ostringstream csv;
  csv << "name,value\n";
  for (const char* k : {"d0", "d1", "de", "dnj", "eta0"}) csv << k << ',' << csv_value(c[k].get<double>()) << '\n';
  for (const char* k : {"exploration", "exploitation", "uniform"}) {
    const auto& v = c["predicted_terms"][k];
    csv << k << "_term," << (v.is_null() ? std::string("inf") : csv_value(v.get<double>())) << '\n';
  }
  out.csv = csv.str();
  return out;
}

CommandOutput run_command(const ExperimentConfig& config) {
  if (config.command == "test") return cmd_test(config);
  if (config.command == "regress") return cmd_regress(config);
  if (config.command == "design") return cmd_design(config);
  if (config.command == "diagnose") return cmd_diagnose(config);
  throw ConfigError("unknown command '" + config.command + "'");
}

std::string render(const CommandOutput& out, OutputFormat format) {
  if (format == OutputFormat::csv) return out.csv;
  return out.report.dump(2) + "\n";
}

void write_output(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw IoError("failed writing '" + path + "'");
}

}  // namespace chernoff
