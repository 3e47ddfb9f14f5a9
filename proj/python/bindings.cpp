#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chernoff/design_opt.hpp"
#include "chernoff/diagnostics.hpp"
#include "chernoff/envs.hpp"
#include "chernoff/experiment.hpp"
#include "chernoff/regression.hpp"
#include "chernoff/testing.hpp"

namespace py = pybind11;
using namespace chernoff;

namespace {

py::dict solution_dict(const DesignSolution& s) {
  py::dict d;
  d["probs"] = s.design.probs;
  d["objective"] = s.objective;
  d["support_size"] = s.design.support_size();
  d["converged"] = s.converged;
  d["duality_gap"] = s.duality_gap;
  d["degenerate"] = s.degenerate;
  d["non_spanning"] = s.non_spanning;
  return d;
}

py::dict testing_env_dict(const TestingEnv& env) {
  py::dict d;
  d["name"] = env.name;
  d["means"] = env.means.rows();
  d["true_hyp"] = env.true_hyp;
  return d;
}

py::dict regression_env_dict(const RegressionEnv& env) {
  py::dict d;
  d["name"] = env.name;
  d["model"] = model_kind_name(env.model.kind());
  d["features"] = env.model.features();
  d["theta_star"] = env.theta_star;
  return d;
}

TestingEnv env_from(const std::vector<std::vector<double>>& means, HypIndex true_hyp, double noise_std) {
  TestingEnv env;
  env.name = "means";
  env.means = MeansTable::from_rows(means);
  env.true_hyp = true_hyp;
  env.noise = NoiseSpec::gaussian(noise_std);
  return env;
}

std::string run_json(const std::string& command, const std::string& config, const std::string& format) {
  ExperimentConfig c = parse_config(command, config.empty() ? "{}" : config, "config");
  if (format == "csv") c.format = OutputFormat::csv;
  else if (format != "json") throw ConfigError("format must be 'json' or 'csv'");
  py::gil_scoped_release release;
  return render(run_command(c), c.format);
}

}  // namespace

PYBIND11_MODULE(_chernoff, m) {
  m.doc() = "Chernoff sampling for active testing and active regression";
  m.attr("__version__") = kArtifactVersion;

  // Translators run newest first, so the subclass goes last.
  auto& invalid = py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", invalid.ptr());
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("example1", [] { return testing_env_dict(build_example1()); });
  m.def("three_group", [](std::uint64_t seed) { return testing_env_dict(build_three_group(seed)); },
        py::arg("seed") = 0);
  m.def("minimax",
        [](std::size_t J, std::size_t n, double gamma, std::uint64_t seed) {
          return testing_env_dict(build_minimax(J, n, gamma, seed));
        },
        py::arg("J"), py::arg("n") = 0, py::arg("gamma") = 1.0, py::arg("seed") = 0);
  m.def("logistic_groups", [](std::uint64_t seed) { return regression_env_dict(build_logistic_groups(seed)); },
        py::arg("seed") = 0);
  m.def("relu_net",
        [](std::uint64_t seed, std::size_t n_points) { return regression_env_dict(build_relu_net(seed, n_points)); },
        py::arg("seed") = 0, py::arg("n_points") = 100);

  m.def("solve_verification_lp",
        [](const std::vector<std::vector<double>>& means, HypIndex hyp) {
          return solution_dict(solve_verification_lp(LpInstance::verification(MeansTable::from_rows(means), hyp)));
        },
        py::arg("means"), py::arg("hyp"));
  m.def("solve_min_eig_design",
        [](const Eigen::MatrixXd& grads, bool sparsify) {
          const EigInstance inst{grads};
          DesignSolution s = solve_min_eig_design(inst);
          if (sparsify) {
            s.design = sparsify_design(s.design, inst);
            s.objective = inst.objective(s.design.probs);
          }
          return solution_dict(s);
        },
        py::arg("grads"), py::arg("sparsify") = false);

  m.def("compute_constants",
        [](const std::vector<std::vector<double>>& means, HypIndex true_hyp, double delta) {
          const MeansTable t = MeansTable::from_rows(means);
          const ProblemConstants c = compute_constants(t, true_hyp);
          const PredictedTerms p = predicted_terms(c, t.hyp_count(), delta);
          py::dict d;
          d["d0"] = c.d0;
          d["d1"] = c.d1;
          d["de"] = c.de;
          d["dnj"] = c.dnj;
          d["eta0"] = c.eta0;
          d["ordering_holds"] = c.ordering_holds;
          d["exploration"] = p.exploration;
          d["exploitation"] = p.exploitation;
          d["uniform"] = p.uniform;
          return d;
        },
        py::arg("means"), py::arg("true_hyp") = 0, py::arg("delta") = 0.1);

  m.def("run_trial",
        [](const std::vector<std::vector<double>>& means, HypIndex true_hyp, const std::string& policy, double delta,
           std::uint64_t seed, double noise_std, std::uint64_t max_rounds) {
          const TestingEnv env = env_from(means, true_hyp, noise_std);
          PolicyConfig p = parse_policy(policy);
          p.seed = seed;
          p.max_rounds = max_rounds;
          const TrialReport r = run_trial(env, p, StoppingRule::gaussian(env.means.hyp_count(), delta));
          py::dict d;
          d["stop_time"] = r.stop_time;
          d["declared_hyp"] = r.declared_hyp;
          d["correct"] = r.correct;
          d["truncated"] = r.truncated;
          d["arm_counts"] = r.arm_counts;
          return d;
        },
        py::arg("means"), py::arg("true_hyp") = 0, py::arg("policy") = "cs", py::arg("delta") = 0.1,
        py::arg("seed") = 0, py::arg("noise_std") = 0.7071067811865476, py::arg("max_rounds") = 10'000'000);

  m.def("run_regression",
        [](const std::string& env_name, const std::string& policy, std::size_t horizon, std::uint64_t seed,
           std::uint64_t env_seed) {
          EnvSpec spec;
          spec.name = env_name;
          spec.seed = env_seed;
          const RegressionEnv env = make_regression_env(spec);
          RegressionOptions opts;
          opts.policy = parse_regression_policy(policy);
          RegressionMetrics m;
          {
            py::gil_scoped_release release;
            m = run_regression(env, opts, horizon, seed);
          }
          py::dict d;
          d["checkpoints"] = m.checkpoints;
          d["est_err"] = m.est_err;
          d["pt_gap"] = m.pt_gap;
          d["support_sizes"] = m.support_sizes;
          return d;
        },
        py::arg("env"), py::arg("policy") = "cs", py::arg("horizon") = 100, py::arg("seed") = 0,
        py::arg("env_seed") = 0);

  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("label"), py::arg("index"));
  m.def("run_command", &run_json, py::arg("command"), py::arg("config") = "", py::arg("format") = "json",
        "Runs a CLI command on a JSON config string and returns the rendered report.");
}
