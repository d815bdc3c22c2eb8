#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "boba/aggregation.hpp"
#include "boba/attacks.hpp"
#include "boba/config.hpp"
#include "boba/error.hpp"
#include "boba/fedsim.hpp"
#include "boba/gradient_file.hpp"
#include "boba/metrics.hpp"
#include "boba/rng.hpp"
#include "boba/verify.hpp"

namespace py = pybind11;
using boba::Matrix;
using boba::Vector;

namespace {

py::dict aggregate(const Matrix& gradients, const std::string& name, int f, std::optional<Matrix> server,
                   int num_classes, std::uint64_t seed, double p_min) {
  boba::AggregatorSpec spec;
  spec.name = name;
  spec.boba.p_min = p_min;
  if (server && num_classes == 0) num_classes = static_cast<int>(server->cols());
  const boba::AggregationInput input{gradients, server ? &*server : nullptr, f, num_classes, seed};
  boba::AggregationResult r;
  {
    py::gil_scoped_release release;
    r = boba::make_aggregator(spec)(input);
  }
  py::dict out;
  out["aggregate"] = r.aggregate;
  out["accepted"] = r.accepted;
  out["trsvd_calls"] = r.diagnostics.trsvd_calls;
  out["trimmed_loss"] = r.diagnostics.trimmed_loss;
  out["loss_trace"] = r.diagnostics.loss_trace;
  out["scores"] = r.diagnostics.scores;
  if (r.diagnostics.label_estimates.size() > 0) out["label_estimates"] = r.diagnostics.label_estimates;
  return out;
}

Matrix attack(const std::string& kind, const Matrix& honest, int n_total, int count, std::uint64_t seed,
              int mimic_target) {
  boba::AttackSpec spec;
  spec.kind = boba::parse_attack_kind(kind);
  spec.mimic_target = mimic_target;
  boba::Rng rng(seed);
  return boba::apply_attack(spec, honest, n_total, count, rng);
}

py::dict run_experiment(const std::string& config_text, int threads, const std::string& out_dir) {
  const boba::SimConfig config = boba::parse_config(config_text);
  boba::RunOptions options;
  options.threads = threads;
  boba::ExperimentResult r;
  {
    py::gil_scoped_release release;
    r = boba::run_experiment(config, options);
    if (!out_dir.empty()) boba::write_outputs(out_dir, config, r);
  }
  std::ostringstream rounds;
  boba::write_rounds_csv(rounds, config, r);
  std::ostringstream summary;
  boba::write_summary(summary, config, r);
  py::dict out;
  out["rounds_csv"] = rounds.str();
  out["summary"] = summary.str();
  out["final_accuracy"] = r.final_accuracy.accuracy;
  out["recall"] = r.final_accuracy.recall;
  out["mrd"] = r.mrd;
  out["pca_ratios"] = r.pca_ratios;
  out["final_params"] = r.final_params;
  return out;
}

py::list verify(const std::string& suite, std::uint64_t seed) {
  boba::VerifyOptions options;
  options.seed = seed;
  std::vector<boba::CheckResult> checks;
  {
    py::gil_scoped_release release;
    checks = boba::run_verify_suite(suite, options);
  }
  py::list out;
  for (const auto& c : checks) out.append(py::make_tuple(c.name, c.passed, c.detail));
  return out;
}

py::dict error_bound(double eps, double eps_server, double delta, double delta_server, double sigma, int n, int f,
                     int c, double beta, int honest_count, double p_min) {
  boba::BoundInputs in;
  in.eps = eps;
  in.eps_server = eps_server;
  in.delta = delta;
  in.delta_server = delta_server;
  in.sigma = sigma;
  in.n = n;
  in.f = f;
  in.c = c;
  in.beta = beta;
  in.honest_count = honest_count;
  in.p_min = p_min;
  const boba::BoundTerms t = boba::compute_boba_error_bound(in);
  py::dict out;
  out["c1"] = t.c1;
  out["c2"] = t.c2;
  out["c3"] = t.c3;
  out["value"] = t.value;
  return out;
}

py::tuple read_gradients(const std::string& path) {
  const boba::GradientFile f = boba::read_gradient_file(path);
  py::object server = py::none();
  if (f.server) server = py::cast(*f.server);
  return py::make_tuple(f.clients, server, f.num_classes);
}

void write_gradients(const std::string& path, const Matrix& clients, std::optional<Matrix> server, int num_classes) {
  boba::GradientFile f;
  f.clients = clients;
  f.server = std::move(server);
  f.num_classes = num_classes;
  boba::write_gradient_file(path, f);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Byzantine-robust aggregation under label skewness";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::exception<boba::Error>(m, "BobaError", PyExc_ValueError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const boba::Error& e) {
      const py::object& type = error_type.get_stored();
      py::object instance = type(e.what());
      instance.attr("code") = boba::error_code_name(e.code());
      PyErr_SetObject(type.ptr(), instance.ptr());
    }
  });

  m.def("aggregator_names", &boba::aggregator_names, "Names accepted by aggregate().");
  m.def("aggregate", &aggregate, py::arg("gradients"), py::arg("name") = "boba", py::arg("f") = 0,
        py::arg("server") = py::none(), py::arg("num_classes") = 0, py::arg("seed") = 0, py::arg("p_min") = -0.5,
        "Aggregate the columns of a d x n gradient matrix. server is d x c.");
  m.def("attack", &attack, py::arg("kind"), py::arg("honest"), py::arg("n_total"), py::arg("count"),
        py::arg("seed") = 0, py::arg("mimic_target") = 0, "Byzantine columns crafted from d x |H| honest gradients.");
  m.def("run_experiment", &run_experiment, py::arg("config"), py::arg("threads") = 0, py::arg("out_dir") = "",
        "Run a simulation from INI text; optionally write the output files.");
  m.def("verify", &verify, py::arg("suite") = "all", py::arg("seed") = 7,
        "Run a verification suite; returns (name, passed, detail) tuples.");
  m.def("error_bound", &error_bound, py::arg("eps"), py::arg("eps_server"), py::arg("delta"),
        py::arg("delta_server"), py::arg("sigma"), py::arg("n"), py::arg("f"), py::arg("c"), py::arg("beta"),
        py::arg("honest_count"), py::arg("p_min") = -0.5);
  m.def("variance_concentration", &boba::variance_concentration, py::arg("gradients"), py::arg("c"));
  m.def("config_to_string", [](const std::string& text) { return boba::config_to_string(boba::parse_config(text)); },
        py::arg("config"), "Canonical form of an INI config (validates keys).");
  m.def("read_gradients", &read_gradients, py::arg("path"), "Returns (clients, server or None, num_classes).");
  m.def("write_gradients", &write_gradients, py::arg("path"), py::arg("clients"), py::arg("server") = py::none(),
        py::arg("num_classes") = 0);
}
