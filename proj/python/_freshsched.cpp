#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "freshsched/analytic.hpp"
#include "freshsched/cli.hpp"
#include "freshsched/error.hpp"
#include "freshsched/experiment.hpp"
#include "freshsched/simulator.hpp"

namespace py = pybind11;
using namespace freshsched;

namespace {

TruncationPolicy truncation_from(std::optional<std::uint32_t> bound) {
  TruncationPolicy t;
  if (bound) {
    t.initial_bound = *bound;
    t.adaptive = false;
  }
  return t;
}

py::dict row_dict(const ResultRow& r) {
  py::dict d;
  d["policy"] = r.policy;
  d["m"] = r.m;
  d["n"] = r.n;
  d["k"] = r.k;
  d["lambda_u"] = r.lambda_u;
  d["lambda_q"] = r.lambda_q;
  d["mu_u"] = r.mu_u;
  d["mu_q"] = r.mu_q;
  d["metric"] = r.metric;
  d["source"] = r.source;
  d["mean"] = r.mean;
  d["ci_half_width"] = r.ci_half_width;
  d["replications"] = r.replications;
  d["horizon"] = r.horizon;
  d["seed"] = r.seed;
  d["status"] = r.status;
  return d;
}

}  // namespace

PYBIND11_MODULE(_freshsched, m) {
  m.doc() = "Response time and age-of-information engines for a two-class single-server queue";

  // kept alive for the interpreter's lifetime
  static PyObject* error_type = py::exception<Error>(m, "FreshschedError", PyExc_ValueError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error_type, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init(&ModelParams::validate), py::arg("lambda_u"), py::arg("mu_u"), py::arg("lambda_q"),
           py::arg("mu_q"))
      .def_property_readonly("lambda_u", &ModelParams::lambda_u)
      .def_property_readonly("mu_u", &ModelParams::mu_u)
      .def_property_readonly("lambda_q", &ModelParams::lambda_q)
      .def_property_readonly("mu_q", &ModelParams::mu_q)
      .def_property_readonly("rho_u", &ModelParams::rho_u)
      .def_property_readonly("rho_q", &ModelParams::rho_q)
      .def_property_readonly("rho", &ModelParams::rho)
      .def("swapped", &ModelParams::swapped)
      .def("__repr__", [](const ModelParams& p) {
        std::ostringstream s;
        s << "ModelParams(lambda_u=" << p.lambda_u() << ", mu_u=" << p.mu_u() << ", lambda_q=" << p.lambda_q()
          << ", mu_q=" << p.mu_q() << ")";
        return s.str();
      });

  m.def("stability_guard", &stability_guard);

  py::class_<PolicySpec>(m, "Policy")
      .def(py::init(&PolicySpec::parse), py::arg("label"))
      .def_property_readonly("label", &PolicySpec::label)
      .def_property_readonly("family", &PolicySpec::family)
      .def("mirrored", &PolicySpec::mirrored)
      .def("__eq__", [](const PolicySpec& a, const PolicySpec& b) { return a == b; })
      .def("__repr__", [](const PolicySpec& p) { return "Policy('" + p.label() + "')"; });
  py::implicitly_convertible<std::string, PolicySpec>();

  py::class_<CtmcDiagnostics>(m, "CtmcDiagnostics")
      .def_property_readonly("bounds", [](const CtmcDiagnostics& d) { return py::make_tuple(d.bounds.max_q, d.bounds.max_u); })
      .def_readonly("states", &CtmcDiagnostics::states)
      .def_readonly("tail_mass", &CtmcDiagnostics::tail_mass)
      .def_readonly("residual", &CtmcDiagnostics::residual)
      .def_readonly("nq_direct", &CtmcDiagnostics::nq_direct)
      .def_readonly("nu_direct", &CtmcDiagnostics::nu_direct)
      .def_readonly("conservation_gap", &CtmcDiagnostics::conservation_gap)
      .def_readonly("consistent", &CtmcDiagnostics::consistent);

  py::class_<ClosedFormResult>(m, "Result")
      .def_readonly("policy", &ClosedFormResult::policy)
      .def_readonly("params", &ClosedFormResult::params)
      .def_readonly("response_time", &ClosedFormResult::expected_response_time)
      .def_readonly("update_system_time", &ClosedFormResult::expected_update_system_time)
      .def_readonly("paoi", &ClosedFormResult::expected_paoi)
      .def_readonly("nq", &ClosedFormResult::expected_nq)
      .def_readonly("nu", &ClosedFormResult::expected_nu)
      .def_readonly("ctmc", &ClosedFormResult::ctmc);

  m.def("fcfs_metrics", &fcfs_metrics);
  m.def("query1_metrics", &query1_metrics);
  m.def("update1_metrics", &update1_metrics);
  m.def("conservation_rhs", &conservation_rhs);
  m.def("paoi_from_update_system_time", &paoi_from_update_system_time);
  m.def(
      "query_k_metrics",
      [](const ModelParams& p, std::uint32_t k, std::optional<std::uint32_t> trunc) {
        return query_k_metrics(p, k, truncation_from(trunc));
      },
      py::arg("params"), py::arg("k"), py::arg("trunc") = py::none(),
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "update_k_metrics",
      [](const ModelParams& p, std::uint32_t k, std::optional<std::uint32_t> trunc) {
        return update_k_metrics(p, k, truncation_from(trunc));
      },
      py::arg("params"), py::arg("k"), py::arg("trunc") = py::none(),
      py::call_guard<py::gil_scoped_release>());

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init([](double horizon, double warmup, std::uint32_t replications, std::uint64_t seed) {
             SimConfig c{horizon, warmup, replications, seed};
             c.validate();
             return c;
           }),
           py::arg("horizon") = 20000.0, py::arg("warmup") = 0.0, py::arg("replications") = 10,
           py::arg("seed") = SimConfig{}.base_seed)
      .def_readonly("horizon", &SimConfig::horizon)
      .def_readonly("warmup", &SimConfig::warmup)
      .def_readonly("replications", &SimConfig::replications)
      .def_readonly("seed", &SimConfig::base_seed);

  py::class_<ReplicationMetrics>(m, "ReplicationMetrics")
      .def_readonly("response_time", &ReplicationMetrics::mean_response_time)
      .def_readonly("update_system_time", &ReplicationMetrics::mean_update_system_time)
      .def_readonly("paoi", &ReplicationMetrics::mean_paoi)
      .def_readonly("aoi", &ReplicationMetrics::mean_aoi)
      .def_readonly("nq", &ReplicationMetrics::mean_nq)
      .def_readonly("nu", &ReplicationMetrics::mean_nu)
      .def_readonly("completed_queries", &ReplicationMetrics::completed_queries)
      .def_readonly("completed_updates", &ReplicationMetrics::completed_updates)
      .def_readonly("busy_time", &ReplicationMetrics::busy_time)
      .def("littles_law_residual", [](const ReplicationMetrics& r, const ModelParams& p) {
        const auto l = littles_law_residual(r, p);
        return py::make_tuple(l.query, l.update);
      });

  py::class_<SummaryStats>(m, "SummaryStats")
      .def_readonly("mean", &SummaryStats::mean)
      .def_readonly("stddev", &SummaryStats::stddev)
      .def_readonly("half_width", &SummaryStats::half_width)
      .def_readonly("count", &SummaryStats::count);

  py::class_<AggregateStats>(m, "AggregateStats")
      .def_readonly("response_time", &AggregateStats::response_time)
      .def_readonly("paoi", &AggregateStats::paoi)
      .def_readonly("aoi", &AggregateStats::aoi)
      .def_readonly("nq", &AggregateStats::nq)
      .def_readonly("nu", &AggregateStats::nu)
      .def_readonly("update_system_time", &AggregateStats::update_system_time);

  m.def("run_replication", [](const ModelParams& p, const PolicySpec& policy, const SimConfig& c,
                              std::uint32_t rep) { return run_replication(p, policy, c, rep); },
        py::arg("params"), py::arg("policy"), py::arg("config") = SimConfig{}, py::arg("rep") = 0,
        py::call_guard<py::gil_scoped_release>());
  m.def("run_replications", &run_replications, py::arg("params"), py::arg("policy"),
        py::arg("config") = SimConfig{}, py::arg("workers") = 0, py::call_guard<py::gil_scoped_release>());
  m.def("aggregate", [](const std::vector<ReplicationMetrics>& runs) { return aggregate(runs); });
  m.def(
      "simulate",
      [](const ModelParams& p, const PolicySpec& policy, const SimConfig& c, unsigned workers) {
        const auto runs = run_replications(p, policy, c, workers);
        return aggregate(runs);
      },
      py::arg("params"), py::arg("policy"), py::arg("config") = SimConfig{}, py::arg("workers") = 0,
      py::call_guard<py::gil_scoped_release>());

  py::enum_<ServerPosition>(m, "ServerPosition")
      .value("Idle", ServerPosition::Idle)
      .value("ServingQuery", ServerPosition::ServingQuery)
      .value("ServingUpdate", ServerPosition::ServingUpdate);
  py::enum_<Trigger>(m, "Trigger")
      .value("ArrivalUpdate", Trigger::ArrivalUpdate)
      .value("ArrivalQuery", Trigger::ArrivalQuery)
      .value("DepartureUpdate", Trigger::DepartureUpdate)
      .value("DepartureQuery", Trigger::DepartureQuery);
  py::enum_<JobClass>(m, "JobClass").value("Update", JobClass::Update).value("Query", JobClass::Query);

  py::class_<SchedulerState>(m, "SchedulerState")
      .def(py::init([](std::uint32_t nq, std::uint32_t nu, ServerPosition pos, bool emptying) {
             return SchedulerState{nq, nu, pos, emptying};
           }),
           py::arg("n_q") = 0, py::arg("n_u") = 0, py::arg("position") = ServerPosition::Idle,
           py::arg("emptying") = false)
      .def_readonly("n_q", &SchedulerState::n_q)
      .def_readonly("n_u", &SchedulerState::n_u)
      .def_readonly("position", &SchedulerState::position)
      .def_readonly("emptying", &SchedulerState::emptying)
      .def("__eq__", [](const SchedulerState& a, const SchedulerState& b) { return a == b; });
  m.def("decide", &decide, py::arg("policy"), py::arg("state"), py::arg("trigger"),
        py::arg("fcfs_head") = py::none());

  m.def(
      "run_config",
      [](const std::string& text) {
        const auto spec = parse_config_text(text);
        std::vector<ResultRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_experiment(spec);
        }
        py::list out;
        for (const auto& r : rows) out.append(row_dict(r));
        return out;
      },
      py::arg("config_text"));
  m.def(
      "config_csv",
      [](const std::string& text) {
        const auto spec = parse_config_text(text);
        std::ostringstream s;
        write_csv(run_experiment(spec), s);
        return s.str();
      },
      py::arg("config_text"), "Runs a config and returns the CSV text.");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command-line invocation; returns (exit_code, stdout, stderr).");
}
