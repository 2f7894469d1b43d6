#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "inpipe/control.hpp"
#include "inpipe/dynamics.hpp"
#include "inpipe/errors.hpp"
#include "inpipe/pipe_map.hpp"
#include "inpipe/scenario.hpp"
#include "inpipe/simulation.hpp"
#include "inpipe/trace_io.hpp"

namespace py = pybind11;
using namespace inpipe;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

// Trace as a dict of equal-length numpy columns keyed like the CSV header.
py::dict trace_columns(const std::vector<TraceRecord>& trace) {
  const auto n = static_cast<py::ssize_t>(trace.size());
  auto column = [&](auto get) {
    py::array_t<double> a(n);
    auto v = a.mutable_unchecked<1>();
    for (py::ssize_t i = 0; i < n; ++i) v(i) = get(trace[static_cast<std::size_t>(i)]);
    return a;
  };
  auto counts = [&](auto get) {
    py::array_t<std::int64_t> a(n);
    auto v = a.mutable_unchecked<1>();
    for (py::ssize_t i = 0; i < n; ++i) v(i) = static_cast<std::int64_t>(get(trace[static_cast<std::size_t>(i)]));
    return a;
  };
  py::dict d;
  d["t"] = column([](const TraceRecord& r) { return r.t; });
  d["x"] = column([](const TraceRecord& r) { return r.state.x; });
  d["x_dot"] = column([](const TraceRecord& r) { return r.state.x_dot; });
  d["phi"] = column([](const TraceRecord& r) { return r.state.phi; });
  d["phi_dot"] = column([](const TraceRecord& r) { return r.state.phi_dot; });
  d["psi"] = column([](const TraceRecord& r) { return r.state.psi; });
  d["psi_dot"] = column([](const TraceRecord& r) { return r.state.psi_dot; });
  py::list modes;
  for (const auto& r : trace) modes.append(std::string(to_string(r.mode)));
  d["mode"] = modes;
  d["junction_index"] = counts([](const TraceRecord& r) { return r.junction_index; });
  d["sonar"] = column([](const TraceRecord& r) { return r.sonar; });
  d["pf_mean"] = column([](const TraceRecord& r) { return r.pf_mean; });
  d["pf_var"] = column([](const TraceRecord& r) { return r.pf_var; });
  d["n_particles"] = counts([](const TraceRecord& r) { return r.n_particles; });
  for (int k = 0; k < 3; ++k) {
    d[py::str("f" + std::to_string(k + 1))] = column([k](const TraceRecord& r) { return r.forces[k]; });
    d[py::str("w" + std::to_string(k + 1))] = column([k](const TraceRecord& r) { return r.wheel_omega[k]; });
  }
  return d;
}

py::dict run_result(const RunResult& run) {
  py::dict d;
  d["summary"] = to_python(to_json(run.summary));
  d["trace"] = trace_columns(run.trace);
  return d;
}

}  // namespace

PYBIND11_MODULE(_inpipe, m) {
  m.doc() = "In-pipe robot navigation: dynamics, control, localisation and simulation harness";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<SchemaError>(m, "SchemaError", base);
  py::register_exception<InvariantError>(m, "InvariantError", base);
  py::register_exception<GeometryError>(m, "GeometryError", base);
  py::register_exception<OutOfRoute>(m, "OutOfRoute", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<SimulationDiverged>(m, "SimulationDiverged", base);

  py::class_<RouteMap>(m, "RouteMap")
      .def_property_readonly("route_length", &RouteMap::route_length)
      .def_property_readonly("segment_count", [](const RouteMap& r) { return r.segments().size(); })
      .def_property_readonly("junction_count", [](const RouteMap& r) { return r.ct().size(); })
      .def("segment_start", &RouteMap::segment_start)
      .def("junction_position", &RouteMap::junction_position)
      .def("locate",
           [](const RouteMap& r, double s) {
             const auto loc = r.locate(s);
             return py::make_tuple(loc.segment, loc.offset);
           })
      .def("distance_to_next_feature",
           [](const RouteMap& r, double s) { return r.distance_to_next_feature(s).distance; })
      .def("to_dict", [](const RouteMap& r) { return to_python(map_to_json(r)); });

  m.def("parse_map", &parse_map, py::arg("text"));

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("map", &Scenario::map)
      .def_readwrite("seed", &Scenario::seed)
      .def_readwrite("duration_s", &Scenario::duration_s)
      .def_readwrite("dt_s", &Scenario::dt_s)
      .def("validate", &Scenario::validate)
      .def("to_dict", [](const Scenario& s) { return to_python(scenario_to_json(s)); });

  m.def("parse_scenario", &parse_scenario, py::arg("text"));
  m.def("load_scenario", &load_scenario, py::arg("path"));

  m.def(
      "run_scenario",
      [](const Scenario& sc) {
        RunResult run;
        {
          py::gil_scoped_release release;
          run = run_scenario(sc);
        }
        return run_result(run);
      },
      py::arg("scenario"), "Closed-loop run; returns {'summary': dict, 'trace': dict of arrays}.");

  m.def(
      "replicate_fig3",
      [](const Scenario& sc) {
        RunResult run;
        {
          py::gil_scoped_release release;
          run = replicate_fig3(sc);
        }
        return run_result(run);
      },
      py::arg("scenario"));

  m.def(
      "monte_carlo",
      [](const Scenario& sc, std::size_t trials, std::uint64_t seed_base,
         std::optional<double> threshold, unsigned threads) {
        MonteCarloResult res;
        {
          py::gil_scoped_release release;
          res = monte_carlo(sc, trials, seed_base, threshold, threads);
        }
        return to_python(to_json(res));
      },
      py::arg("scenario"), py::arg("trials"), py::arg("seed_base"),
      py::arg("pf_error_threshold") = py::none(), py::arg("threads") = 0u);

  m.def(
      "describe", [](std::vector<double> v) { return to_python(to_json(describe(std::move(v)))); },
      py::arg("values"));

  m.def(
      "design_lqr",
      [](double diameter, const Vec4& q_diag, const Vec3& r_diag) {
        const RobotParams p;
        const auto plant = linearize(p, {}, arm_angle_from_diameter(p, diameter));
        const Mat4 q = q_diag.asDiagonal();
        const Eigen::Matrix3d r = r_diag.asDiagonal();
        const auto g = lqr_design(plant, q, r);
        py::dict d;
        d["A"] = Mat4(plant.a);
        d["B"] = Mat43(plant.b);
        d["K"] = Eigen::Matrix<double, 3, 4>(g.k);
        d["P"] = Mat4(g.p);
        d["residual"] = care_residual(plant.a, plant.b, q, r, g.p);
        return d;
      },
      py::arg("diameter") = 0.3556, py::arg("q_diag") = Vec4(10.0, 1.0, 10.0, 1.0),
      py::arg("r_diag") = Vec3(1.0, 1.0, 1.0),
      "Linearised attitude plant for the default robot and its LQR design.");

  m.def(
      "simulate",
      [](const Scenario& sc, const std::filesystem::path& trace_path) {
        RunResult run;
        {
          py::gil_scoped_release release;
          run = run_scenario(sc);
          write_trace(run.trace, trace_path);
        }
        return to_python(to_json(run.summary));
      },
      py::arg("scenario"), py::arg("trace_path"), "Run the scenario, write its trace CSV, return the summary.");
  m.def(
      "read_trace",
      [](const std::filesystem::path& path) { return trace_columns(read_trace(path)); },
      py::arg("path"));
}
