#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hjbpod/config.hpp"
#include "hjbpod/errors.hpp"
#include "hjbpod/experiment.hpp"
#include "hjbpod/io.hpp"
#include "hjbpod/lqr.hpp"
#include "hjbpod/rom.hpp"

namespace py = pybind11;
using namespace hjbpod;

namespace {

py::dict row_to_dict(const ErrorRow& r) {
  py::dict d;
  d["ell"] = r.ell;
  d["K"] = r.mesh_size;
  d["h"] = r.h;
  d["nodes"] = r.nodes;
  d["iterations"] = r.iterations;
  d["cost"] = r.cost;
  d["reduced_cost"] = r.reduced_cost;
  d["gap_l2"] = r.gap_l2;
  d["lqr_gap"] = r.lqr_gap;
  d["proj_sup"] = r.proj_sup;
  d["apriori"] = r.apriori;
  d["apriori_in_hypothesis"] = r.apriori_in_hypothesis;
  d["final_l2"] = r.final_l2;
  d["status"] = r.status;
  return d;
}

py::dict result_to_dict(const ExperimentResult& r) {
  py::list rows;
  for (const ErrorRow& row : r.report.rows) rows.append(row_to_dict(row));
  py::list noise;
  for (const NoiseRun& n : r.noise_runs) {
    py::dict d;
    d["ell"] = n.ell;
    d["K"] = n.mesh_size;
    d["amplitude"] = n.amplitude;
    d["run"] = n.run;
    d["seed"] = n.seed;
    d["final_l2"] = n.final_l2;
    d["cost"] = n.cost;
    d["controls_in_bounds"] = n.controls_in_bounds;
    noise.append(d);
  }
  py::dict d;
  d["rows"] = rows;
  d["noise_runs"] = noise;
  d["eigenvalues"] = r.eigenvalues;
  d["uncontrolled_cost"] = r.uncontrolled_cost;
  d["uncontrolled_final_l2"] = r.uncontrolled_final_l2;
  d["has_lqr"] = r.has_lqr;
  d["lqr_cost"] = r.lqr_cost;
  d["lqr_clipped_cost"] = r.lqr_clipped_cost;
  d["care_residual"] = r.care_residual;
  d["failed_cells"] = r.failed_cells;
  return d;
}

ExperimentConfig resolve(const std::string& preset, const std::string& config) {
  if (preset.empty() == config.empty()) {
    throw ConfigError("give exactly one of preset or config");
  }
  return preset.empty() ? load_config(config) : preset_config(preset);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "HJB value iteration on POD-reduced advection-diffusion-reaction models";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError", numerical.ptr());
  py::register_exception<GridTooLargeError>(m, "GridTooLargeError", PyExc_MemoryError);

  m.def(
      "run_experiment",
      [](const std::string& preset, const std::string& config, const std::string& out_dir,
         std::optional<std::uint64_t> seed, int workers) {
        const ExperimentConfig c = resolve(preset, config);
        RunOptions opt;
        opt.out_dir = out_dir;
        opt.seed = seed;
        opt.workers = workers;
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(c, opt);
        }
        return result_to_dict(r);
      },
      py::arg("preset") = "", py::arg("config") = "", py::arg("out_dir") = "",
      py::arg("seed") = py::none(), py::arg("workers") = 1,
      "Runs a preset or INI experiment and returns its report as a dict.");

  m.def(
      "pod_basis",
      [](const std::string& preset, int ell) {
        const ExperimentConfig c = preset_config(preset);
        const PdeConfig pde = c.pde_config();
        const ControlledSystem sys = assemble_system(pde);
        const SnapshotSet set = generate_snapshots(
            sys, pde.w0, c.snapshots.controls, TimeGrid::uniform(pde.t_e, c.snapshots.dt),
            c.snapshots.weights, c.snapshots.derivatives);
        const PodBasis b = compute_pod_basis(set, ell, sys.mass());
        return py::make_tuple(b.psi, b.eigenvalues, b.mass);
      },
      py::arg("preset"), py::arg("ell"),
      "POD basis of a preset's snapshot set: (psi, eigenvalues, mass).");

  m.def("solve_lyapunov", &solve_lyapunov, py::arg("a"), py::arg("q"),
        "Solves A^T X + X A + Q = 0 for stable A.");

  m.def(
      "solve_care",
      [](const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
        const RiccatiSolution s = solve_care(CareProblem{a, b, q, r});
        return py::make_tuple(s.p, s.gain, s.residual);
      },
      py::arg("a"), py::arg("b"), py::arg("q"), py::arg("r"),
      "Stabilizing CARE solution: (P, gain, residual).");

  py::class_<ValueGrid>(m, "ValueGrid")
      .def_property_readonly("dim", &ValueGrid::dim)
      .def_property_readonly("size", &ValueGrid::size)
      .def_property_readonly("mesh_size", &ValueGrid::mesh_size)
      .def_property_readonly("h", &ValueGrid::h)
      .def_property_readonly("counts", &ValueGrid::counts)
      .def_property_readonly("lower", [](const ValueGrid& g) { return g.box().lower; })
      .def_property_readonly("upper", [](const ValueGrid& g) { return g.box().upper; })
      .def_property_readonly("values",
                             [](const ValueGrid& g) {
                               return Eigen::Map<const Vector>(
                                   g.values().data(), static_cast<Eigen::Index>(g.size()));
                             })
      .def_readonly("converged", &ValueGrid::converged)
      .def_readonly("iterations", &ValueGrid::iterations)
      .def_readonly("residual", &ValueGrid::residual)
      .def("node", &ValueGrid::node, py::arg("index"))
      .def(
          "interpolate", [](const ValueGrid& g, const Vector& p) { return g.interpolate(p); },
          py::arg("point"));

  m.def("load_value_grid", &load_value_grid, py::arg("path"),
        "Reads a value grid written with --value-out.");
}
