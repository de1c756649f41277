#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sgfem/adapt.hpp"
#include "sgfem/chaos.hpp"
#include "sgfem/config.hpp"
#include "sgfem/errors.hpp"
#include "sgfem/field.hpp"
#include "sgfem/mesh.hpp"
#include "sgfem/multi_index.hpp"
#include "sgfem/runner.hpp"

namespace py = pybind11;
using namespace sgfem;

namespace {

py::dict row_to_dict(const IterationRecord& row) {
  py::dict d;
  d["iter"] = row.iter;
  d["branch"] = row.branch;
  d["n_triangles"] = row.n_triangles;
  d["dims"] = row.dims;
  d["dofs"] = row.dofs;
  d["eta_det"] = row.eta_det;
  d["eta_sto"] = row.eta_sto;
  d["eta"] = row.eta;
  d["mc_error"] = row.mc_error;
  d["mc_stderr"] = row.mc_stderr;
  d["quasi_err"] = row.quasi_err;
  d["delta"] = row.delta;
  d["marked_elements"] = row.marked_elements;
  d["marked_modes"] = row.marked_modes;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive stochastic Galerkin FEM for lognormal diffusion problems";

  py::register_exception<Error>(m, "SgfemError");

  m.def("hermite_eval", &hermite_eval, py::arg("variance"), py::arg("degree"), py::arg("point"));
  m.def("triple_product_1d", &triple_product_1d, py::arg("variance"), py::arg("i"), py::arg("j"), py::arg("k"));
  m.def("riemann_zeta", &riemann_zeta, py::arg("s"));

  py::class_<MultiIndexSet>(m, "MultiIndexSet")
      .def(py::init<std::vector<int>>())
      .def_property_readonly("dims", &MultiIndexSet::dims)
      .def("__len__", &MultiIndexSet::size)
      .def("contains", &MultiIndexSet::contains)
      .def("enumerate", &MultiIndexSet::enumerate);

  m.def("index_set_boundary", &index_set_boundary, py::arg("lambda_set"), py::arg("dhat"));
  m.def("lookahead_slab", &lookahead_slab, py::arg("lambda_set"), py::arg("mode"), py::arg("q"), py::arg("dhat_m"));

  py::class_<ModeScaling>(m, "ModeScaling")
      .def(py::init<std::vector<double>, double, double>(), py::arg("gamma_sup"), py::arg("rho"), py::arg("theta"))
      .def("sigma", &ModeScaling::sigma, py::arg("mode"), py::arg("scale") = 1.0)
      .def("zeta_moment", &ModeScaling::zeta_moment)
      .def("zeta_defect", &ModeScaling::zeta_defect);

  py::class_<Mesh2D>(m, "Mesh2D")
      .def_property_readonly("n_vertices", &Mesh2D::vertex_count)
      .def_property_readonly("n_triangles", &Mesh2D::triangle_count)
      .def("total_area", &Mesh2D::total_area)
      .def("min_angle", &Mesh2D::min_angle)
      .def("write", [](const Mesh2D& mesh, const std::string& path) { write_mesh_file(mesh, path); });

  m.def("initial_lshape", &initial_lshape, py::arg("h0"));
  m.def("initial_unit_square", &initial_unit_square, py::arg("h0"));
  m.def("uniform_refine", &uniform_refine, py::arg("mesh"), py::arg("levels"));
  m.def(
      "bisect",
      [](const Mesh2D& mesh, const std::vector<int>& marked) { return bisect(mesh, marked).first; },
      py::arg("mesh"), py::arg("marked"));

  m.def(
      "doerfler_mark_det",
      [](const std::vector<double>& indicators, double theta) {
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(indicators.data(),
                                                              static_cast<Eigen::Index>(indicators.size()));
        return doerfler_mark_det(v, theta);
      },
      py::arg("indicators"), py::arg("theta"));
  m.def(
      "doerfler_mark_sto",
      [](const std::vector<double>& slabs, double theta, double total) {
        return doerfler_mark_sto(slabs, {}, theta, total);
      },
      py::arg("slab_values"), py::arg("theta"), py::arg("total"));

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("domain", &RunConfig::domain)
      .def_readwrite("mesh_h0", &RunConfig::mesh_h0)
      .def_readwrite("field_modes", &RunConfig::field_modes)
      .def_readwrite("field_sigma", &RunConfig::field_sigma)
      .def_readwrite("field_rho", &RunConfig::field_rho)
      .def_readwrite("field_theta", &RunConfig::field_theta)
      .def_readwrite("field_tail_threshold", &RunConfig::field_tail_threshold)
      .def_readwrite("theta_det", &RunConfig::theta_det)
      .def_readwrite("theta_sto", &RunConfig::theta_sto)
      .def_readwrite("c_eq", &RunConfig::c_eq)
      .def_readwrite("lookahead", &RunConfig::lookahead)
      .def_readwrite("max_iterations", &RunConfig::max_iterations)
      .def_readwrite("omega", &RunConfig::omega)
      .def_readwrite("tau", &RunConfig::tau)
      .def_readwrite("initial_degree", &RunConfig::initial_degree)
      .def_readwrite("solver_tol", &RunConfig::solver_tol)
      .def_readwrite("solver_maxit", &RunConfig::solver_maxit)
      .def_readwrite("mc_samples", &RunConfig::mc_samples)
      .def_readwrite("mc_seed", &RunConfig::mc_seed)
      .def_readwrite("mc_uplifts", &RunConfig::mc_uplifts)
      .def_readwrite("mc_cadence", &RunConfig::mc_cadence)
      .def_readwrite("threads", &RunConfig::threads)
      .def_readwrite("write_svg", &RunConfig::write_svg);

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config_text", &parse_config_text, py::arg("text"));

  m.def(
      "run_pipeline",
      [](const RunConfig& config) {
        const BenchmarkArtifacts artifacts = run_pipeline(config);
        py::list rows;
        for (const auto& row : artifacts.ledger.rows) rows.append(row_to_dict(row));
        py::dict out;
        out["rows"] = rows;
        out["aborted"] = artifacts.run.aborted;
        out["truncation_residual"] = artifacts.truncation;
        return out;
      },
      py::arg("config"));
  m.def("run_benchmark", &run_benchmark, py::arg("config"), py::arg("out_dir"));
  m.def("ledger_csv",
        [](const RunConfig& config) {
          const BenchmarkArtifacts artifacts = run_pipeline(config);
          return ledger_csv(artifacts.ledger);
        });
}
