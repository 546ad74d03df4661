#include <eitias/pipeline.hpp>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace eitias;

namespace {

py::dict mesh_dict(const Mesh& mesh) {
  Matrix v(mesh.num_vertices(), 2);
  for (int i = 0; i < mesh.num_vertices(); ++i) v.row(i) = mesh.vertices[i].transpose();
  Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor> t(mesh.num_elements(), 3);
  for (int e = 0; e < mesh.num_elements(); ++e)
    for (int k = 0; k < 3; ++k) t(e, k) = mesh.triangles[e][k];
  py::dict d;
  d["vertices"] = v;
  d["triangles"] = t;
  d["mesh_id"] = mesh.content_id();
  return d;
}

RunConfig config_from(const std::string& json) {
  return json.empty() ? RunConfig{} : run_config_from_json(Json::parse(json));
}

// Reconstruction setup, hypermodel and IAS driver for one configuration.
class Problem {
 public:
  explicit Problem(const std::string& config_json)
      : config_(config_from(config_json)),
        layout_(ElectrodeLayout::uniform(config_.mesh.electrodes, config_.mesh.fill, config_.forward.z0)),
        setup_(make_setup(make_mesh(config_.mesh, config_.forward.d_radius), layout_.arcs, config_.forward)),
        hyper_(make_hypermodel(setup_, config_.hypermodel)) {}

  py::dict summary() const {
    py::dict d;
    d["elements"] = setup_.marked.mesh.num_elements();
    d["n"] = setup_.op.n;
    d["N"] = setup_.op.N;
    d["measurements"] = setup_.cem().measurements();
    d["mesh_id"] = setup_.mesh_id;
    return d;
  }

  Vector forward(const Vector& xi) const { return forward_map(setup_.cem(), xi); }

  py::tuple simulate(std::optional<std::uint64_t> seed) const {
    const Simulation sim = simulate_measurement(
        config_.phantom, make_mesh(config_.data_mesh, config_.forward.d_radius), layout_,
        trigonometric_basis(config_.mesh.electrodes), config_.noise_percent, seed.value_or(config_.seed),
        setup_.mesh_id, config_.phantom_subdivisions);
    return py::make_tuple(sim.measurement.data, sim.measurement.noise_std);
  }

  py::dict reconstruct(const Vector& data, double noise_std, const std::string& backend, int max_iterations,
                       std::optional<double> hybrid_r2) const {
    IasConfig cfg = config_.ias;
    cfg.backend = backend_from_string(backend);
    if (max_iterations > 0) cfg.max_outer_iterations = max_iterations;
    const IasInputs in{setup_.system.get(), &setup_.op, data, noise_std};
    IasResult r;
    {
      py::gil_scoped_release release;
      r = hybrid_r2 ? run_hybrid(in, hyper_.hyper, cfg, *hybrid_r2) : run_ias(in, hyper_.hyper, cfg);
    }
    std::vector<double> gibbs;
    for (const auto& it : r.trace) gibbs.push_back(it.after_theta.total);
    py::dict d;
    d["xi"] = xi_in_mesh_order(setup_, r.xi);
    d["zeta"] = r.zeta;
    d["theta"] = r.theta;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    d["switch_index"] = r.switch_index;
    d["gibbs"] = gibbs;
    return d;
  }

  py::dict mesh() const { return mesh_dict(setup_.marked.mesh); }
  Vector vartheta() const { return hyper_.hyper.vartheta; }

 private:
  RunConfig config_;
  ElectrodeLayout layout_;
  Setup setup_;
  HyperSetup hyper_;
};

}  // namespace

PYBIND11_MODULE(_eitias, m) {
  m.doc() = "EIT reconstruction with the IAS algorithm";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "make_mesh",
      [](int electrodes, double fill, int target, double grading, int refine) {
        return mesh_dict(make_mesh(MeshConfig{electrodes, fill, target, grading, refine}));
      },
      py::arg("electrodes") = 32, py::arg("fill") = 0.45, py::arg("target") = 5800, py::arg("grading") = 4.6,
      py::arg("refine_inside") = 0);

  m.def("theta_update", &phi, py::arg("t"), py::arg("r"), py::arg("eta"),
        "Componentwise minimizer of t^2/(2 lambda) + lambda^r - eta log(lambda).");

  m.def("backends", [] {
    std::vector<std::string> names;
    for (Backend b : all_backends()) names.push_back(to_string(b));
    return names;
  });

  m.def(
      "solve_least_squares",
      [](const Matrix& A, const Vector& b, const std::string& backend) {
        const SolveReport r = solve(backend_from_string(backend), LinearizedProblem(A, b));
        return py::make_tuple(r.alpha, r.iterations);
      },
      py::arg("A"), py::arg("b"), py::arg("backend") = "adjoint-direct",
      "Minimizes ||b - A x||^2 + ||x||^2 (CGLS stops early instead).");

  m.def(
      "phantom_field",
      [](const std::string& preset, const Matrix& points) {
        const PhantomSpec spec = phantom_from_json(Json(preset));
        Vector out(points.rows());
        for (Eigen::Index i = 0; i < points.rows(); ++i) out[i] = spec.value_at(points.row(i).transpose());
        return out;
      },
      py::arg("preset"), py::arg("points"));

  py::class_<Problem>(m, "Problem")
      .def(py::init<const std::string&>(), py::arg("config_json") = "")
      .def("summary", &Problem::summary)
      .def("mesh", &Problem::mesh)
      .def("vartheta", &Problem::vartheta)
      .def("forward", &Problem::forward, py::arg("xi"))
      .def("simulate", &Problem::simulate, py::arg("seed") = py::none())
      .def("reconstruct", &Problem::reconstruct, py::arg("data"), py::arg("noise_std"),
           py::arg("backend") = "adjoint-direct", py::arg("max_iterations") = 0, py::arg("hybrid_r2") = py::none());
}
