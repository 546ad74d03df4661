#include <eitias/pipeline.hpp>

namespace eitias {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

void read_mesh_config(const Json& j, MeshConfig& m) {
  m.electrodes = j.value("electrodes", m.electrodes);
  m.fill = j.value("fill", m.fill);
  m.target = j.value("target", m.target);
  m.grading = j.value("grading", m.grading);
  m.refine_inside = j.value("refine_inside", m.refine_inside);
  require(m.electrodes >= 4 && m.electrodes % 2 == 0, "electrode count must be even and at least 4");
  require(m.fill > 0 && m.fill < 1, "filling fraction must lie in (0, 1)");
  require(m.target >= 64, "target element count must be at least 64");
  require(m.grading >= 1, "grading must be at least 1");
  require(m.refine_inside >= 0 && m.refine_inside <= 4, "refine_inside must lie in [0, 4]");
}

Json mesh_config_json(const MeshConfig& m) {
  return {{"electrodes", m.electrodes}, {"fill", m.fill}, {"target", m.target}, {"grading", m.grading}, {"refine_inside", m.refine_inside}};
}

}  // namespace

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  require(j.is_object(), "run configuration must be a JSON object");
  RunConfig c;
  if (j.contains("mesh")) c.mesh_path = resolve(base_dir, j.at("mesh").get<std::string>());
  if (j.contains("measurement")) c.measurement_path = resolve(base_dir, j.at("measurement").get<std::string>());
  if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
  if (j.contains("mesh_generation")) read_mesh_config(j.at("mesh_generation"), c.mesh);
  if (j.contains("data_mesh")) read_mesh_config(j.at("data_mesh"), c.data_mesh);

  if (j.contains("forward")) {
    const Json& f = j.at("forward");
    c.forward.sigma0 = f.value("sigma0", c.forward.sigma0);
    c.forward.z0 = f.value("z0", c.forward.z0);
    c.forward.d_radius = f.value("d_radius", c.forward.d_radius);
  }
  require(c.forward.sigma0 > 0 && c.forward.z0 > 0, "sigma0 and z0 must be positive");
  require(c.forward.d_radius > 0 && c.forward.d_radius < 1, "d_radius must lie in (0, 1)");

  if (j.contains("hypermodel")) {
    const Json& h = j.at("hypermodel");
    c.hypermodel.r = h.value("r", c.hypermodel.r);
    if (h.contains("eta") && h.contains("beta")) throw InputError("give either eta or beta, not both");
    if (h.contains("beta")) {
      c.hypermodel.beta = h.at("beta").get<double>();
      c.hypermodel.eta.reset();
    }
    if (h.contains("eta")) c.hypermodel.eta = h.at("eta").get<double>();
    if (h.contains("vartheta_rule")) {
      const Json& v = h.at("vartheta_rule");
      c.hypermodel.vartheta_rule.max_value = v.value("max_value", c.hypermodel.vartheta_rule.max_value);
      c.hypermodel.vartheta_rule.cap_ratio = v.value("cap_ratio", c.hypermodel.vartheta_rule.cap_ratio);
    }
  }

  if (j.contains("ias")) {
    const Json& a = j.at("ias");
    IasConfig& ias = c.ias;
    ias.tolerance = a.value("tolerance", ias.tolerance);
    ias.max_outer_iterations = a.value("max_outer_iterations", ias.max_outer_iterations);
    ias.inner_linearizations = a.value("inner_linearizations", ias.inner_linearizations);
    ias.stop_on_tolerance = a.value("stop_on_tolerance", ias.stop_on_tolerance);
    if (a.contains("backend")) ias.backend = backend_from_string(a.at("backend").get<std::string>());
    ias.solver.lanczos.tol = a.value("lanczos_tol", ias.solver.lanczos.tol);
    ias.solver.lanczos.relative = a.value("lanczos_relative", ias.solver.lanczos.relative);
    ias.solver.lanczos.reorthogonalize = a.value("lanczos_reorthogonalize", ias.solver.lanczos.reorthogonalize);
    ias.solver.cgls.semiconvergence = a.value("cgls_semiconvergence", ias.solver.cgls.semiconvergence);
    ias.solver.direct.dense_limit = a.value("dense_limit", ias.solver.direct.dense_limit);
    ias.theta_init = a.value("theta_init", ias.theta_init);
    ias.evaluate_gibbs = a.value("evaluate_gibbs", ias.evaluate_gibbs);
    ias.sigma_floor_ratio = a.value("sigma_floor_ratio", ias.sigma_floor_ratio);
    ias.whitening_std = a.value("whitening_std", ias.whitening_std);
    if (a.contains("hybrid") && !a.at("hybrid").is_null()) {
      const Json& h = a.at("hybrid");
      HybridConfig hc;
      hc.r2 = h.value("r2", hc.r2);
      hc.phase2_iterations = h.value("phase2_iterations", hc.phase2_iterations);
      ias.hybrid = hc;
    }
    ias.validate();
  }

  if (j.contains("phantom")) c.phantom = phantom_from_json(j.at("phantom"));
  c.noise_percent = j.value("noise_percent", c.noise_percent);
  c.seed = j.value("seed", c.seed);
  c.phantom_subdivisions = j.value("phantom_subdivisions", c.phantom_subdivisions);
  require(c.noise_percent >= 0, "noise_percent must be non-negative");

  if (j.contains("render")) {
    const Json& r = j.at("render");
    c.render.size = r.value("size", c.render.size);
    if (r.contains("vmin")) c.render.vmin = r.at("vmin").get<double>();
    if (r.contains("vmax")) c.render.vmax = r.at("vmax").get<double>();
    c.render.draw_electrodes = r.value("electrodes", c.render.draw_electrodes);
  }
  return c;
}

Json run_config_to_json(const RunConfig& c) {
  Json j;
  if (!c.mesh_path.empty()) j["mesh"] = c.mesh_path.string();
  if (!c.measurement_path.empty()) j["measurement"] = c.measurement_path.string();
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir.string();
  j["mesh_generation"] = mesh_config_json(c.mesh);
  j["data_mesh"] = mesh_config_json(c.data_mesh);
  j["forward"] = {{"sigma0", c.forward.sigma0}, {"z0", c.forward.z0}, {"d_radius", c.forward.d_radius}};
  Json h = {{"r", c.hypermodel.r},
            {"vartheta_rule",
             {{"max_value", c.hypermodel.vartheta_rule.max_value}, {"cap_ratio", c.hypermodel.vartheta_rule.cap_ratio}}}};
  if (c.hypermodel.eta) h["eta"] = *c.hypermodel.eta;
  if (c.hypermodel.beta) h["beta"] = *c.hypermodel.beta;
  j["hypermodel"] = h;
  const IasConfig& a = c.ias;
  Json ias = {{"tolerance", a.tolerance},
              {"max_outer_iterations", a.max_outer_iterations},
              {"inner_linearizations", a.inner_linearizations},
              {"stop_on_tolerance", a.stop_on_tolerance},
              {"backend", to_string(a.backend)},
              {"lanczos_tol", a.solver.lanczos.tol},
              {"lanczos_relative", a.solver.lanczos.relative},
              {"lanczos_reorthogonalize", a.solver.lanczos.reorthogonalize},
              {"cgls_semiconvergence", a.solver.cgls.semiconvergence},
              {"dense_limit", a.solver.direct.dense_limit},
              {"theta_init", a.theta_init},
              {"evaluate_gibbs", a.evaluate_gibbs},
              {"sigma_floor_ratio", a.sigma_floor_ratio},
              {"whitening_std", a.whitening_std}};
  if (a.hybrid) ias["hybrid"] = {{"r2", a.hybrid->r2}, {"phase2_iterations", a.hybrid->phase2_iterations}};
  j["ias"] = ias;
  j["phantom"] = phantom_to_json(c.phantom);
  j["noise_percent"] = c.noise_percent;
  j["seed"] = c.seed;
  j["phantom_subdivisions"] = c.phantom_subdivisions;
  Json r = {{"size", c.render.size}, {"electrodes", c.render.draw_electrodes}};
  if (c.render.vmin) r["vmin"] = *c.render.vmin;
  if (c.render.vmax) r["vmax"] = *c.render.vmax;
  j["render"] = r;
  return j;
}

ElectrodeLayout electrode_layout(const std::vector<Arc>& arcs, double z0) {
  ElectrodeLayout layout;
  layout.arcs = arcs;
  layout.contact_impedance = Vector::Constant(static_cast<Eigen::Index>(arcs.size()), z0);
  layout.validate();
  return layout;
}

Mesh make_mesh(const MeshConfig& config, double conforming_radius) {
  const ElectrodeLayout layout = ElectrodeLayout::uniform(config.electrodes, config.fill, 1.0);
  DiscMeshOptions opt;
  opt.conforming_radius = conforming_radius;
  const Mesh mesh = build_disc_mesh(layout, config.target, config.grading, opt);
  return config.refine_inside > 0 ? refine_inside(mesh, conforming_radius, config.refine_inside) : mesh;
}

Setup make_setup(const Mesh& mesh, const std::vector<Arc>& arcs, const ForwardConfig& forward) {
  Setup s;
  s.arcs = arcs;
  s.mesh_id = mesh.content_id();
  s.marked = mark_subdomain(mesh, forward.d_radius);
  s.op = build_increment_operator(s.marked.mesh, s.marked.subdomain);
  const ElectrodeLayout layout = electrode_layout(arcs, forward.z0);
  s.system = std::make_shared<const CemSystem>(s.marked.mesh, s.marked.subdomain.n, layout,
                                               trigonometric_basis(layout.count()), forward.sigma0);
  return s;
}

HyperSetup make_hypermodel(const Setup& setup, const HyperConfig& config) {
  const FrameSolution f0 = solve_frame(setup.cem(), Vector::Zero(setup.cem().n()));
  HyperSetup out;
  out.vartheta = compute_vartheta(jacobian_adjoint(f0, setup.cem()), setup.op, config.vartheta_rule);
  if (config.beta)
    out.hyper = HyperModel{config.r, *config.beta, out.vartheta.vartheta};
  else
    out.hyper = HyperModel::from_eta(config.r, config.eta.value_or(1e-5), out.vartheta.vartheta);
  out.hyper.validate();
  return out;
}

Vector xi_in_mesh_order(const Setup& setup, const Vector& xi) {
  const auto& perm = setup.marked.subdomain.permutation;
  Vector out = Vector::Zero(static_cast<Eigen::Index>(perm.size()));
  for (int i = 0; i < setup.marked.subdomain.n; ++i) out[perm[i]] = xi[i];
  return out;
}

Vector conductivity_field(const Setup& setup, const Vector& xi) {
  Vector out = Vector::Constant(setup.marked.mesh.num_elements(), setup.cem().sigma0());
  out.head(setup.marked.subdomain.n) += xi;
  return out;
}

Json field_to_json(const Setup& setup, const Vector& xi, const IasResult* result) {
  Json j;
  j["mesh_id"] = setup.mesh_id;
  j["sigma0"] = setup.cem().sigma0();
  j["n"] = setup.marked.subdomain.n;
  j["d_radius"] = setup.marked.subdomain.radius;
  j["subdomain_elements"] = std::vector<int>(setup.marked.subdomain.permutation.begin(),
                                             setup.marked.subdomain.permutation.begin() + setup.marked.subdomain.n);
  j["xi"] = to_json(xi);
  j["sigma"] = to_json(Vector((setup.cem().sigma0() + xi_in_mesh_order(setup, xi).array()).matrix()));
  if (result) {
    j["iterations"] = result->iterations;
    j["converged"] = result->converged;
    j["switch_index"] = result->switch_index;
    j["zeta"] = to_json(result->zeta);
    j["theta"] = to_json(result->theta);
    Json hist = Json::array();
    for (const auto& it : result->trace)
      hist.push_back({{"iteration", it.iteration},
                      {"phase", it.phase},
                      {"gibbs_after_zeta", it.after_zeta.total},
                      {"gibbs_after_theta", it.after_theta.total},
                      {"fidelity", it.after_theta.fidelity},
                      {"delta_theta_rel", it.delta_theta_rel},
                      {"compressibility", it.compressibility}});
    j["history"] = hist;
    if (!result->log.empty()) j["log"] = result->log;
  }
  return j;
}

}  // namespace eitias
