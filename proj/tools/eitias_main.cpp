#include <eitias/mesh_io.hpp>
#include <eitias/pipeline.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace eitias;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

struct Context {
  RunConfig config;
  fs::path out;
  bool quiet = false;

  void say(const std::string& line) const {
    if (!quiet) std::cout << line << '\n';
  }
  fs::path file(const std::string& name) const { return out / name; }
};

Context make_context(const Globals& g) {
  Context ctx;
  if (!g.config.empty()) {
    const fs::path path(g.config);
    require(fs::exists(path), "config file not found: " + g.config);
    ctx.config = run_config_from_json(read_json(path), path.parent_path());
  }
  if (g.seed) ctx.config.seed = *g.seed;
  if (!g.out.empty())
    ctx.out = g.out;
  else if (!ctx.config.output_dir.empty())
    ctx.out = ctx.config.output_dir;
  else
    ctx.out = ".";
  fs::create_directories(ctx.out);
  ctx.quiet = g.quiet;
  return ctx;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string sci(double v) { return fmt("%.9e", v); }

std::vector<Arc> uniform_arcs(const MeshConfig& m) { return ElectrodeLayout::uniform(m.electrodes, m.fill, 1.0).arcs; }

Setup load_setup(const Context& ctx, const std::string& mesh_arg) {
  const std::string path = !mesh_arg.empty() ? mesh_arg : ctx.config.mesh_path.string();
  if (!path.empty()) {
    MeshFile mf = read_mesh(path);
    ForwardConfig f = ctx.config.forward;
    if (mf.d_radius) f.d_radius = *mf.d_radius;
    return make_setup(mf.mesh, mf.electrode_arcs, f);
  }
  const Mesh mesh = make_mesh(ctx.config.mesh, ctx.config.forward.d_radius);
  return make_setup(mesh, uniform_arcs(ctx.config.mesh), ctx.config.forward);
}

MeasurementSet load_measurement(const Context& ctx, const std::string& arg, const Setup& setup) {
  const std::string path = !arg.empty() ? arg : ctx.config.measurement_path.string();
  require(!path.empty(), "a measurement file is required (--measurement or the config key \"measurement\")");
  MeasurementSet ms = read_measurement(path);
  require(ms.L == static_cast<int>(setup.arcs.size()),
          "measurement has " + std::to_string(ms.L) + " electrodes but the mesh has " +
              std::to_string(setup.arcs.size()));
  require(ms.basis == "trig", "only the trigonometric current basis is supported for reconstruction");
  require(ms.m() == setup.cem().measurements(), "measurement length does not match L(L-1)");
  if (ms.mesh_id == setup.mesh_id) ctx.say("warning: inverse crime, data were simulated on the reconstruction mesh");
  return ms;
}

IasInputs ias_inputs(const Setup& setup, const MeasurementSet& ms) {
  return IasInputs{setup.system.get(), &setup.op, ms.data, ms.noise_std};
}

void print_iterations(const Context& ctx, const IasResult& r) {
  for (const auto& it : r.trace) {
    std::ostringstream line;
    line << "iter " << it.iteration << " phase " << it.phase << "  G " << fmt("%.6g", it.after_theta.total)
         << "  dtheta " << fmt("%.4g", it.delta_theta_rel) << "  compress " << it.compressibility;
    for (const auto& in : it.inner) {
      line << "  [" << to_string(in.report.backend) << " " << in.report.iterations;
      for (const auto& s : in.shadows) line << ", " << to_string(s.backend) << " " << s.iterations;
      line << "]";
    }
    ctx.say(line.str());
  }
}

std::string history_csv(const IasResult& r) {
  std::ostringstream out;
  out << "ias_iter,phase,gibbs_after_zeta,gibbs_after_theta,fidelity,penalty,hyper,delta_theta_rel,compressibility\n";
  for (const auto& it : r.trace)
    out << it.iteration << ',' << it.phase << ',' << sci(it.after_zeta.total) << ',' << sci(it.after_theta.total) << ','
        << sci(it.after_theta.fidelity) << ',' << sci(it.after_theta.penalty) << ',' << sci(it.after_theta.hyper) << ','
        << sci(it.delta_theta_rel) << ',' << it.compressibility << '\n';
  return out.str();
}

void render_field(const Context& ctx, const Setup& setup, const Vector& values, const std::string& name,
                  const std::string& title, bool diverging) {
  RenderOptions opt = ctx.config.render;
  opt.title = title;
  opt.diverging = diverging;
  if (diverging) opt.vmin = opt.vmax = std::nullopt;
  write_file_atomic(ctx.file(name), render_svg(setup.marked.mesh, values, opt, setup.arcs));
  ctx.say("wrote " + ctx.file(name).string());
}

// mesh ----------------------------------------------------------------------

struct MeshArgs {
  std::optional<int> electrodes;
  std::optional<double> fill;
  std::optional<int> target;
  std::optional<double> grading;
  std::optional<double> d_radius;
  std::optional<int> refine_inside;
  bool data = false;
  std::string output = "mesh.json";
};

int cmd_mesh(const Context& ctx, const MeshArgs& a) {
  MeshConfig mc = a.data ? ctx.config.data_mesh : ctx.config.mesh;
  if (a.electrodes) mc.electrodes = *a.electrodes;
  if (a.fill) mc.fill = *a.fill;
  if (a.target) mc.target = *a.target;
  if (a.grading) mc.grading = *a.grading;
  if (a.refine_inside) mc.refine_inside = *a.refine_inside;
  const double d = a.d_radius.value_or(ctx.config.forward.d_radius);
  require(mc.electrodes >= 2, "at least two electrodes are required");
  require(mc.fill > 0 && mc.fill < 1, "fill must lie in (0, 1)");
  require(mc.target >= 64, "target must be at least 64 elements");
  require(mc.grading >= 1, "grading must be at least 1");
  require(mc.refine_inside >= 0, "refine-inside must be non-negative");
  require(d > 0 && d < 1, "d-radius must lie in (0, 1)");

  const Mesh mesh = make_mesh(mc, d);
  const MarkedMesh marked = mark_subdomain(mesh, d);
  const IncrementOperator op = build_increment_operator(marked.mesh, marked.subdomain);
  write_mesh(ctx.file(a.output), mesh, uniform_arcs(mc), d);
  ctx.say("n_t " + std::to_string(mesh.num_elements()) + "  n_v " + std::to_string(mesh.num_vertices()) + "  n " +
          std::to_string(op.n) + "  N " + std::to_string(op.N));
  ctx.say("mesh_id " + mesh.content_id());
  ctx.say("wrote " + ctx.file(a.output).string());
  return 0;
}

// simulate ------------------------------------------------------------------

struct SimulateArgs {
  std::string mesh;
  std::string recon_mesh;
  std::string phantom;
  std::optional<double> noise;
  std::optional<int> subdivisions;
  bool render = false;
  std::string output = "measurement.json";
};

int cmd_simulate(const Context& ctx, const SimulateArgs& a) {
  const RunConfig& c = ctx.config;
  Mesh data_mesh;
  std::vector<Arc> arcs;
  if (!a.mesh.empty()) {
    MeshFile mf = read_mesh(a.mesh);
    data_mesh = std::move(mf.mesh);
    arcs = std::move(mf.electrode_arcs);
  } else {
    data_mesh = make_mesh(c.data_mesh, c.forward.d_radius);
    arcs = uniform_arcs(c.data_mesh);
  }
  std::string recon_id;
  if (!a.recon_mesh.empty())
    recon_id = read_mesh(a.recon_mesh).mesh_id;
  else if (!c.mesh_path.empty())
    recon_id = read_mesh(c.mesh_path).mesh_id;
  else
    recon_id = make_mesh(c.mesh, c.forward.d_radius).content_id();

  PhantomSpec phantom = c.phantom;
  if (!a.phantom.empty()) {
    if (a.phantom == "one-inclusion" || a.phantom == "two-inclusions")
      phantom = phantom_from_json(Json(a.phantom));
    else
      phantom = phantom_from_json(read_json(a.phantom));
  }
  const double noise = a.noise.value_or(c.noise_percent);
  require(noise >= 0, "noise must be non-negative");
  const int sub = a.subdivisions.value_or(c.phantom_subdivisions);
  require(sub >= 1, "subdivisions must be at least 1");

  const ElectrodeLayout layout = electrode_layout(arcs, c.forward.z0);
  const Simulation sim =
      simulate_measurement(phantom, data_mesh, layout, trigonometric_basis(layout.count()), noise, c.seed, recon_id, sub);
  write_measurement(ctx.file(a.output), sim.measurement);
  ctx.say("omega " + fmt("%.9g", sim.measurement.noise_std) + "  max|U| " + fmt("%.9g", sim.max_abs_voltage) + "  m " +
          std::to_string(sim.measurement.m()) + "  seed " + std::to_string(c.seed));
  for (const auto& w : sim.measurement.warnings) ctx.say("warning: " + w);
  ctx.say("wrote " + ctx.file(a.output).string());
  if (a.render) {
    RenderOptions opt = c.render;
    opt.title = "phantom";
    const Vector sigma = (phantom.sigma0 + rasterize_phantom(phantom, data_mesh, sub).array()).matrix();
    write_file_atomic(ctx.file("phantom.svg"), render_svg(data_mesh, sigma, opt, arcs));
    ctx.say("wrote " + ctx.file("phantom.svg").string());
  }
  return 0;
}

// reconstruct ---------------------------------------------------------------

struct SolverArgs {
  std::string backend;
  std::optional<int> max_iterations;
  std::optional<double> tolerance;
  bool semiconvergence = false;
};

void apply_solver_args(IasConfig& cfg, const SolverArgs& a) {
  if (!a.backend.empty()) cfg.backend = backend_from_string(a.backend);
  if (a.max_iterations) cfg.max_outer_iterations = *a.max_iterations;
  if (a.tolerance) cfg.tolerance = *a.tolerance;
  if (a.semiconvergence) cfg.solver.cgls.semiconvergence = true;
  cfg.validate();
}

struct ReconstructArgs {
  std::string mesh;
  std::string measurement;
  SolverArgs solver;
  std::optional<double> hybrid_r2;
  std::optional<int> phase2_iterations;
  std::vector<std::string> shadows;
  bool render = false;
};

int cmd_reconstruct(const Context& ctx, const ReconstructArgs& a) {
  const Setup setup = load_setup(ctx, a.mesh);
  const MeasurementSet ms = load_measurement(ctx, a.measurement, setup);
  IasConfig cfg = ctx.config.ias;
  apply_solver_args(cfg, a.solver);
  for (const auto& s : a.shadows) cfg.shadow_backends.push_back(backend_from_string(s));
  if (a.hybrid_r2 || a.phase2_iterations) {
    HybridConfig h = cfg.hybrid.value_or(HybridConfig{});
    if (a.hybrid_r2) h.r2 = *a.hybrid_r2;
    if (a.phase2_iterations) h.phase2_iterations = *a.phase2_iterations;
    cfg.hybrid = h;
  }
  const HyperSetup hs = make_hypermodel(setup, ctx.config.hypermodel);
  ctx.say("n_t " + std::to_string(setup.marked.mesh.num_elements()) + "  n " + std::to_string(setup.op.n) + "  N " +
          std::to_string(setup.op.N) + "  m " + std::to_string(ms.m()) + "  backend " + to_string(cfg.backend));

  const IasInputs in = ias_inputs(setup, ms);
  const IasResult result = cfg.hybrid ? run_hybrid(in, hs.hyper, cfg, cfg.hybrid->r2) : run_ias(in, hs.hyper, cfg);
  print_iterations(ctx, result);
  for (const auto& l : result.log) ctx.say(l);
  ctx.say(std::string(result.converged ? "converged" : "stopped without meeting the tolerance") + " after " +
          std::to_string(result.iterations) + " iterations" +
          (result.switch_index >= 0 ? ", switched after " + std::to_string(result.switch_index) : std::string()));

  Json field = field_to_json(setup, result.xi, &result);
  field["backend"] = to_string(cfg.backend);
  field["hypermodel"] = {{"r", result.hyper.r}, {"beta", result.hyper.beta}, {"eta", result.hyper.eta()}};
  write_json_atomic(ctx.file("field.json"), field);
  write_file_atomic(ctx.file("trace.csv"), trace_csv(result));
  write_file_atomic(ctx.file("history.csv"), history_csv(result));
  ctx.say("wrote " + ctx.file("field.json").string() + ", trace.csv, history.csv");
  if (a.render) render_field(ctx, setup, conductivity_field(setup, result.xi), "field.svg", "conductivity", false);
  return 0;
}

// bench ---------------------------------------------------------------------

struct BenchArgs {
  std::string mesh;
  std::string measurement;
  SolverArgs solver;
  std::vector<std::string> backends;
};

int cmd_bench(const Context& ctx, const BenchArgs& a) {
  const Setup setup = load_setup(ctx, a.mesh);
  const MeasurementSet ms = load_measurement(ctx, a.measurement, setup);
  IasConfig cfg = ctx.config.ias;
  apply_solver_args(cfg, a.solver);
  cfg.hybrid.reset();
  std::vector<Backend> backends;
  if (a.backends.empty())
    backends = all_backends();
  else
    for (const auto& b : a.backends) backends.push_back(backend_from_string(b));
  cfg.shadow_backends.clear();
  for (Backend b : backends)
    if (b != cfg.backend) cfg.shadow_backends.push_back(b);

  const HyperSetup hs = make_hypermodel(setup, ctx.config.hypermodel);
  const IasResult result = run_ias(ias_inputs(setup, ms), hs.hyper, cfg);
  print_iterations(ctx, result);

  // Every backend solves the inner problems of the same trajectory, one after another.
  std::vector<Backend> order{cfg.backend};
  order.insert(order.end(), cfg.shadow_backends.begin(), cfg.shadow_backends.end());
  std::map<Backend, double> total;
  std::map<Backend, long> iterations;
  std::map<Backend, int> solves;
  std::ostringstream times, krylov;
  times << "ias_iter,linearization,backend,iterations,residual,wall_time_ms,cumulative_ms\n";
  krylov << "ias_iter,linearization";
  for (Backend b : order) krylov << ',' << to_string(b);
  krylov << '\n';
  for (const auto& it : result.trace)
    for (const auto& in : it.inner) {
      std::vector<const SolveReport*> reports{&in.report};
      for (const auto& s : in.shadows) reports.push_back(&s);
      krylov << in.outer << ',' << in.linearization;
      for (const SolveReport* r : reports) {
        total[r->backend] += r->wall_time_ms;
        iterations[r->backend] += r->iterations;
        ++solves[r->backend];
        times << in.outer << ',' << in.linearization << ',' << to_string(r->backend) << ',' << r->iterations << ','
              << sci(r->error_monitor) << ',' << fmt("%.3f", r->wall_time_ms) << ','
              << fmt("%.3f", total[r->backend]) << '\n';
        krylov << ',' << r->iterations;
      }
      krylov << '\n';
    }
  std::ostringstream summary;
  summary << "backend,solves,total_ms,mean_iterations\n";
  ctx.say("backend            solves   total_ms   mean_iterations");
  for (Backend b : order) {
    const double mean = solves[b] ? static_cast<double>(iterations[b]) / solves[b] : 0.0;
    summary << to_string(b) << ',' << solves[b] << ',' << fmt("%.3f", total[b]) << ',' << fmt("%.3f", mean) << '\n';
    char line[128];
    std::snprintf(line, sizeof line, "%-18s %6d %10.1f %17.2f", to_string(b).c_str(), solves[b], total[b], mean);
    ctx.say(line);
  }
  write_file_atomic(ctx.file("bench.csv"), times.str());
  write_file_atomic(ctx.file("bench_summary.csv"), summary.str());
  write_file_atomic(ctx.file("bench_krylov.csv"), krylov.str());
  ctx.say("wrote " + ctx.file("bench.csv").string() + ", bench_summary.csv, bench_krylov.csv");
  return 0;
}

// convexity -----------------------------------------------------------------

struct ConvexityArgs {
  std::string mesh;
  std::string measurement;
  std::string state;
  std::optional<double> omega;
  std::optional<int> dense_limit;
  bool matrices = false;
};

int cmd_convexity(const Context& ctx, const ConvexityArgs& a) {
  require(ctx.config.hypermodel.r == 1.0, "the convexity probe requires the r = 1 hypermodel");
  const Setup setup = load_setup(ctx, a.mesh);
  const MeasurementSet ms = load_measurement(ctx, a.measurement, setup);
  const HyperSetup hs = make_hypermodel(setup, ctx.config.hypermodel);
  const double omega = a.omega.value_or(ms.noise_std);
  require(omega > 0, "omega must be positive; pass --omega for noiseless data");

  Vector zeta = Vector::Zero(setup.op.N);
  Vector theta = hs.hyper.vartheta;
  if (!a.state.empty()) {
    const Json st = read_json(a.state);
    zeta = vector_from_json(st.at("zeta"));
    theta = vector_from_json(st.at("theta"));
    require(zeta.size() == setup.op.N && theta.size() == setup.op.N, "state dimensions do not match the mesh");
    require((theta.array() > 0).all(), "state theta must be positive");
  }
  const Vector xi = apply_pseudoinverse(setup.op, &theta, zeta);
  const Matrix gamma = data_coefficients(setup.cem().basis().E, ms.data);
  ConvexityOptions opt;
  if (a.dense_limit) opt.dense_limit = *a.dense_limit;
  const ConvexityReport rep = convexity_probe(setup.cem(), setup.op, xi, gamma, omega, zeta, theta, hs.hyper, opt);
  write_json_atomic(ctx.file("convexity.json"), convexity_to_json(rep, a.matrices));
  ctx.say("min eig D " + sci(rep.min_eig_d) + "  min eig C+D " + sci(rep.min_eig_cd) + "  min eig H " +
          sci(rep.min_eig_hessian) + "  ||H|| " + sci(rep.norm_hessian) + (rep.hessian_dense ? "" : " (iterative)"));
  ctx.say(std::string("D psd ") + (rep.d_psd() ? "yes" : "no") + "  Hessian psd " + (rep.hessian_psd() ? "yes" : "no"));
  ctx.say("wrote " + ctx.file("convexity.json").string());
  return 0;
}

// compare -------------------------------------------------------------------

struct CompareArgs {
  std::string mesh;
  std::string measurement;
  SolverArgs solver;
  std::string map_backend = "adjoint-direct";
  std::string qmap_backend = "cgls-qmap";
  int tail = 3;
};

int cmd_compare(const Context& ctx, const CompareArgs& a) {
  const Setup setup = load_setup(ctx, a.mesh);
  const MeasurementSet ms = load_measurement(ctx, a.measurement, setup);
  IasConfig cfg = ctx.config.ias;
  apply_solver_args(cfg, a.solver);
  cfg.hybrid.reset();
  require(a.tail >= 1, "tail must be at least 1");
  const HyperSetup hs = make_hypermodel(setup, ctx.config.hypermodel);
  const ComparisonReport rep = compare_map_qmap(ias_inputs(setup, ms), hs.hyper, cfg, backend_from_string(a.map_backend),
                                                backend_from_string(a.qmap_backend), nullptr, a.tail);

  std::ostringstream csv;
  csv << "ias_iter,gibbs_map,gibbs_qmap,delta_g\n";
  for (std::size_t i = 0; i < rep.delta_g.size(); ++i)
    csv << i + 1 << ',' << sci(rep.gibbs_map[i]) << ',' << sci(rep.gibbs_qmap[i]) << ',' << sci(rep.delta_g[i]) << '\n';
  write_file_atomic(ctx.file("compare.csv"), csv.str());

  std::ostringstream counts;
  counts << "ias_iter,linearization,map_iterations,qmap_iterations\n";
  const std::size_t common = std::min(rep.map.trace.size(), rep.qmap.trace.size());
  for (std::size_t i = 0; i < common; ++i)
    for (std::size_t k = 0; k < rep.map.trace[i].inner.size() && k < rep.qmap.trace[i].inner.size(); ++k)
      counts << i + 1 << ',' << k + 1 << ',' << rep.map.trace[i].inner[k].report.iterations << ','
             << rep.qmap.trace[i].inner[k].report.iterations << '\n';
  write_file_atomic(ctx.file("compare_counts.csv"), counts.str());

  Json j = {{"map_backend", a.map_backend},
            {"qmap_backend", a.qmap_backend},
            {"delta_g", rep.delta_g},
            {"asymptote", rep.asymptote},
            {"tail", a.tail},
            {"dynamic_range_map", rep.dynamic_range_map},
            {"dynamic_range_qmap", rep.dynamic_range_qmap},
            {"map_iterations", rep.map.iterations},
            {"qmap_iterations", rep.qmap.iterations},
            {"map_converged", rep.map.converged},
            {"qmap_converged", rep.qmap.converged},
            {"difference", to_json(rep.difference)}};
  write_json_atomic(ctx.file("compare.json"), j);
  for (std::size_t i = 0; i < rep.delta_g.size(); ++i)
    ctx.say("iter " + std::to_string(i + 1) + "  G_map " + fmt("%.6g", rep.gibbs_map[i]) + "  G_qmap " +
            fmt("%.6g", rep.gibbs_qmap[i]) + "  dG " + fmt("%.4g", rep.delta_g[i]));
  ctx.say("asymptote " + fmt("%.4g", rep.asymptote) + "  dynamic range map " + fmt("%.4g", rep.dynamic_range_map) +
          "  qmap " + fmt("%.4g", rep.dynamic_range_qmap));
  Vector diff = Vector::Zero(setup.marked.mesh.num_elements());
  diff.head(setup.op.n) = rep.difference;
  render_field(ctx, setup, diff, "difference.svg", "qMAP - MAP", true);
  ctx.say("wrote " + ctx.file("compare.csv").string() + ", compare_counts.csv, compare.json");
  return 0;
}

void add_solver_options(CLI::App* sub, SolverArgs& a) {
  sub->add_option("--backend", a.backend, "Inner solver: normal-direct, adjoint-direct, lanczos-basis, "
                                          "lanczos-nobasis, cgls-qmap");
  sub->add_option("--max-iterations", a.max_iterations, "Maximum outer IAS iterations");
  sub->add_option("--tolerance", a.tolerance, "Relative theta-change stopping tolerance");
  sub->add_flag("--semiconvergence", a.semiconvergence, "Stop CGLS at the minimum of the linearized objective");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EIT reconstruction with hierarchical sparsity priors"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "Noise seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  MeshArgs mesh_args;
  auto* mesh = app.add_subcommand("mesh", "Generate a reconstruction or data mesh");
  mesh->add_option("--electrodes", mesh_args.electrodes, "Number of electrodes");
  mesh->add_option("--fill", mesh_args.fill, "Fraction of the boundary covered by electrodes");
  mesh->add_option("--target", mesh_args.target, "Target element count");
  mesh->add_option("--grading", mesh_args.grading, "Interior to boundary element size ratio");
  mesh->add_option("--d-radius", mesh_args.d_radius, "Radius of the subdomain carrying the unknowns");
  mesh->add_option("--refine-inside", mesh_args.refine_inside, "Uniform refinement levels inside the d-radius");
  mesh->add_flag("--data", mesh_args.data, "Start from the data_mesh settings of the config");
  mesh->add_option("-o,--output", mesh_args.output, "File name inside the output directory");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Simulate noisy electrode data from a phantom");
  simulate->add_option("--mesh", sim_args.mesh, "Data mesh file (generated from data_mesh when omitted)");
  simulate->add_option("--recon-mesh", sim_args.recon_mesh, "Reconstruction mesh, for the inverse-crime check");
  simulate->add_option("--phantom", sim_args.phantom, "one-inclusion, two-inclusions, or a phantom JSON file");
  simulate->add_option("--noise", sim_args.noise, "Noise level in percent of max |U|");
  simulate->add_option("--subdivisions", sim_args.subdivisions, "Rasterization subdivisions per element");
  simulate->add_flag("--render", sim_args.render, "Write phantom.svg");
  simulate->add_option("-o,--output", sim_args.output, "File name inside the output directory");

  ReconstructArgs rec_args;
  auto* reconstruct = app.add_subcommand("reconstruct", "Run the IAS reconstruction");
  reconstruct->add_option("--mesh", rec_args.mesh, "Reconstruction mesh file");
  reconstruct->add_option("--measurement", rec_args.measurement, "Measurement file");
  add_solver_options(reconstruct, rec_args.solver);
  reconstruct->add_option("--hybrid-r2", rec_args.hybrid_r2, "Switch to this r after the r = 1 phase converges");
  reconstruct->add_option("--phase2-iterations", rec_args.phase2_iterations, "Iterations after the switch");
  reconstruct->add_option("--shadow", rec_args.shadows, "Extra backends solving the same inner problems");
  reconstruct->add_flag("--render", rec_args.render, "Write field.svg");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Time every inner solver along one IAS trajectory");
  bench->add_option("--mesh", bench_args.mesh, "Reconstruction mesh file");
  bench->add_option("--measurement", bench_args.measurement, "Measurement file");
  add_solver_options(bench, bench_args.solver);
  bench->add_option("--backends", bench_args.backends, "Backends to time (default: all)");

  ConvexityArgs cvx_args;
  auto* convexity = app.add_subcommand("convexity", "Hessian and convexity diagnostics at a state");
  convexity->add_option("--mesh", cvx_args.mesh, "Reconstruction mesh file");
  convexity->add_option("--measurement", cvx_args.measurement, "Measurement file");
  convexity->add_option("--state", cvx_args.state, "field.json with zeta and theta (default zeta = 0)");
  convexity->add_option("--omega", cvx_args.omega, "Noise level used in the fidelity weight");
  convexity->add_option("--dense-limit", cvx_args.dense_limit, "Largest Hessian size for dense eigenvalues");
  convexity->add_flag("--matrices", cvx_args.matrices, "Include C, D and the Hessian blocks in the JSON");

  CompareArgs cmp_args;
  auto* compare = app.add_subcommand("compare", "Compare MAP and qMAP trajectories");
  compare->add_option("--mesh", cmp_args.mesh, "Reconstruction mesh file");
  compare->add_option("--measurement", cmp_args.measurement, "Measurement file");
  add_solver_options(compare, cmp_args.solver);
  compare->add_option("--map-backend", cmp_args.map_backend, "Exact inner solver");
  compare->add_option("--qmap-backend", cmp_args.qmap_backend, "Approximate inner solver");
  compare->add_option("--tail", cmp_args.tail, "Iterations averaged for the asymptote");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    const Context ctx = make_context(g);
    if (*mesh) return cmd_mesh(ctx, mesh_args);
    if (*simulate) return cmd_simulate(ctx, sim_args);
    if (*reconstruct) return cmd_reconstruct(ctx, rec_args);
    if (*bench) return cmd_bench(ctx, bench_args);
    if (*convexity) return cmd_convexity(ctx, cvx_args);
    if (*compare) return cmd_compare(ctx, cmp_args);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
