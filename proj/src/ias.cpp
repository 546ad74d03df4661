#include <eitias/ias.hpp>
#include <eitias/sensitivity.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace eitias {

void IasConfig::validate() const {
  require(tolerance > 0, "IAS tolerance must be positive");
  require(max_outer_iterations >= 1, "IAS needs at least one outer iteration");
  require(inner_linearizations >= 1, "IAS needs at least one linearization per iteration");
  require(theta_init == "vartheta", "unknown theta initialization '" + theta_init + "'");
  require(sigma_floor_ratio > 0 && sigma_floor_ratio < 1, "sigma floor ratio must lie in (0, 1)");
  require(whitening_std >= 0, "whitening_std must be non-negative");
  if (hybrid) require(hybrid->phase2_iterations >= 1, "phase-two iteration count must be positive");
}

int compressibility(const Vector& zeta, double rel) {
  if (zeta.size() == 0) return 0;
  const double delta = rel * zeta.cwiseAbs().maxCoeff();
  return static_cast<int>((zeta.array().abs() > delta).count());
}

namespace {

class Engine {
 public:
  Engine(const IasInputs& in, const HyperModel& hyper, const IasConfig& cfg) : in_(in), cfg_(cfg) {
    require(in.system && in.op, "IAS inputs need a CEM system and an increment operator");
    cfg.validate();
    hyper.validate();
    require(in.op->n == in.system->n(), "increment operator and CEM system disagree on n");
    require(hyper.vartheta.size() == in.op->N, "vartheta must have one entry per increment");
    require(in.data.size() == in.system->measurements(), "data length must equal L(L-1)");
    omega_ = cfg.whitening_std > 0 ? cfg.whitening_std : in.noise_std;
    require(omega_ > 0, "whitening needs a positive noise level; set whitening_std for noiseless data");
    res_.hyper = hyper;
    res_.zeta = Vector::Zero(in.op->N);
    res_.theta = hyper.vartheta;
    res_.xi = Vector::Zero(in.op->n);
    if (cfg_.evaluate_gibbs) res_.initial_gibbs = gibbs();
  }

  // Runs up to max_iter outer iterations in the given phase; returns true when
  // the stopping rule fired.
  bool iterate(int phase, int max_iter) {
    for (int k = 0; k < max_iter; ++k) {
      IterationRecord rec;
      rec.iteration = res_.iterations + 1;
      rec.phase = phase;
      zeta_update(rec);
      if (cfg_.evaluate_gibbs) rec.after_zeta = gibbs();
      const Vector theta_new = update_theta(res_.zeta, res_.hyper);
      rec.delta_theta_rel = (theta_new - res_.theta).norm() / res_.theta.norm();
      res_.theta = theta_new;
      if (cfg_.evaluate_gibbs) rec.after_theta = gibbs();
      rec.compressibility_threshold = 1e-3 * res_.zeta.cwiseAbs().maxCoeff();
      rec.compressibility = compressibility(res_.zeta);
      res_.iterations = rec.iteration;
      const bool stop = rec.delta_theta_rel < cfg_.tolerance;
      res_.trace.push_back(std::move(rec));
      if (!std::isfinite(res_.trace.back().delta_theta_rel))
        throw NumericalError("relative theta change is not finite at iteration " + std::to_string(res_.iterations));
      if (stop && cfg_.stop_on_tolerance) return true;
    }
    return false;
  }

  IasResult& result() { return res_; }
  void set_hyper(HyperModel h) { res_.hyper = std::move(h); }

 private:
  const FrameSolution& frame() {
    if (!frame_) frame_ = solve_frame(*in_.system, res_.xi);
    return *frame_;
  }

  Vector forward() { return stack_voltages(in_.system->basis().E, frame().alpha()); }

  GibbsBreakdown gibbs() {
    return gibbs_energy(res_.zeta, res_.theta, in_.data, forward(), omega_, res_.hyper);
  }

  void zeta_update(IterationRecord& rec) {
    const WeightedPseudoInverse pinv(*in_.op, res_.theta);
    const Vector& d = pinv.inv_sqrt_theta();
    const double sigma0 = in_.system->sigma0();
    const double floor = cfg_.sigma_floor_ratio * sigma0;
    for (int lin = 1; lin <= cfg_.inner_linearizations; ++lin) {
      const FrameSolution& f = frame();
      const Vector F = stack_voltages(in_.system->basis().E, f.alpha());
      const Jacobian jac = jacobian_adjoint(f, *in_.system);
      // A^T = D^{-1/2} L (L^T D^{-1} L)^{-1} J^T / omega, of size N x m.
      Matrix At = in_.op->matrix * pinv.solve_normal(jac.J.transpose());
      At = d.asDiagonal() * At;
      At /= omega_;
      const Vector alpha_c = d.cwiseProduct(res_.zeta);
      const Vector rhs = (in_.data - F) / omega_ + At.transpose() * alpha_c;
      LinearizedProblem problem(At.transpose(), rhs);

      InnerRecord inner;
      inner.outer = rec.iteration;
      inner.linearization = lin;
      inner.report = solve(cfg_.backend, problem, cfg_.solver);
      for (Backend b : cfg_.shadow_backends) {
        SolveReport s = solve(b, problem, cfg_.solver);
        s.alpha.resize(0);
        inner.shadows.push_back(std::move(s));
      }

      const Vector xi_new = pinv.apply_scaled(inner.report.alpha);
      const Vector step = xi_new - res_.xi;
      double scale = 1.0;
      for (int halvings = 0; ((sigma0 + (res_.xi + scale * step).array()) <= floor).any(); ++halvings) {
        if (halvings > 60) throw NumericalError("positivity damping failed at iteration " + std::to_string(rec.iteration));
        scale *= 0.5;
      }
      if (scale < 1.0) {
        std::ostringstream msg;
        msg << "iteration " << rec.iteration << ", linearization " << lin << ": step damped by " << scale
            << " to keep the conductivity above " << floor;
        res_.log.push_back(msg.str());
      }
      inner.step_scale = scale;
      res_.xi += scale * step;
      res_.zeta = in_.op->matrix * res_.xi;
      frame_.reset();
      inner.report.alpha.resize(0);
      rec.inner.push_back(std::move(inner));
    }
  }

  const IasInputs& in_;
  const IasConfig& cfg_;
  double omega_ = 0.0;
  IasResult res_;
  std::optional<FrameSolution> frame_;
};

}  // namespace

IasResult run_ias(const IasInputs& inputs, const HyperModel& hyper, const IasConfig& config) {
  Engine e(inputs, hyper, config);
  e.result().converged = e.iterate(1, config.max_outer_iterations);
  return std::move(e.result());
}

IasResult run_hybrid(const IasInputs& inputs, const HyperModel& hyper, const IasConfig& config, double r2) {
  require(hyper.r == 1.0, "the hybrid scheme starts from the r = 1 model");
  const int phase2 = config.hybrid ? config.hybrid->phase2_iterations : 10;
  Engine e(inputs, hyper, config);
  e.iterate(1, config.max_outer_iterations);
  e.result().switch_index = e.result().iterations;
  e.set_hyper(hybrid_switch(hyper, r2));
  e.result().converged = e.iterate(2, phase2);
  return std::move(e.result());
}

ComparisonReport compare_map_qmap(const IasInputs& inputs, const HyperModel& hyper, const IasConfig& config,
                                  Backend map_backend, Backend qmap_backend, const IasResult* precomputed_map,
                                  int tail) {
  require(config.evaluate_gibbs, "the comparison needs Gibbs energies along both runs");
  require(tail >= 1, "tail length must be positive");
  ComparisonReport rep;
  IasConfig cmap = config;
  cmap.backend = map_backend;
  cmap.shadow_backends.clear();
  if (precomputed_map) {
    require(precomputed_map->trace.size() > 0 && precomputed_map->xi.size() == inputs.op->n,
            "precomputed MAP run does not match the inputs");
    rep.map = *precomputed_map;
  } else {
    rep.map = run_ias(inputs, hyper, cmap);
  }
  IasConfig cq = cmap;
  cq.backend = qmap_backend;
  rep.qmap = run_ias(inputs, hyper, cq);

  const std::size_t common = std::min(rep.map.trace.size(), rep.qmap.trace.size());
  for (std::size_t k = 0; k < common; ++k) {
    const double gm = rep.map.trace[k].after_theta.total;
    const double gq = rep.qmap.trace[k].after_theta.total;
    rep.gibbs_map.push_back(gm);
    rep.gibbs_qmap.push_back(gq);
    rep.delta_g.push_back((gq - gm) / gm);
  }
  const std::size_t t = std::min<std::size_t>(tail, rep.delta_g.size());
  double acc = 0.0;
  for (std::size_t k = rep.delta_g.size() - t; k < rep.delta_g.size(); ++k) acc += rep.delta_g[k];
  rep.asymptote = t ? acc / static_cast<double>(t) : 0.0;
  rep.dynamic_range_map = rep.map.xi.maxCoeff() - rep.map.xi.minCoeff();
  rep.dynamic_range_qmap = rep.qmap.xi.maxCoeff() - rep.qmap.xi.minCoeff();
  rep.difference = rep.qmap.xi - rep.map.xi;
  return rep;
}

std::string trace_csv(const IasResult& result) {
  std::ostringstream out;
  out << "ias_iter,linearization,backend,iterations,residual,wall_time_ms\n";
  char buf[256];
  auto row = [&](const InnerRecord& in, const SolveReport& r) {
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%d,%.9e,%.3f\n", in.outer, in.linearization, to_string(r.backend).c_str(),
                  r.iterations, r.error_monitor, r.wall_time_ms);
    out << buf;
  };
  for (const auto& it : result.trace)
    for (const auto& in : it.inner) {
      row(in, in.report);
      for (const auto& s : in.shadows) row(in, s);
    }
  return out.str();
}

}  // namespace eitias
