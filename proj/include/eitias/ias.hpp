#pragma once

#include <eitias/cem.hpp>
#include <eitias/hypermodel.hpp>
#include <eitias/lsq.hpp>
#include <eitias/mesh.hpp>

#include <optional>
#include <string>
#include <vector>

namespace eitias {

struct HybridConfig {
  double r2 = 0.5;
  int phase2_iterations = 10;
};

struct IasConfig {
  double tolerance = 2e-2;  // on ||theta_new - theta|| / ||theta||
  int max_outer_iterations = 50;
  int inner_linearizations = 2;
  bool stop_on_tolerance = true;
  Backend backend = Backend::AdjointDirect;
  BackendOptions solver;
  // Extra backends solving the same inner problems, for timing only.
  std::vector<Backend> shadow_backends;
  std::optional<HybridConfig> hybrid;
  std::string theta_init = "vartheta";
  bool evaluate_gibbs = true;
  // Updates are damped until sigma0 + xi > floor_ratio * sigma0 everywhere.
  double sigma_floor_ratio = 1e-3;
  // Replaces the measurement noise level in the whitening when positive.
  double whitening_std = 0.0;

  void validate() const;
};

struct IasInputs {
  const CemSystem* system = nullptr;
  const IncrementOperator* op = nullptr;
  Vector data;
  double noise_std = 0.0;
};

struct InnerRecord {
  int outer = 0;
  int linearization = 0;
  SolveReport report;
  std::vector<SolveReport> shadows;
  double step_scale = 1.0;  // < 1 when positivity damping kicked in
};

struct IterationRecord {
  int iteration = 0;  // 1-based
  int phase = 1;
  GibbsBreakdown after_zeta;
  GibbsBreakdown after_theta;
  double delta_theta_rel = 0.0;
  int compressibility = 0;
  double compressibility_threshold = 0.0;
  std::vector<InnerRecord> inner;
};

struct IasResult {
  Vector zeta;
  Vector theta;
  Vector xi;
  HyperModel hyper;  // model in force at the end
  int iterations = 0;
  bool converged = false;
  int switch_index = -1;  // iterations completed before the hybrid switch
  GibbsBreakdown initial_gibbs;
  std::vector<IterationRecord> trace;
  std::vector<std::string> log;
};

// ||zeta||_{0,delta} with delta = rel * max|zeta|.
int compressibility(const Vector& zeta, double rel = 1e-3);

IasResult run_ias(const IasInputs& inputs, const HyperModel& hyper, const IasConfig& config);
// Phase one with the r = 1 model to its stopping rule, then the matched r2 model.
IasResult run_hybrid(const IasInputs& inputs, const HyperModel& hyper, const IasConfig& config, double r2);

struct ComparisonReport {
  std::vector<double> delta_g;  // (G_qmap - G_map) / G_map per common iteration
  double asymptote = 0.0;       // mean of the last few delta_g values
  std::vector<double> gibbs_map;
  std::vector<double> gibbs_qmap;
  double dynamic_range_map = 0.0;
  double dynamic_range_qmap = 0.0;
  Vector difference;  // xi_qmap - xi_map
  IasResult map;
  IasResult qmap;
};

ComparisonReport compare_map_qmap(const IasInputs& inputs, const HyperModel& hyper, const IasConfig& config,
                                  Backend map_backend = Backend::AdjointDirect,
                                  Backend qmap_backend = Backend::CglsQmap,
                                  const IasResult* precomputed_map = nullptr, int tail = 3);

// One CSV row per inner solve (and per shadow solve):
// ias_iter,linearization,backend,iterations,residual,wall_time_ms
std::string trace_csv(const IasResult& result);

}  // namespace eitias
