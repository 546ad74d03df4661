#pragma once

#include <eitias/common.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace eitias {

enum class Backend { NormalDirect, AdjointDirect, LanczosBasis, LanczosNoBasis, CglsQmap };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& name);
std::vector<Backend> all_backends();

// min_alpha ||rhs - A alpha||^2 + ||alpha||^2 with A of size m x N.
class LinearizedProblem {
 public:
  LinearizedProblem(Matrix A, Vector rhs);
  // Matrix-free operator; the dense backends form A by applying it to unit vectors.
  LinearizedProblem(Eigen::Index m, Eigen::Index N, std::function<Vector(const Vector&)> apply,
                    std::function<Vector(const Vector&)> apply_transpose, Vector rhs);

  Eigen::Index m() const { return m_; }
  Eigen::Index N() const { return N_; }
  const Vector& rhs() const { return rhs_; }
  bool has_dense() const { return static_cast<bool>(dense_); }
  const Matrix& dense() const;

  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& y) const;

  // 0.5 (||rhs - A alpha||^2 + ||alpha||^2)
  double objective(const Vector& alpha) const;

 private:
  Eigen::Index m_ = 0;
  Eigen::Index N_ = 0;
  std::shared_ptr<const Matrix> dense_;
  std::function<Vector(const Vector&)> apply_;
  std::function<Vector(const Vector&)> apply_t_;
  Vector rhs_;
};

struct SolveReport {
  Vector alpha;
  Backend backend = Backend::AdjointDirect;
  int iterations = 0;
  std::vector<double> residual_history;
  // Direct: relative optimality residual. Lanczos: rho_l sigma_{l+1} |y_l|.
  // CGLS: final squared residual ||rhs - A alpha||^2.
  double error_monitor = 0.0;
  bool converged = true;
  std::string note;
  double wall_time_ms = 0.0;
};

struct DirectOptions {
  Eigen::Index dense_limit = 8000;
};

struct LanczosOptions {
  double tol = 1e-8;
  bool relative = false;  // compare against tol * ||rhs|| instead of tol
  bool store_basis = true;
  // Full reorthogonalization needs the stored basis; ignored otherwise.
  bool reorthogonalize = true;
  int max_iterations = 0;  // 0 means min(m, N)
};

struct LanczosBasis {
  Matrix U;  // N x l
  Matrix V;  // m x (l + 1)
  Matrix C;  // l x l lower bidiagonal
  double sigma_next = 0.0;
};

struct CglsOptions {
  double discrepancy_target = 0.0;  // squared residual; <= 0 means m
  bool semiconvergence = false;
  // Objective used by the semiconvergence rule; defaults to problem.objective.
  std::function<double(const Vector&)> objective;
  int max_iterations = 0;  // 0 means min(m, N)
};

SolveReport solve_normal_direct(const LinearizedProblem& problem, const DirectOptions& options = {});
SolveReport solve_adjoint_direct(const LinearizedProblem& problem, const DirectOptions& options = {});
SolveReport solve_lanczos(const LinearizedProblem& problem, const LanczosOptions& options = {},
                          LanczosBasis* basis_out = nullptr);
SolveReport solve_cgls_early_stop(const LinearizedProblem& problem, const CglsOptions& options = {});

struct BackendOptions {
  DirectOptions direct;
  LanczosOptions lanczos;
  CglsOptions cgls;
};

SolveReport solve(Backend backend, const LinearizedProblem& problem, const BackendOptions& options = {});

}  // namespace eitias
