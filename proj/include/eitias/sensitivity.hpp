#pragma once

#include <eitias/cem.hpp>
#include <eitias/hypermodel.hpp>
#include <eitias/io.hpp>
#include <eitias/mesh.hpp>

namespace eitias {

struct Jacobian {
  Matrix J;  // m x n, column nu is vec(E d_nu alpha)
  Vector xi;
};

// d_nu alpha = -X^T (d_nu K) X for one subdomain element.
Matrix alpha_derivative(const FrameSolution& frame, const CemSystem& system, int element);
// All n derivatives stacked as columns vec(d_nu alpha), (L-1)^2 x n.
Matrix alpha_jacobian(const FrameSolution& frame, const CemSystem& system);
Jacobian jacobian_adjoint(const FrameSolution& frame, const CemSystem& system);

// sum_{mu,nu} v_mu v_nu d2_{mu nu} alpha = 2 (d_v X)^T K (d_v X).
Matrix second_directional_derivative(const FrameSolution& frame, const CemSystem& system, const Vector& v);

struct VarthetaRule {
  double max_value = 4.0;
  // Sensitivities below s_max / cap_ratio are raised to that floor.
  double cap_ratio = 1e12;
};

struct VarthetaResult {
  Vector vartheta;
  Vector sensitivity;  // ||J L^dagger e_j||^2
  double scale = 0.0;  // the constant C
  int capped = 0;
};

VarthetaResult compute_vartheta(const Jacobian& jacobian_at_zero, const IncrementOperator& op,
                                const VarthetaRule& rule = {});

// E^T reshape(b): the (L-1) x (L-1) coefficient matrix of the data.
Matrix data_coefficients(const Matrix& E, const Vector& b);

struct ConvexityReport {
  Matrix d;  // n x n, data-independent part
  Matrix c;  // n x n, data-dependent part
  Matrix hzz;  // N x N
  Vector hzt;  // diagonal of the mixed block
  Vector htt;  // diagonal of the theta block
  double min_eig_d = 0.0;
  double min_eig_c_sym = 0.0;  // smallest eigenvalue of C + C^T
  double norm_c = 0.0;
  double min_eig_cd = 0.0;
  double min_eig_hessian = 0.0;
  double norm_hessian = 0.0;
  bool hessian_dense = true;  // false when estimated iteratively
  Vector eig_d;
  Vector eig_cd;

  bool d_psd() const { return min_eig_d >= -1e-10 * std::max(1.0, eig_d.size() ? eig_d.cwiseAbs().maxCoeff() : 0.0); }
  bool cd_psd() const { return min_eig_cd >= -1e-8 * std::max(norm_c, eig_cd.size() ? eig_cd.cwiseAbs().maxCoeff() : 0.0); }
  bool hessian_psd() const { return min_eig_hessian >= -1e-8 * norm_hessian; }
};

struct ConvexityOptions {
  // Dense symmetric eigensolver up to this Hessian size, Lanczos beyond.
  int dense_limit = 2400;
  int lanczos_steps = 120;
};

// Hessian of the r = 1 Gibbs energy at (zeta, theta), with fidelity
// (1/(2 omega^2)) ||gamma - alpha(xi)||_F^2 and xi = L^dagger zeta.
ConvexityReport convexity_probe(const CemSystem& system, const IncrementOperator& op, const Vector& xi,
                                const Matrix& gamma, double omega, const Vector& zeta, const Vector& theta,
                                const HyperModel& hyper, const ConvexityOptions& options = {});

// q^T H q via the completed-square form.
double hessian_quadratic_form(const ConvexityReport& report, const IncrementOperator& op, double omega,
                              const Vector& zeta, const Vector& theta, double eta, const Vector& q);
// Dense assembled 2N x 2N Hessian.
Matrix assemble_hessian(const ConvexityReport& report);

Json convexity_to_json(const ConvexityReport& report, bool include_matrices);

}  // namespace eitias
