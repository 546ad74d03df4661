#pragma once

#include <eitias/common.hpp>

#include <vector>

namespace eitias {

// Generalized gamma hyperprior on the variances theta_j with exponent r,
// shape beta and scales vartheta_j.
struct HyperModel {
  double r = 1.0;
  double beta = 1.5;
  Vector vartheta;

  double eta() const { return r * beta - 1.5; }
  void validate() const;
  static HyperModel from_eta(double r, double eta, Vector vartheta);
};

struct GibbsBreakdown {
  double fidelity = 0.0;
  double penalty = 0.0;
  double hyper = 0.0;
  double total = 0.0;
};

// forward is F evaluated at the current xi; noise_std is the white-noise
// standard deviation used for whitening.
GibbsBreakdown gibbs_energy(const Vector& zeta, const Vector& theta, const Vector& data, const Vector& forward,
                            double noise_std, const HyperModel& hyper);

// Scalar objective of the theta half-step in scaled variables theta = vartheta*lambda,
// t = zeta/sqrt(vartheta):  t^2/(2 lambda) + lambda^r - eta log(lambda).
double theta_objective(double lambda, double t, double r, double eta);
double theta_objective_derivative(double lambda, double t, double r, double eta);

// lambda = Phi(|t|) for each entry. Closed forms for r = 1 and r = -1, ODE
// continuation plus Newton polish otherwise. Every value is checked against
// |g'(lambda)| <= 1e-10 (1 + |t|).
Vector phi(const Vector& t, double r, double eta);
// ODE continuation only, no polish and no closed forms.
Vector phi_ode(const Vector& t, double r, double eta, double rel_tol = 1e-10);

Vector update_theta(const Vector& zeta, const HyperModel& hyper);

// Phase-two model matching the phase-one (r = 1) model in the mode-like and
// mean-like scale relations, with a shared shape beta2.
HyperModel hybrid_switch(const HyperModel& phase1, double r2);

}  // namespace eitias
