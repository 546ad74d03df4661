#include <eitias/hypermodel.hpp>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace eitias {

void HyperModel::validate() const {
  require(r != 0.0 && std::isfinite(r), "hypermodel exponent r must be nonzero");
  require(beta > 0.0 && std::isfinite(beta), "hypermodel shape beta must be positive");
  require(vartheta.size() > 0, "hypermodel needs scales vartheta");
  require((vartheta.array() > 0).all() && vartheta.allFinite(), "hypermodel scales must be positive");
  if (r == 1.0) require(eta() > 0.0, "r = 1 requires eta = beta - 3/2 > 0");
  require(eta() / r > 0.0, "hypermodel requires eta / r > 0");
}

HyperModel HyperModel::from_eta(double r, double eta, Vector vartheta) {
  require(r != 0.0, "hypermodel exponent r must be nonzero");
  HyperModel h{r, (eta + 1.5) / r, std::move(vartheta)};
  h.validate();
  return h;
}

GibbsBreakdown gibbs_energy(const Vector& zeta, const Vector& theta, const Vector& data, const Vector& forward,
                            double noise_std, const HyperModel& hyper) {
  require(zeta.size() == theta.size() && theta.size() == hyper.vartheta.size(), "Gibbs energy: size mismatch");
  require(data.size() == forward.size(), "Gibbs energy: data and forward value differ in length");
  require(noise_std > 0, "Gibbs energy needs a positive noise level");
  require((theta.array() > 0).all(), "Gibbs energy: theta must be positive");
  GibbsBreakdown g;
  g.fidelity = 0.5 * ((data - forward) / noise_std).squaredNorm();
  g.penalty = 0.5 * (zeta.array().square() / theta.array()).sum();
  const Eigen::ArrayXd ratio = theta.array() / hyper.vartheta.array();
  g.hyper = ratio.pow(hyper.r).sum() - hyper.eta() * ratio.log().sum();
  g.total = g.fidelity + g.penalty + g.hyper;
  return g;
}

double theta_objective(double lambda, double t, double r, double eta) {
  return t * t / (2.0 * lambda) + std::pow(lambda, r) - eta * std::log(lambda);
}

double theta_objective_derivative(double lambda, double t, double r, double eta) {
  return -t * t / (2.0 * lambda * lambda) + r * std::pow(lambda, r - 1.0) - eta / lambda;
}

namespace {

void check_parameters(double r, double eta) {
  require(r != 0.0 && std::isfinite(r) && std::isfinite(eta), "invalid hypermodel exponent");
  require(eta / r > 0.0, "theta update requires eta / r > 0");
}

// Stationarity in polynomial form: r lambda^(r+1) - eta lambda - t^2/2.
double critical(double lambda, double t, double r, double eta) {
  return r * std::pow(lambda, r + 1.0) - eta * lambda - 0.5 * t * t;
}

double critical_slope(double lambda, double r, double eta) {
  return r * (r + 1.0) * std::pow(lambda, r) - eta;
}

bool accepted(double lambda, double t, double r, double eta) {
  return lambda > 0 && std::isfinite(lambda) &&
         std::abs(theta_objective_derivative(lambda, t, r, eta)) <= 1e-10 * (1.0 + std::abs(t));
}

double polish(double lambda, double t, double r, double eta) {
  for (int it = 0; it < 60; ++it) {
    const double f = critical(lambda, t, r, eta);
    const double df = critical_slope(lambda, r, eta);
    if (!(df > 0) || f == 0.0) break;
    double step = f / df;
    double next = lambda - step;
    while (!(next > 0)) {
      step *= 0.5;
      next = lambda - step;
    }
    if (std::abs(next - lambda) <= 4 * std::numeric_limits<double>::epsilon() * lambda) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  if (accepted(lambda, t, r, eta)) return lambda;
  // Bracketed fallback in log(lambda); the stationary point is unique on the
  // admissible branch because the slope is positive there.
  auto f = [&](double s) { return critical(std::exp(s), t, r, eta); };
  double lo = std::log(lambda) - 1.0, hi = std::log(lambda) + 1.0;
  for (int k = 0; k < 200 && f(lo) > 0; ++k) lo -= 1.0;
  for (int k = 0; k < 200 && f(hi) < 0; ++k) hi += 1.0;
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return std::exp(0.5 * (a + b));
}

}  // namespace

Vector phi_ode(const Vector& t, double r, double eta, double rel_tol) {
  check_parameters(r, eta);
  const Eigen::Index n = t.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(t[a]) < std::abs(t[b]); });

  using namespace boost::numeric::odeint;
  using State = double;
  // Integrated in u = log(lambda) so trial steps cannot leave lambda > 0;
  // an absolute error in u is a relative error in lambda.
  auto stepper = make_dense_output(rel_tol * 1e-2, rel_tol * 1e-2, runge_kutta_dopri5<State>());
  auto rhs = [&](const State& u, State& du, double s) {
    const double lam = std::exp(u);
    du = s / (lam * (r * (r + 1.0) * std::pow(lam, r) - eta));
  };
  Vector out(n);
  State u = std::log(eta / r) / r;
  double current = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double target = std::abs(t[order[k]]);
    if (target > current) {
      integrate_adaptive(stepper, rhs, u, current, target, 1e-6 * (target - current));
      current = target;
    }
    out[order[k]] = std::exp(u);
  }
  return out;
}

Vector phi(const Vector& t, double r, double eta) {
  check_parameters(r, eta);
  Vector lam(t.size());
  if (r == 1.0) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      // Stable form of (eta + sqrt(eta^2 + 2 t^2)) / 2.
      const double q = std::sqrt(eta * eta + 2.0 * t[i] * t[i]);
      lam[i] = eta >= 0 ? 0.5 * (eta + q) : t[i] * t[i] / (q - eta);
    }
  } else if (r == -1.0) {
    for (Eigen::Index i = 0; i < t.size(); ++i) lam[i] = (t[i] * t[i] + 2.0) / (2.0 * std::abs(eta));
  } else {
    lam = phi_ode(t, r, eta);
    for (Eigen::Index i = 0; i < t.size(); ++i) lam[i] = polish(lam[i], t[i], r, eta);
  }
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!accepted(lam[i], t[i], r, eta)) {
      lam[i] = polish(lam[i], t[i], r, eta);
      if (!accepted(lam[i], t[i], r, eta)) {
        std::ostringstream msg;
        msg << "theta update failed the optimality check at t = " << t[i] << " (r = " << r << ", eta = " << eta << ")";
        throw NumericalError(msg.str());
      }
    }
  }
  return lam;
}

Vector update_theta(const Vector& zeta, const HyperModel& hyper) {
  hyper.validate();
  require(zeta.size() == hyper.vartheta.size(), "zeta and vartheta differ in length");
  const Vector t = zeta.array() / hyper.vartheta.array().sqrt();
  return hyper.vartheta.cwiseProduct(phi(t, hyper.r, hyper.eta()));
}

namespace {

// log of (beta - 3/(2r))^(1/r) * Gamma(beta) / Gamma(beta + 1/r).
double log_shape_ratio(double beta, double r) {
  return std::log(beta - 1.5 / r) / r + std::lgamma(beta) - std::lgamma(beta + 1.0 / r);
}

}  // namespace

HyperModel hybrid_switch(const HyperModel& phase1, double r2) {
  phase1.validate();
  require(phase1.r == 1.0, "hybrid switch expects a phase-one model with r = 1");
  require(r2 != 0.0 && std::isfinite(r2), "phase-two exponent must be nonzero");
  if (r2 == 1.0) return phase1;

  const double b1 = phase1.beta;
  const double c = (b1 - 1.5) / b1;
  const double log_c = std::log(c);
  // Admissible beta2: beta2 - 3/(2 r2) > 0 and a finite mean (beta2 + 1/r2 > 0).
  const double lower = r2 > 0 ? 1.5 / r2 : std::max(1.5 / r2, -1.0 / r2);
  auto f = [&](double b) { return log_shape_ratio(b, r2) - log_c; };

  // Geometric scan of gaps above the lower bound for the first sign change.
  const double scale = std::max(1.0, lower);
  double lo = 0, hi = 0, prev_b = 0, prev_f = std::numeric_limits<double>::quiet_NaN();
  bool found = false;
  double gap = 1e-12 * scale;
  for (; gap <= 1e8 * scale; gap *= 2.0) {
    const double b = lower + gap;
    const double fb = f(b);
    if (std::isfinite(fb) && std::isfinite(prev_f) && std::signbit(fb) != std::signbit(prev_f)) {
      lo = prev_b;
      hi = b;
      found = true;
      break;
    }
    if (std::isfinite(fb)) {
      prev_b = b;
      prev_f = fb;
    }
  }
  if (!found) {
    std::ostringstream msg;
    msg << "hybrid switch: no admissible beta2 in (" << lower << ", " << lower + gap << "] for r2 = " << r2;
    throw NumericalError(msg.str());
  }
  std::uintmax_t iters = 300;
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  const double beta2 = 0.5 * (a + b);

  HyperModel out;
  out.r = r2;
  out.beta = beta2;
  out.vartheta = phase1.vartheta * ((b1 - 1.5) / std::pow(beta2 - 1.5 / r2, 1.0 / r2));
  out.validate();
  return out;
}

}  // namespace eitias
