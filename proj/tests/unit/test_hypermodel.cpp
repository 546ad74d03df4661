#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace eitias;
using namespace eitias::test;

namespace {

// g'(lambda) for t^2/(2 lambda) + lambda^r - eta log(lambda), in long double.
long double dg(long double lambda, long double t, long double r, long double eta) {
  return -t * t / (2 * lambda * lambda) + r * std::pow(lambda, r - 1) - eta / lambda;
}

// Bisection on log(lambda) in extended precision; lambda * g'(lambda) is
// increasing in lambda whenever eta / r > 0, so the root is unique.
long double root_extended(long double t, long double r, long double eta) {
  long double lo = -80, hi = 80;
  for (int i = 0; i < 400; ++i) {
    const long double mid = 0.5L * (lo + hi);
    if (dg(std::exp(mid), t, r, eta) > 0)
      hi = mid;
    else
      lo = mid;
  }
  return std::exp(0.5L * (lo + hi));
}

Vector t_grid() {
  Vector t(101);
  for (int i = 0; i <= 100; ++i) t[i] = i;
  t[1] = 1e-3;
  return t;
}

}  // namespace

TEST_SUITE("hypermodel") {
  TEST_CASE("theta update zeroes the optimality condition") {
    const Vector t = t_grid();
    for (double r : {1.0, 0.5, -0.5, -1.0}) {
      // eta / r > 0: positive eta for r > 0, negative eta for r < 0.
      const double eta = r > 0 ? 1e-5 : -1.0;
      const Vector lam = phi(t, r, eta);
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const long double l = lam[i];
        const long double scale =
            t[i] * t[i] / (2 * l) + std::abs(r) * std::pow(l, static_cast<long double>(r)) + std::abs(eta);
        CHECK(std::abs(l * dg(l, t[i], r, eta)) <= 1e-10L * scale);
      }
    }
  }

  TEST_CASE("theta update agrees with extended-precision bisection") {
    const Vector t = t_grid();
    for (double r : {1.0, 0.5, -0.5, -1.0, 2.0}) {
      const double eta = r > 0 ? 0.3 : -0.7;
      const Vector lam = phi(t, r, eta);
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const long double ref = root_extended(t[i], r, eta);
        CHECK(std::abs(lam[i] - ref) <= 1e-9L * ref);
      }
    }
  }

  TEST_CASE("ODE continuation agrees with the closed forms") {
    const Vector t = t_grid();
    const Vector ode1 = phi_ode(t, 1.0, 1e-5);
    const Vector ode_m1 = phi_ode(t, -1.0, -1.0);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double eta = 1e-5;
      const double closed1 = 0.5 * (eta + std::sqrt(eta * eta + 2 * t[i] * t[i]));
      CHECK(std::abs(ode1[i] - closed1) <= 1e-6 * closed1);
      const double closed_m1 = (t[i] * t[i] + 2.0) / 2.0;  // |eta| = 1
      CHECK(std::abs(ode_m1[i] - closed_m1) <= 1e-6 * closed_m1);
    }
  }

  TEST_CASE("theta update minimizes the Gibbs energy in theta") {
    const int N = 6;
    const HyperModel h = HyperModel::from_eta(0.5, 0.2, uniform_vector(N, 51, 0.5, 2.0));
    const Vector zeta = uniform_vector(N, 52, -3.0, 3.0);
    const Vector theta = update_theta(zeta, h);
    const Vector data = Vector::Zero(3), forward = Vector::Zero(3);
    const double g0 = gibbs_energy(zeta, theta, data, forward, 1.0, h).total;
    for (int j = 0; j < N; ++j)
      for (double f : {0.99, 1.01}) {
        Vector th = theta;
        th[j] *= f;
        CHECK(gibbs_energy(zeta, th, data, forward, 1.0, h).total > g0);
      }
  }

  TEST_CASE("Gibbs energy terms") {
    const HyperModel h = HyperModel::from_eta(1.0, 0.5, Vector::Constant(2, 2.0));
    const Vector zeta = (Vector(2) << 1.0, -2.0).finished();
    const Vector theta = (Vector(2) << 1.0, 4.0).finished();
    const Vector data = (Vector(2) << 1.0, 1.0).finished();
    const Vector forward = (Vector(2) << 0.0, 3.0).finished();
    const GibbsBreakdown g = gibbs_energy(zeta, theta, data, forward, 0.5, h);
    CHECK(g.fidelity == doctest::Approx(0.5 * (4.0 + 16.0)));
    CHECK(g.penalty == doctest::Approx(0.5 * (1.0 + 1.0)));
    CHECK(g.hyper == doctest::Approx(0.5 + 2.0 - 0.5 * (std::log(0.5) + std::log(2.0))));
    CHECK(g.total == doctest::Approx(g.fidelity + g.penalty + g.hyper));
  }

  TEST_CASE("eta and beta") {
    const HyperModel h = HyperModel::from_eta(0.5, 1e-5, Vector::Ones(3));
    CHECK(h.beta == doctest::Approx((1e-5 + 1.5) / 0.5));
    CHECK(h.eta() == doctest::Approx(1e-5));
    CHECK_THROWS_AS(HyperModel::from_eta(1.0, -0.1, Vector::Ones(3)), InputError);
    CHECK_THROWS_AS(HyperModel::from_eta(0.0, 0.1, Vector::Ones(3)), InputError);
  }

  TEST_CASE("hybrid switch matches mode and mean relations") {
    const HyperModel p1 = HyperModel::from_eta(1.0, 1e-2, uniform_vector(4, 53, 0.1, 3.0));
    for (double r2 : {0.5, 2.0, -0.5, -1.0}) {
      const HyperModel p2 = hybrid_switch(p1, r2);
      CHECK(p2.r == r2);
      for (Eigen::Index j = 0; j < 4; ++j) {
        const double mode1 = p1.vartheta[j] * (p1.beta - 1.5);
        const double mode2 = p2.vartheta[j] * std::pow(p2.beta - 1.5 / r2, 1.0 / r2);
        CHECK(mode2 == doctest::Approx(mode1).epsilon(1e-10));
        const double mean1 = p1.vartheta[j] * p1.beta;
        const double mean2 = p2.vartheta[j] * std::exp(std::lgamma(p2.beta + 1.0 / r2) - std::lgamma(p2.beta));
        CHECK(mean2 == doctest::Approx(mean1).epsilon(1e-8));
      }
    }
    const HyperModel same = hybrid_switch(p1, 1.0);
    CHECK(same.beta == p1.beta);
  }
}
