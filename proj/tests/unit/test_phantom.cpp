#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace eitias;
using namespace eitias::test;

namespace {

// Integral of xi over the mesh.
double integral(const Mesh& mesh, const Vector& xi) {
  double s = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) s += mesh.element_areas[e] * xi[e];
  return s;
}

}  // namespace

TEST_SUITE("phantom") {
  TEST_CASE("presets lie inside the disc and round trip through JSON") {
    for (const PhantomSpec& p : {PhantomSpec::one_inclusion(), PhantomSpec::two_inclusions()}) {
      p.validate();
      const PhantomSpec back = phantom_from_json(Json::parse(phantom_to_json(p).dump()));
      REQUIRE(back.inclusions.size() == p.inclusions.size());
      for (double x : {-0.5, 0.0, 0.3})
        for (double y : {-0.2, 0.25, 0.4}) CHECK(back.value_at({x, y}) == p.value_at({x, y}));
    }
    CHECK(phantom_from_json(Json("one-inclusion")).inclusions.size() == 1);
    CHECK_THROWS_AS(phantom_from_json(Json("three")), InputError);
    Json bad = phantom_to_json(PhantomSpec::one_inclusion());
    bad["inclusions"][0]["radius"] = 0.9;
    CHECK_THROWS_AS(phantom_from_json(bad), InputError);
  }

  TEST_CASE("rasterized disc integral converges to the exact overlap") {
    const PhantomSpec p = PhantomSpec::one_inclusion();
    const Inclusion& d = p.inclusions[0];
    const double exact = kPi * d.radius * d.radius * (d.value - p.sigma0);
    const Mesh coarse = small_mesh(8, 400);
    // Point sampling of an indicator converges with small oscillations, so
    // the trend is checked between the coarsest and finest nested meshes.
    std::vector<double> errs;
    for (const Mesh& mesh : {coarse, refine_inside(coarse, 0.9, 1), refine_inside(coarse, 0.9, 2)}) {
      errs.push_back(std::abs(integral(mesh, rasterize_phantom(p, mesh, 4)) - exact) / exact);
      CHECK(errs.back() < 0.02);
    }
    CHECK(errs.back() < 0.1 * errs.front());
    // Sub-triangle quadrature helps on a fixed mesh.
    const double c1 = std::abs(integral(coarse, rasterize_phantom(p, coarse, 1)) - exact);
    const double c8 = std::abs(integral(coarse, rasterize_phantom(p, coarse, 8)) - exact);
    CHECK(c8 < c1);
  }

  TEST_CASE("noise is deterministic and standard normal") {
    CHECK(gaussian_noise(101, 5) == gaussian_noise(101, 5));
    CHECK(gaussian_noise(101, 5) != gaussian_noise(101, 6));
    const Vector z = gaussian_noise(200000, 11);
    const double mean = z.mean();
    const double var = (z.array() - mean).square().sum() / (z.size() - 1);
    // Five standard errors.
    CHECK(std::abs(mean) < 5.0 / std::sqrt(2e5));
    CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / 2e5));
    CHECK((z.array().abs() > 1.96).cast<double>().mean() == doctest::Approx(0.05).epsilon(0.05));
  }

  TEST_CASE("simulated data carry noise level, seed and mesh id") {
    const Mesh mesh = small_mesh(8, 300);
    const auto layout = ElectrodeLayout::uniform(8, 0.5, 1e-2);
    const Simulation a =
        simulate_measurement(PhantomSpec::one_inclusion(), mesh, layout, trigonometric_basis(8), 1.0, 3);
    CHECK(a.measurement.noise_std == doctest::Approx(0.01 * a.noiseless.cwiseAbs().maxCoeff()));
    CHECK(a.measurement.mesh_id == mesh.content_id());
    CHECK(a.measurement.warnings.empty());
    const Vector residual = (a.measurement.data - a.noiseless) / a.measurement.noise_std;
    CHECK(rel_err(residual, gaussian_noise(residual.size(), 3)) < 1e-10);
    const Simulation crime = simulate_measurement(PhantomSpec::one_inclusion(), mesh, layout, trigonometric_basis(8),
                                                  1.0, 3, mesh.content_id());
    CHECK(crime.measurement.warnings.size() == 1);
  }

  TEST_CASE("noiseless data converge under data-mesh refinement") {
    const auto layout = ElectrodeLayout::uniform(8, 0.5, 1e-2);
    const PhantomSpec p = PhantomSpec::one_inclusion();
    const Mesh base = small_mesh(8, 300);
    auto data = [&](const Mesh& m) {
      return simulate_measurement(p, m, layout, trigonometric_basis(8), 0.0, 1).noiseless;
    };
    const Vector u0 = data(base);
    const Vector u1 = data(refine_inside(base, 0.9, 1));
    const Vector u2 = data(refine_inside(base, 0.9, 2));
    const Vector ref = data(refine_inside(base, 0.9, 3));
    CHECK((u1 - ref).norm() < (u0 - ref).norm());
    CHECK((u2 - ref).norm() < (u1 - ref).norm());
  }
}
