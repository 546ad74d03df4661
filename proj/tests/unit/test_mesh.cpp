#include "fixtures.hpp"

#include <eitias/mesh_io.hpp>

#include <doctest.h>

#include <cmath>
#include <set>

using namespace eitias;
using namespace eitias::test;

namespace {

// Shoelace area of the polygon traced by the boundary segments.
double boundary_polygon_area(const Mesh& mesh) {
  double a = 0.0;
  for (const auto& s : mesh.boundary_segments) {
    const Vec2& p = mesh.vertices[s[0]];
    const Vec2& q = mesh.vertices[s[1]];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

}  // namespace

TEST_SUITE("mesh") {
  TEST_CASE("default mesh counts") {
    const Mesh mesh = make_mesh(MeshConfig{}, 0.9);
    const MarkedMesh marked = mark_subdomain(mesh, 0.9);
    const IncrementOperator op = build_increment_operator(marked.mesh, marked.subdomain);
    // Reference counts of the reconstruction mesh: 5816 elements, 1940 inside D, 2970 edges.
    CHECK(std::abs(mesh.num_elements() - 5816) <= 0.01 * 5816);
    CHECK(std::abs(op.n - 1940) <= 0.01 * 1940);
    CHECK(std::abs(op.N - 2970) <= 0.01 * 2970);
  }

  TEST_CASE("small mesh is valid and fills the inscribed polygon") {
    const Mesh mesh = make_mesh(MeshConfig{4, 0.45, 64, 1.5}, 0.9);
    mesh.validate();
    mesh.validate_electrodes(ElectrodeLayout::uniform(4, 0.45, 1.0));
    CHECK(mesh.num_elements() >= 32);
    CHECK(mesh.total_area() == doctest::Approx(boundary_polygon_area(mesh)).epsilon(1e-12));
    for (double a : mesh.element_areas) CHECK(a > 0);
  }

  TEST_CASE("area converges to pi") {
    const double coarse = std::abs(small_mesh(8, 300).total_area() - kPi);
    const double fine = std::abs(small_mesh(8, 1200).total_area() - kPi);
    CHECK(fine < coarse);
    CHECK(fine < 1e-2);
  }

  TEST_CASE("every electrode endpoint is a boundary vertex") {
    const ElectrodeLayout layout = ElectrodeLayout::uniform(16, 0.5, 1.0);
    const Mesh mesh = small_mesh(16, 800);
    std::set<int> boundary;
    for (const auto& s : mesh.boundary_segments) boundary.insert(s[0]);
    for (const Arc& a : layout.arcs)
      for (double ang : {a.start, a.end}) {
        bool hit = false;
        for (int v : boundary) hit = hit || (mesh.vertices[v] - Vec2(std::cos(ang), std::sin(ang))).norm() < 1e-12;
        CHECK(hit);
      }
  }

  TEST_CASE("subdomain marking puts inside elements first") {
    const Mesh mesh = small_mesh();
    const MarkedMesh marked = mark_subdomain(mesh, 0.9);
    for (int e = 0; e < marked.mesh.num_elements(); ++e) {
      double rmax = 0.0;
      for (int v : marked.mesh.triangles[e]) rmax = std::max(rmax, marked.mesh.vertices[v].norm());
      CHECK((e < marked.subdomain.n) == (rmax <= 0.9 + 1e-9));
    }
    std::vector<int> perm = marked.subdomain.permutation;
    std::sort(perm.begin(), perm.end());
    for (int i = 0; i < static_cast<int>(perm.size()); ++i) CHECK(perm[i] == i);
  }

  TEST_CASE("increment operator rows") {
    const Mesh mesh = small_mesh();
    const MarkedMesh marked = mark_subdomain(mesh, 0.9);
    const IncrementOperator op = build_increment_operator(marked.mesh, marked.subdomain);
    const Matrix L(op.matrix);
    REQUIRE(L.rows() == op.N);
    REQUIRE(L.cols() == op.n);
    for (int k = 0; k < op.N; ++k) {
      const OrientedEdge& e = op.edges[k];
      CHECK(e.plus < e.minus);
      CHECK(L(k, e.plus) == 1.0);
      if (e.minus < op.n) {
        CHECK(L(k, e.minus) == -1.0);
        CHECK(L.row(k).sum() == 0.0);
      } else {
        CHECK(L.row(k).sum() == 1.0);
      }
    }
    // Full column rank: the collar pins the constant mode.
    Eigen::JacobiSVD<Matrix> svd(L);
    CHECK(svd.singularValues().minCoeff() > 1e-6);
  }

  TEST_CASE("weighted pseudoinverse matches a dense SVD") {
    const Mesh mesh = small_mesh();
    const MarkedMesh marked = mark_subdomain(mesh, 0.9);
    const IncrementOperator op = build_increment_operator(marked.mesh, marked.subdomain);
    const Vector theta = uniform_vector(op.N, 3, 0.1, 4.0);
    const Vector target = uniform_vector(op.N, 4);
    const WeightedPseudoInverse pinv(op, theta);
    const Matrix Ltheta = theta.cwiseInverse().cwiseSqrt().asDiagonal() * Matrix(op.matrix);
    const Matrix P = svd_pinv(Ltheta);
    const Vector alpha = uniform_vector(op.N, 5);
    CHECK(rel_err(pinv.apply_scaled(alpha), P * alpha) < 1e-10);
    CHECK(rel_err(pinv.apply(target), P * (theta.cwiseInverse().cwiseSqrt().asDiagonal() * target)) < 1e-10);
    const Vector unweighted = apply_pseudoinverse(op, nullptr, target);
    CHECK(rel_err(unweighted, svd_pinv(Matrix(op.matrix)) * target) < 1e-10);
    // L^dagger L = I on full column rank.
    const Vector xi = uniform_vector(op.n, 6);
    CHECK(rel_err(pinv.apply(op.matrix * xi), xi) < 1e-10);
  }

  TEST_CASE("inside refinement keeps the collar and nests the subdomain") {
    const Mesh mesh = small_mesh();
    const MarkedMesh marked = mark_subdomain(mesh, 0.9);
    const Mesh fine = refine_inside(mesh, 0.9, 2);
    fine.validate();
    CHECK(fine.total_area() == doctest::Approx(mesh.total_area()).epsilon(1e-12));
    CHECK(mark_subdomain(fine, 0.9).subdomain.n == 16 * marked.subdomain.n);
    CHECK(fine.boundary_segments.size() == mesh.boundary_segments.size());
    fine.validate_electrodes(ElectrodeLayout::uniform(8, 0.5, 1.0));
  }

  TEST_CASE("validation rejects broken meshes") {
    Mesh mesh = small_mesh();
    Mesh degenerate = mesh;
    degenerate.vertices[degenerate.triangles[0][1]] = degenerate.vertices[degenerate.triangles[0][0]];
    CHECK_THROWS_AS(Mesh::from_triangles(degenerate.vertices, degenerate.triangles).validate(), InputError);
    CHECK_THROWS_AS(ElectrodeLayout::uniform(8, 1.5, 1.0), InputError);
    CHECK_THROWS_AS(mesh.validate_electrodes(ElectrodeLayout::uniform(7, 0.5, 1.0)), InputError);
  }

  TEST_CASE("JSON round trip and content id") {
    const Mesh mesh = small_mesh();
    const auto arcs = ElectrodeLayout::uniform(8, 0.5, 1.0).arcs;
    const Json j = mesh_to_json(mesh, arcs, 0.9);
    const MeshFile back = mesh_from_json(Json::parse(j.dump()));
    CHECK(back.mesh_id == mesh.content_id());
    CHECK(back.mesh.content_id() == mesh.content_id());
    CHECK(back.d_radius.value() == 0.9);
    REQUIRE(back.electrode_arcs.size() == arcs.size());
    for (std::size_t i = 0; i < arcs.size(); ++i) CHECK(back.electrode_arcs[i].start == arcs[i].start);

    Json tampered = j;
    tampered["vertices"][5][0] = tampered["vertices"][5][0].get<double>() + 1e-3;
    CHECK_THROWS_AS(mesh_from_json(tampered), InputError);
    Json flipped = j;
    auto t = flipped["triangles"][0];
    flipped["triangles"][0] = Json::array({t[0], t[2], t[1]});
    flipped.erase("mesh_id");
    CHECK_THROWS_AS(mesh_from_json(flipped), InputError);
  }
}
