#include "fixtures.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <filesystem>

using namespace eitias;
using namespace eitias::test;

namespace {

// Resistance matrix from the dense block system by Schur complement:
// R = E (K22 - K21 K11^{-1} K12)^{-1} E^T.
Matrix schur_resistance(const CemSystem& system, const Vector& xi) {
  const Matrix K(system.assemble(xi));
  const int nv = system.num_vertices();
  const int P = system.patterns();
  const Matrix K11 = K.topLeftCorner(nv, nv);
  const Matrix K12 = K.topRightCorner(nv, P);
  const Matrix K22 = K.bottomRightCorner(P, P);
  const Matrix S = K22 - K12.transpose() * K11.ldlt().solve(K12);
  const Matrix& E = system.basis().E;
  return E * S.inverse() * E.transpose();
}

}  // namespace

TEST_SUITE("cem") {
  TEST_CASE("trigonometric basis is orthonormal with zero-sum columns") {
    for (int L : {4, 8, 16, 32}) {
      const CurrentBasis b = trigonometric_basis(L);
      CHECK(b.E.rows() == L);
      CHECK(b.E.cols() == L - 1);
      CHECK((b.E.transpose() * b.E - Matrix::Identity(L - 1, L - 1)).norm() < 1e-12);
      CHECK(b.E.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    }
    Matrix bad = trigonometric_basis(6).E;
    bad(0, 0) += 1e-3;
    CHECK_THROWS_AS(custom_basis(bad), InputError);
  }

  TEST_CASE("element stiffness matches gradients from the nodal interpolation system") {
    const Mesh mesh = small_mesh();
    for (int e : {0, 7, 42, mesh.num_elements() - 1}) {
      const auto& t = mesh.triangles[e];
      Eigen::Matrix3d V;
      for (int i = 0; i < 3; ++i) V.row(i) << 1.0, mesh.vertices[t[i]].x(), mesh.vertices[t[i]].y();
      // Column j of V^{-1} holds the coefficients of the j-th hat function.
      const Eigen::Matrix3d C = V.inverse();
      const Eigen::Matrix<double, 2, 3> G = C.bottomRows(2);
      const Eigen::Matrix3d ref = std::abs(0.5 * V.determinant()) * G.transpose() * G;
      CHECK((element_stiffness(mesh, e) - ref).norm() < 1e-12 * ref.norm());
    }
  }

  TEST_CASE("frame solve agrees with the dense Schur complement") {
    const Setup s = small_setup();
    const Vector xi = uniform_vector(s.op.n, 11, -0.5, 2.0);
    const Matrix R = resistance_matrix(s.cem(), xi);
    CHECK(rel_err(R, schur_resistance(s.cem(), xi)) < 1e-9);
  }

  TEST_CASE("reciprocity and grounding") {
    const Setup s = small_setup(8, 260, 1e-6);
    const Vector xi = uniform_vector(s.op.n, 12, -0.5, 2.0);
    const FrameSolution f = solve_frame(s.cem(), xi);
    const Matrix R = f.alpha();
    CHECK((R - R.transpose()).norm() <= 1e-10 * R.norm());
    const Vector U = forward_map(s.cem(), xi);
    const Matrix Umat = Eigen::Map<const Matrix>(U.data(), s.cem().basis().electrodes(), s.cem().patterns());
    CHECK(Umat.colwise().sum().cwiseAbs().maxCoeff() <= 1e-10 * Umat.cwiseAbs().maxCoeff());
    CHECK(rel_err(U, stack_voltages(s.cem().basis().E, R)) < 1e-14);
  }

  TEST_CASE("resistance decreases when conductivity increases") {
    const Setup s = small_setup();
    for (std::uint64_t k = 0; k < 20; ++k) {
      const Vector lo = uniform_vector(s.op.n, 100 + k, -0.5, 1.0);
      const Vector hi = lo + uniform_vector(s.op.n, 200 + k, 0.0, 1.0);
      const Matrix diff = resistance_matrix(s.cem(), lo) - resistance_matrix(s.cem(), hi);
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (diff + diff.transpose()));
      CHECK(es.eigenvalues().minCoeff() >= -1e-12 * diff.norm());
    }
  }

  TEST_CASE("scaling conductivity by c and impedance by 1/c scales voltages by 1/c") {
    const double c = 3.0;
    const Mesh mesh = small_mesh();
    const MarkedMesh marked = mark_subdomain(mesh, 0.9);
    const int n = marked.subdomain.n;
    const CemSystem a(marked.mesh, n, ElectrodeLayout::uniform(8, 0.5, 0.05), trigonometric_basis(8), 1.0);
    const CemSystem b(marked.mesh, n, ElectrodeLayout::uniform(8, 0.5, 0.05 / c), trigonometric_basis(8), c);
    const Vector xi = uniform_vector(n, 13, -0.5, 1.0);
    CHECK(rel_err(forward_map(b, c * xi), forward_map(a, xi) / c) < 1e-10);
  }

  TEST_CASE("frame solution residual at small contact impedance") {
    const Setup s = small_setup(8, 400, 1e-6);
    const Vector xi = uniform_vector(s.op.n, 14, -0.5, 3.0);
    const FrameSolution f = solve_frame(s.cem(), xi);
    Matrix B = Matrix::Zero(s.cem().dimension(), s.cem().patterns());
    B.bottomRows(s.cem().patterns()).setIdentity();
    const Matrix Kd(f.K);
    const double backward = (Kd * f.X - B).norm() / (Kd.norm() * f.X.norm() + B.norm());
    CHECK(backward < 1e-12);
  }

  TEST_CASE("condition estimate brackets the dense condition number") {
    const Setup s = small_setup(8, 120);
    const Vector xi = Vector::Zero(s.op.n);
    Eigen::JacobiSVD<Matrix> svd{Matrix(s.cem().assemble(xi))};
    const Vector sv = svd.singularValues();
    const double exact = sv[0] / sv[sv.size() - 1];
    const double est = condition_estimate(s.cem(), xi, 200);
    CHECK(est <= exact * (1 + 1e-6));
    CHECK(est >= 0.5 * exact);
  }

  TEST_CASE("nonpositive conductivity is rejected with the element index") {
    const Setup s = small_setup();
    Vector xi = Vector::Zero(s.op.n);
    xi[3] = -1.5;
    try {
      s.cem().check_conductivity(xi);
      FAIL("expected an exception");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }

  TEST_CASE("measurement files round trip and validate") {
    MeasurementSet ms;
    ms.L = 4;
    ms.data = uniform_vector(12, 15);
    ms.noise_std = 0.01;
    ms.seed = 99;
    ms.mesh_id = "abc";
    const auto path = std::filesystem::temp_directory_path() / "eitias_measurement_test.json";
    write_measurement(path, ms);
    const MeasurementSet back = read_measurement(path);
    CHECK(back.data == ms.data);
    CHECK(back.seed == 99);
    CHECK(back.mesh_id == "abc");
    std::filesystem::remove(path);
    MeasurementSet bad = ms;
    bad.data.resize(11);
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = ms;
    bad.data[2] = std::nan("");
    CHECK_THROWS_AS(bad.validate(), InputError);
  }
}
