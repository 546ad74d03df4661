#include "fixtures.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <random>

using namespace eitias;
using namespace eitias::test;

namespace {

// Dense m x N matrix with singular values decaying from 1 to `floor`.
Matrix graded_matrix(int m, int N, double floor, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix G1(m, m), G2(N, N);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) G1(i, j) = nd(rng);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) G2(i, j) = nd(rng);
  const Matrix Q1 = Eigen::HouseholderQR<Matrix>(G1).householderQ();
  const Matrix Q2 = Eigen::HouseholderQR<Matrix>(G2).householderQ();
  const int k = std::min(m, N);
  Matrix S = Matrix::Zero(m, N);
  for (int i = 0; i < k; ++i) S(i, i) = 10.0 * std::pow(floor, static_cast<double>(i) / (k - 1));
  return Q1 * S * Q2.transpose();
}

// Tikhonov solution from the SVD filter factors s / (s^2 + 1).
Vector svd_filter_solution(const Matrix& A, const Vector& b) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = svd.singularValues();
  const Vector f = (s.array() / (s.array().square() + 1.0)).matrix();
  return svd.matrixV() * f.asDiagonal() * (svd.matrixU().transpose() * b);
}

}  // namespace

TEST_SUITE("lsq") {
  TEST_CASE("backend names round trip") {
    for (Backend b : all_backends()) CHECK(backend_from_string(to_string(b)) == b);
    CHECK_THROWS_AS(backend_from_string("qr"), InputError);
  }

  TEST_CASE("all exact backends reproduce the SVD filter-factor solution") {
    for (auto [m, N] : {std::pair{30, 50}, std::pair{50, 30}, std::pair{40, 40}}) {
      const Matrix A = graded_matrix(m, N, 1e-6, 61 + m);
      const Vector b = uniform_vector(m, 62 + N);
      const Vector ref = svd_filter_solution(A, b);
      const LinearizedProblem p(A, b);
      CHECK(rel_err(solve_normal_direct(p).alpha, ref) < 1e-10);
      CHECK(rel_err(solve_adjoint_direct(p).alpha, ref) < 1e-10);
      LanczosOptions tight;
      tight.tol = 1e-14;
      CHECK(rel_err(solve_lanczos(p, tight).alpha, ref) < 1e-10);
    }
  }

  TEST_CASE("randomized problems: backends agree to 1e-6") {
    for (std::uint64_t k = 0; k < 50; ++k) {
      std::mt19937_64 rng(1000 + k);
      const int m = std::uniform_int_distribution<int>(20, 80)(rng);
      const int N = std::uniform_int_distribution<int>(20, 120)(rng);
      const Matrix A = graded_matrix(m, N, std::pow(10.0, -std::uniform_real_distribution<double>(2, 10)(rng)), 2000 + k);
      const Vector b = uniform_vector(m, 3000 + k, -5, 5);
      const LinearizedProblem p(A, b);
      const Vector adj = solve_adjoint_direct(p).alpha;
      CHECK(rel_err(solve_normal_direct(p).alpha, adj) < 1e-6);
      CHECK(rel_err(solve_lanczos(p).alpha, adj) < 1e-6);
      LanczosOptions nb;
      nb.store_basis = false;
      CHECK(rel_err(solve_lanczos(p, nb).alpha, adj) < 1e-6);
    }
  }

  TEST_CASE("matrix-free and dense problems give the same answer") {
    const Matrix A = graded_matrix(25, 40, 1e-4, 71);
    const Vector b = uniform_vector(25, 72);
    const LinearizedProblem dense(A, b);
    const LinearizedProblem free(
        25, 40, [&](const Vector& x) { return Vector(A * x); }, [&](const Vector& y) { return Vector(A.transpose() * y); },
        b);
    CHECK(rel_err(solve_adjoint_direct(free).alpha, solve_adjoint_direct(dense).alpha) < 1e-12);
    CHECK(rel_err(solve_lanczos(free).alpha, solve_lanczos(dense).alpha) < 1e-12);
  }

  TEST_CASE("Lanczos basis satisfies the bidiagonal relations") {
    const Matrix A = graded_matrix(40, 60, 1e-5, 73);
    const Vector b = uniform_vector(40, 74);
    LanczosBasis B;
    LanczosOptions opt;
    opt.tol = 1e-12;
    const SolveReport r = solve_lanczos(LinearizedProblem(A, b), opt, &B);
    const auto l = B.U.cols();
    REQUIRE(l == r.iterations);
    CHECK((B.U.transpose() * B.U - Matrix::Identity(l, l)).norm() < 1e-10);
    CHECK((B.V.transpose() * B.V - Matrix::Identity(l + 1, l + 1)).norm() < 1e-10);
    // A^T V_l = U_l C_l^T
    CHECK((A.transpose() * B.V.leftCols(l) - B.U * B.C.transpose()).norm() < 1e-10 * A.norm());
    // A U_l = V_{l+1} [C_l; sigma_{l+1} e_l^T]
    Matrix Cext = Matrix::Zero(l + 1, l);
    Cext.topRows(l) = B.C;
    Cext(l, l - 1) = B.sigma_next;
    CHECK((A * B.U - B.V * Cext).norm() < 1e-10 * A.norm());
  }

  TEST_CASE("recomputing the Lanczos vectors is bit-identical without reorthogonalization") {
    const Matrix A = graded_matrix(60, 90, 1e-6, 75);
    const Vector b = uniform_vector(60, 76);
    LanczosOptions with_basis;
    with_basis.reorthogonalize = false;
    LanczosOptions without_basis = with_basis;
    without_basis.store_basis = false;
    const SolveReport a = solve_lanczos(LinearizedProblem(A, b), with_basis);
    const SolveReport c = solve_lanczos(LinearizedProblem(A, b), without_basis);
    CHECK(a.iterations == c.iterations);
    CHECK((a.alpha - c.alpha).cwiseAbs().maxCoeff() == 0.0);
    CHECK(c.backend == Backend::LanczosNoBasis);
  }

  TEST_CASE("Lanczos monitor tracks the true error") {
    const Matrix A = graded_matrix(50, 70, 1e-6, 77);
    const Vector b = uniform_vector(50, 78);
    const Vector ref = svd_filter_solution(A, b);
    LanczosOptions opt;
    opt.tol = 1e-6;
    const SolveReport r = solve_lanczos(LinearizedProblem(A, b), opt);
    CHECK(r.converged);
    CHECK(r.error_monitor <= 1e-6);
    CHECK((r.alpha - ref).norm() < 1e-4);
  }

  TEST_CASE("CGLS residual is monotone and reaches the least-squares solution on exact data") {
    const Matrix A = graded_matrix(40, 25, 1e-2, 79);
    const Vector x_true = uniform_vector(25, 80);
    const Vector b = A * x_true;
    CglsOptions opt;
    opt.discrepancy_target = 1e-20 * b.squaredNorm();
    opt.max_iterations = 200;
    const SolveReport r = solve_cgls_early_stop(LinearizedProblem(A, b), opt);
    for (std::size_t i = 1; i < r.residual_history.size(); ++i)
      CHECK(r.residual_history[i] <= r.residual_history[i - 1] * (1 + 1e-12));
    CHECK(std::sqrt(r.error_monitor) <= 1e-10 * b.norm());
    CHECK(r.converged);
  }

  TEST_CASE("CGLS discrepancy stop lands in the sanity band over 100 noise seeds") {
    const int m = 200, N = 150;
    const Matrix A = graded_matrix(m, N, 1e-8, 81);
    const Vector x_true = uniform_vector(N, 82) * 30.0;
    const Vector clean = A * x_true;
    int inside = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Vector b = clean + gaussian_noise(m, 500 + s);
      const SolveReport r = solve_cgls_early_stop(LinearizedProblem(A, b));
      if (r.converged && r.error_monitor >= 0.5 * m && r.error_monitor <= 2.0 * m) ++inside;
    }
    CHECK(inside == 100);
  }

  TEST_CASE("CGLS reports a missed discrepancy target") {
    const Matrix A = graded_matrix(20, 5, 1e-1, 83);
    const Vector b = uniform_vector(20, 84) * 100.0;
    CglsOptions opt;
    opt.discrepancy_target = 1e-30;
    const SolveReport r = solve_cgls_early_stop(LinearizedProblem(A, b), opt);
    CHECK_FALSE(r.converged);
    CHECK(r.note == "discrepancy not reached");
    CHECK(r.iterations <= 5);
  }

  TEST_CASE("CGLS semiconvergence stops at the objective minimum") {
    const Matrix A = graded_matrix(60, 80, 1e-8, 85);
    const Vector b = uniform_vector(60, 86) * 10.0;
    CglsOptions opt;
    opt.semiconvergence = true;
    opt.discrepancy_target = 1e-30;
    const LinearizedProblem p(A, b);
    const SolveReport r = solve_cgls_early_stop(p, opt);
    CHECK(r.note == "semiconvergence minimum");
    CglsOptions one_more;
    one_more.discrepancy_target = 1e-30;
    one_more.max_iterations = r.iterations + 1;
    const SolveReport next = solve_cgls_early_stop(p, one_more);
    CHECK(p.objective(next.alpha) > p.objective(r.alpha));
  }
}
