#include <eitias/lsq.hpp>

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>

namespace eitias {

std::string to_string(Backend b) {
  switch (b) {
    case Backend::NormalDirect: return "normal-direct";
    case Backend::AdjointDirect: return "adjoint-direct";
    case Backend::LanczosBasis: return "lanczos-basis";
    case Backend::LanczosNoBasis: return "lanczos-nobasis";
    case Backend::CglsQmap: return "cgls-qmap";
  }
  return "unknown";
}

Backend backend_from_string(const std::string& name) {
  for (Backend b : all_backends())
    if (to_string(b) == name) return b;
  throw InputError("unknown backend '" + name +
                   "' (expected normal-direct, adjoint-direct, lanczos-basis, lanczos-nobasis or cgls-qmap)");
}

std::vector<Backend> all_backends() {
  return {Backend::NormalDirect, Backend::AdjointDirect, Backend::LanczosBasis, Backend::LanczosNoBasis,
          Backend::CglsQmap};
}

LinearizedProblem::LinearizedProblem(Matrix A, Vector rhs)
    : m_(A.rows()), N_(A.cols()), dense_(std::make_shared<const Matrix>(std::move(A))), rhs_(std::move(rhs)) {
  require(rhs_.size() == m_, "right-hand side length must equal the number of rows of A");
}

LinearizedProblem::LinearizedProblem(Eigen::Index m, Eigen::Index N, std::function<Vector(const Vector&)> apply,
                                     std::function<Vector(const Vector&)> apply_transpose, Vector rhs)
    : m_(m), N_(N), apply_(std::move(apply)), apply_t_(std::move(apply_transpose)), rhs_(std::move(rhs)) {
  require(apply_ && apply_t_, "matrix-free problem needs both products");
  require(rhs_.size() == m_, "right-hand side length must equal m");
}

const Matrix& LinearizedProblem::dense() const {
  if (!dense_) {
    Matrix A(m_, N_);
    Vector e = Vector::Zero(N_);
    for (Eigen::Index k = 0; k < N_; ++k) {
      e[k] = 1.0;
      A.col(k) = apply_(e);
      e[k] = 0.0;
    }
    const_cast<LinearizedProblem*>(this)->dense_ = std::make_shared<const Matrix>(std::move(A));
  }
  return *dense_;
}

Vector LinearizedProblem::apply(const Vector& x) const {
  if (dense_) return *dense_ * x;
  return apply_(x);
}

Vector LinearizedProblem::apply_transpose(const Vector& y) const {
  if (dense_) return dense_->transpose() * y;
  return apply_t_(y);
}

double LinearizedProblem::objective(const Vector& alpha) const {
  return 0.5 * ((rhs_ - apply(alpha)).squaredNorm() + alpha.squaredNorm());
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double optimality_residual(const LinearizedProblem& p, const Vector& alpha) {
  const Vector atr = p.apply_transpose(p.rhs());
  const Vector g = p.apply_transpose(p.rhs() - p.apply(alpha)) - alpha;
  const double scale = atr.norm();
  return scale > 0 ? g.norm() / scale : g.norm();
}

}  // namespace

SolveReport solve_normal_direct(const LinearizedProblem& problem, const DirectOptions& options) {
  const auto start = Clock::now();
  const Eigen::Index N = problem.N();
  if (N > options.dense_limit)
    throw InputError("normal equations of size " + std::to_string(N) + " exceed the dense limit " +
                     std::to_string(options.dense_limit));
  const Matrix& A = problem.dense();
  Matrix M = Matrix::Identity(N, N);
  M.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
  Eigen::LLT<Matrix, Eigen::Lower> llt(M);
  if (llt.info() != Eigen::Success) throw NumericalError("normal-equation factorization failed");
  SolveReport rep;
  rep.backend = Backend::NormalDirect;
  rep.alpha = llt.solve(A.transpose() * problem.rhs());
  rep.wall_time_ms = elapsed_ms(start);
  rep.error_monitor = optimality_residual(problem, rep.alpha);
  return rep;
}

SolveReport solve_adjoint_direct(const LinearizedProblem& problem, const DirectOptions& options) {
  const auto start = Clock::now();
  const Eigen::Index m = problem.m();
  if (m > options.dense_limit)
    throw InputError("adjoint system of size " + std::to_string(m) + " exceeds the dense limit");
  const Matrix& A = problem.dense();
  Matrix G = Matrix::Identity(m, m);
  G.selfadjointView<Eigen::Lower>().rankUpdate(A);
  Eigen::LLT<Matrix, Eigen::Lower> llt(G);
  if (llt.info() != Eigen::Success) throw NumericalError("adjoint-system factorization failed");
  const Vector z = llt.solve(problem.rhs());
  SolveReport rep;
  rep.backend = Backend::AdjointDirect;
  rep.alpha = A.transpose() * z;
  rep.wall_time_ms = elapsed_ms(start);
  rep.error_monitor = optimality_residual(problem, rep.alpha);
  return rep;
}

namespace {

// (C C^T + I) y = c e_1 for lower bidiagonal C with diagonal rho and
// subdiagonal sigma[1..l-1] (sigma[i] sits in row i). Thomas algorithm; the
// matrix is SPD so no pivoting is needed.
Vector solve_projected(const std::vector<double>& rho, const std::vector<double>& sigma, std::size_t l, double c) {
  std::vector<double> diag(l), off(l > 0 ? l - 1 : 0);
  for (std::size_t i = 0; i < l; ++i) diag[i] = rho[i] * rho[i] + (i > 0 ? sigma[i] * sigma[i] : 0.0) + 1.0;
  for (std::size_t i = 0; i + 1 < l; ++i) off[i] = rho[i] * sigma[i + 1];
  std::vector<double> d(l), rhs(l, 0.0);
  rhs[0] = c;
  d[0] = diag[0];
  for (std::size_t i = 1; i < l; ++i) {
    const double w = off[i - 1] / d[i - 1];
    d[i] = diag[i] - w * off[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  Vector y(static_cast<Eigen::Index>(l));
  for (std::size_t k = l; k-- > 0;) {
    const double next = k + 1 < l ? off[k] * y[static_cast<Eigen::Index>(k + 1)] : 0.0;
    y[static_cast<Eigen::Index>(k)] = (rhs[k] - next) / d[k];
  }
  return y;
}

// Golub-Kahan bidiagonalization seeded with v_1 = rhs / ||rhs||:
//   rho_l u_l = A^T v_l - sigma_l u_{l-1},  sigma_{l+1} v_{l+1} = A u_l - rho_l v_l.
struct Recurrence {
  const LinearizedProblem& p;
  bool reorth;
  Matrix* U;
  Matrix* V;
  Vector u, v;
  double sigma = 0.0;
  double rho = 0.0;
  int step = 0;

  Recurrence(const LinearizedProblem& prob, bool reorthogonalize, Matrix* Ustore, Matrix* Vstore)
      : p(prob), reorth(reorthogonalize), U(Ustore), V(Vstore) {
    v = p.rhs() / p.rhs().norm();
    u = Vector::Zero(p.N());
    if (V) V->col(0) = v;
  }

  // Advances one step; returns false on breakdown of rho.
  bool advance() {
    Vector ut = p.apply_transpose(v) - sigma * u;
    if (reorth && U && step > 0) {
      const auto Ub = U->leftCols(step);
      ut -= Ub * (Ub.transpose() * ut);
    }
    rho = ut.norm();
    if (!(rho > 0)) return false;
    u = ut / rho;
    if (U) U->col(step) = u;
    Vector vt = p.apply(u) - rho * v;
    if (reorth && V) {
      const auto Vb = V->leftCols(step + 1);
      vt -= Vb * (Vb.transpose() * vt);
    }
    sigma = vt.norm();
    if (sigma > 0) v = vt / sigma;
    if (V && sigma > 0) V->col(step + 1) = v;
    ++step;
    return true;
  }
};

}  // namespace

SolveReport solve_lanczos(const LinearizedProblem& problem, const LanczosOptions& options, LanczosBasis* basis_out) {
  require(options.tol > 0, "Lanczos tolerance must be positive");
  const auto start = Clock::now();
  const Eigen::Index m = problem.m(), N = problem.N();
  const int max_it = options.max_iterations > 0 ? options.max_iterations : static_cast<int>(std::min(m, N));
  SolveReport rep;
  rep.backend = options.store_basis ? Backend::LanczosBasis : Backend::LanczosNoBasis;
  const double rnorm = problem.rhs().norm();
  if (rnorm == 0.0) {
    rep.alpha = Vector::Zero(N);
    rep.wall_time_ms = elapsed_ms(start);
    return rep;
  }
  const double threshold = options.relative ? options.tol * rnorm : options.tol;

  Matrix U, V;
  if (options.store_basis) {
    U.resize(N, max_it);
    V.resize(m, max_it + 1);
  }
  const bool reorth = options.store_basis && options.reorthogonalize;
  Recurrence rec(problem, reorth, options.store_basis ? &U : nullptr, options.store_basis ? &V : nullptr);
  std::vector<double> rho, sigma{0.0};
  Vector y;
  bool converged = false;
  while (rec.step < max_it) {
    if (!rec.advance()) {
      rep.note = "breakdown";
      converged = true;
      break;
    }
    rho.push_back(rec.rho);
    sigma.push_back(rec.sigma);  // sigma[l] is sigma_{l+1} in one-based terms
    const std::size_t l = rho.size();
    y = solve_projected(rho, sigma, l, rnorm);
    const double monitor = rec.rho * rec.sigma * std::abs(y[static_cast<Eigen::Index>(l - 1)]);
    rep.residual_history.push_back(monitor);
    if (monitor <= threshold || !(rec.sigma > 0)) {
      converged = true;
      break;
    }
  }
  const std::size_t l = rho.size();
  rep.iterations = static_cast<int>(l);
  rep.converged = converged;
  if (!converged) rep.note = "tolerance not reached";
  rep.error_monitor = rep.residual_history.empty() ? 0.0 : rep.residual_history.back();
  if (l > 0 && y.size() != static_cast<Eigen::Index>(l)) y = solve_projected(rho, sigma, l, rnorm);

  // alpha = U_l C_l^T y with (C^T y)_i = rho_i y_i + sigma_{i+1} y_{i+1},
  // accumulated in the same order in both modes.
  auto weight = [&](std::size_t i) {
    return rho[i] * y[static_cast<Eigen::Index>(i)] + (i + 1 < l ? sigma[i + 1] * y[static_cast<Eigen::Index>(i + 1)] : 0.0);
  };
  rep.alpha = Vector::Zero(N);
  if (options.store_basis) {
    for (std::size_t i = 0; i < l; ++i) rep.alpha += weight(i) * U.col(static_cast<Eigen::Index>(i));
  } else {
    Recurrence again(problem, false, nullptr, nullptr);
    for (std::size_t i = 0; i < l; ++i) {
      again.advance();
      rep.alpha += weight(i) * again.u;
    }
  }
  if (basis_out && options.store_basis) {
    const auto li = static_cast<Eigen::Index>(l);
    basis_out->U = U.leftCols(li);
    basis_out->V = V.leftCols(li + 1);
    basis_out->C = Matrix::Zero(li, li);
    for (Eigen::Index i = 0; i < li; ++i) {
      basis_out->C(i, i) = rho[i];
      if (i + 1 < li) basis_out->C(i + 1, i) = sigma[i + 1];
    }
    basis_out->sigma_next = sigma[l];
  }
  rep.wall_time_ms = elapsed_ms(start);
  return rep;
}

SolveReport solve_cgls_early_stop(const LinearizedProblem& problem, const CglsOptions& options) {
  const auto start = Clock::now();
  const Eigen::Index m = problem.m(), N = problem.N();
  const double target = options.discrepancy_target > 0 ? options.discrepancy_target : static_cast<double>(m);
  const int max_it = options.max_iterations > 0 ? options.max_iterations : static_cast<int>(std::min(m, N));
  std::function<double(const Vector&)> objective = options.objective;
  if (!objective) objective = [&](const Vector& a) { return problem.objective(a); };

  SolveReport rep;
  rep.backend = Backend::CglsQmap;
  Vector x = Vector::Zero(N);
  Vector s = problem.rhs();
  double res2 = s.squaredNorm();
  rep.residual_history.push_back(res2);
  rep.converged = false;
  if (res2 <= target) {
    rep.alpha = x;
    rep.error_monitor = res2;
    rep.converged = true;
    rep.wall_time_ms = elapsed_ms(start);
    return rep;
  }
  Vector g = problem.apply_transpose(s);
  Vector p = g;
  double gamma = g.squaredNorm();
  double g_prev = options.semiconvergence ? objective(x) : 0.0;
  int it = 0;
  while (it < max_it && gamma > 0) {
    const Vector q = problem.apply(p);
    const double qq = q.squaredNorm();
    if (!(qq > 0)) break;
    const double a = gamma / qq;
    Vector x_next = x + a * p;
    if (options.semiconvergence) {
      const double g_next = objective(x_next);
      if (g_next > g_prev) {
        rep.note = "semiconvergence minimum";
        rep.converged = true;
        break;
      }
      g_prev = g_next;
    }
    x = std::move(x_next);
    s -= a * q;
    ++it;
    res2 = s.squaredNorm();
    rep.residual_history.push_back(res2);
    if (res2 <= target) {
      rep.converged = true;
      break;
    }
    g = problem.apply_transpose(s);
    const double gamma_next = g.squaredNorm();
    p = g + (gamma_next / gamma) * p;
    gamma = gamma_next;
  }
  if (!rep.converged) rep.note = "discrepancy not reached";
  rep.alpha = std::move(x);
  rep.iterations = it;
  rep.error_monitor = res2;
  rep.wall_time_ms = elapsed_ms(start);
  return rep;
}

SolveReport solve(Backend backend, const LinearizedProblem& problem, const BackendOptions& options) {
  switch (backend) {
    case Backend::NormalDirect: return solve_normal_direct(problem, options.direct);
    case Backend::AdjointDirect: return solve_adjoint_direct(problem, options.direct);
    case Backend::LanczosBasis: {
      LanczosOptions o = options.lanczos;
      o.store_basis = true;
      return solve_lanczos(problem, o);
    }
    case Backend::LanczosNoBasis: {
      LanczosOptions o = options.lanczos;
      o.store_basis = false;
      return solve_lanczos(problem, o);
    }
    case Backend::CglsQmap: return solve_cgls_early_stop(problem, options.cgls);
  }
  throw InputError("unknown backend");
}

}  // namespace eitias
