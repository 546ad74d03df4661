#include <eitias/sensitivity.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace eitias {

namespace {

Matrix vertex_rows(const Matrix& X, const std::array<int, 3>& t) {
  Matrix out(3, X.cols());
  for (int i = 0; i < 3; ++i) out.row(i) = X.row(t[i]);
  return out;
}

void check_frame(const FrameSolution& frame, const CemSystem& system) {
  require(frame.X.rows() == system.dimension() && frame.X.cols() == system.patterns(),
          "frame solution does not match the CEM system");
  require(frame.xi.size() == system.n(), "frame solution has the wrong xi length");
}

}  // namespace

Matrix alpha_derivative(const FrameSolution& frame, const CemSystem& system, int element) {
  check_frame(frame, system);
  require(element >= 0 && element < system.n(), "element is outside the subdomain");
  const Matrix Xv = vertex_rows(frame.X, system.mesh().triangles[element]);
  return -Xv.transpose() * system.element_matrices()[element] * Xv;
}

Matrix alpha_jacobian(const FrameSolution& frame, const CemSystem& system) {
  check_frame(frame, system);
  const int P = system.patterns();
  Matrix Ja(P * P, system.n());
  for (int nu = 0; nu < system.n(); ++nu) {
    const Matrix Xv = vertex_rows(frame.X, system.mesh().triangles[nu]);
    const Matrix d = -Xv.transpose() * system.element_matrices()[nu] * Xv;
    Ja.col(nu) = Eigen::Map<const Vector>(d.data(), d.size());
  }
  return Ja;
}

Jacobian jacobian_adjoint(const FrameSolution& frame, const CemSystem& system) {
  check_frame(frame, system);
  const Matrix& E = system.basis().E;
  const int L = system.basis().electrodes();
  const int P = system.patterns();
  // Rows of X E^T at the element vertices give E d_nu alpha = -(X_v E^T)^T k X_v.
  const Matrix XE = frame.potentials() * E.transpose();
  Jacobian out;
  out.xi = frame.xi;
  out.J.resize(static_cast<Eigen::Index>(L) * P, system.n());
  for (int nu = 0; nu < system.n(); ++nu) {
    const auto& t = system.mesh().triangles[nu];
    const Matrix Xv = vertex_rows(frame.X, t);
    const Matrix XEv = vertex_rows(XE, t);
    const Matrix d = -XEv.transpose() * system.element_matrices()[nu] * Xv;
    out.J.col(nu) = Eigen::Map<const Vector>(d.data(), d.size());
  }
  return out;
}

Matrix second_directional_derivative(const FrameSolution& frame, const CemSystem& system, const Vector& v) {
  check_frame(frame, system);
  require(v.size() == system.n(), "direction has the wrong length");
  const Matrix S = system.direction_matrix(v) * frame.X;
  const Matrix W = frame.solve(S);
  const Matrix out = 2.0 * S.transpose() * W;
  return 0.5 * (out + out.transpose());
}

VarthetaResult compute_vartheta(const Jacobian& jacobian_at_zero, const IncrementOperator& op, const VarthetaRule& rule) {
  require(jacobian_at_zero.J.cols() == op.n, "Jacobian and increment operator disagree on n");
  require(rule.max_value > 0 && rule.cap_ratio >= 1, "invalid vartheta rule");
  const WeightedPseudoInverse pinv(op);
  // Row j of L (L^T L)^{-1} J^T is (J L^dagger e_j)^T.
  const Matrix G = pinv.solve_normal(jacobian_at_zero.J.transpose());
  const Matrix LG = op.matrix * G;
  VarthetaResult out;
  out.sensitivity = LG.rowwise().squaredNorm();
  const double smax = out.sensitivity.maxCoeff();
  require(smax > 0, "the Jacobian has no sensitivity to any increment");
  const double floor = smax / rule.cap_ratio;
  Vector s = out.sensitivity;
  for (Eigen::Index j = 0; j < s.size(); ++j)
    if (!(s[j] >= floor)) {
      s[j] = floor;
      ++out.capped;
    }
  out.scale = rule.max_value * s.minCoeff();
  out.vartheta = out.scale * s.cwiseInverse();
  return out;
}

Matrix data_coefficients(const Matrix& E, const Vector& b) {
  require(b.size() == E.rows() * E.cols(), "data length must be L(L-1)");
  const Eigen::Map<const Matrix> U(b.data(), E.rows(), E.cols());
  return E.transpose() * U;
}

namespace {

struct Spectrum {
  double min = 0.0;
  double max_abs = 0.0;
};

// Lanczos with full reorthogonalization for the extreme eigenvalues of a
// symmetric operator.
template <class Apply>
Spectrum lanczos_extremes(Apply apply, Eigen::Index dim, int steps) {
  steps = static_cast<int>(std::min<Eigen::Index>(steps, dim));
  Matrix Q(dim, steps + 1);
  Vector alpha(steps), beta(steps);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  Vector q(dim);
  for (auto& v : q) v = nd(rng);
  Q.col(0) = q.normalized();
  int k = 0;
  for (; k < steps; ++k) {
    Vector w = apply(Q.col(k));
    alpha[k] = Q.col(k).dot(w);
    for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * w);
    beta[k] = w.norm();
    if (beta[k] < 1e-14 * std::abs(alpha[k]) || k + 1 == steps) {
      ++k;
      break;
    }
    Q.col(k + 1) = w / beta[k];
  }
  Matrix T = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    T(i, i) = alpha[i];
    if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(T, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()[0], es.eigenvalues().cwiseAbs().maxCoeff()};
}

Vector symmetric_eigenvalues(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return es.eigenvalues();
}

}  // namespace

ConvexityReport convexity_probe(const CemSystem& system, const IncrementOperator& op, const Vector& xi,
                                const Matrix& gamma, double omega, const Vector& zeta, const Vector& theta,
                                const HyperModel& hyper, const ConvexityOptions& options) {
  require(hyper.r == 1.0, "the convexity probe covers the r = 1 hypermodel only");
  require(omega > 0, "the convexity probe needs a positive noise level");
  require(op.n == system.n(), "increment operator and CEM system disagree on n");
  require(zeta.size() == op.N && theta.size() == op.N, "zeta and theta must have length N");
  require((theta.array() > 0).all(), "theta must be positive");
  const int P = system.patterns();
  require(gamma.rows() == P && gamma.cols() == P, "gamma must be (L-1) x (L-1)");
  const int n = system.n();
  const int N = op.N;

  const FrameSolution frame = solve_frame(system, xi);
  ConvexityReport rep;
  const Matrix Ja = alpha_jacobian(frame, system);
  rep.d = Ja.transpose() * Ja;

  const Matrix delta = frame.alpha() - gamma;
  const Matrix S = delta + delta.transpose();
  std::vector<Matrix> Y(n);
  for (int mu = 0; mu < n; ++mu)
    Y[mu] = system.element_matrices()[mu] * vertex_rows(frame.X, system.mesh().triangles[mu]) * S;

  // C_{mu nu} = (Delta + Delta^T) : (X_mu^T k_mu W_nu) with W_nu = K^{-1} (d_nu K) X.
  rep.c.resize(n, n);
  Matrix rhs = Matrix::Zero(system.dimension(), P);
  for (int nu = 0; nu < n; ++nu) {
    const auto& t = system.mesh().triangles[nu];
    const Matrix kx = system.element_matrices()[nu] * vertex_rows(frame.X, t);
    for (int i = 0; i < 3; ++i) rhs.row(t[i]) += kx.row(i);
    const Matrix W = frame.solve(rhs);
    for (int i = 0; i < 3; ++i) rhs.row(t[i]).setZero();
    for (int mu = 0; mu < n; ++mu) {
      const auto& tm = system.mesh().triangles[mu];
      double acc = 0.0;
      for (int i = 0; i < 3; ++i) acc += Y[mu].row(i).dot(W.row(tm[i]));
      rep.c(mu, nu) = acc;
    }
  }
  rep.c = 0.5 * (rep.c + rep.c.transpose());

  rep.eig_d = symmetric_eigenvalues(rep.d);
  rep.min_eig_d = rep.eig_d[0];
  const Vector eig_c2 = symmetric_eigenvalues(2.0 * rep.c);
  rep.min_eig_c_sym = eig_c2[0];
  rep.norm_c = 0.5 * eig_c2.cwiseAbs().maxCoeff();
  const Matrix cd = rep.c + rep.d;
  rep.eig_cd = symmetric_eigenvalues(cd);
  rep.min_eig_cd = rep.eig_cd[0];

  const WeightedPseudoInverse pinv(op);
  const Matrix Lpinv = pinv.solve_normal(Matrix(op.matrix.transpose()));  // n x N
  rep.hzz = Lpinv.transpose() * (cd * Lpinv) / (omega * omega);
  rep.hzz.diagonal() += theta.cwiseInverse();
  rep.hzz = 0.5 * (rep.hzz + rep.hzz.transpose());
  rep.hzt = -zeta.array() / theta.array().square();
  rep.htt = zeta.array().square() / theta.array().cube() + hyper.eta() / theta.array().square();

  if (2 * N <= options.dense_limit) {
    const Vector eig = symmetric_eigenvalues(assemble_hessian(rep));
    rep.min_eig_hessian = eig[0];
    rep.norm_hessian = eig.cwiseAbs().maxCoeff();
    rep.hessian_dense = true;
  } else {
    auto apply = [&](const Vector& q) {
      Vector out(2 * N);
      out.head(N) = rep.hzz * q.head(N) + rep.hzt.cwiseProduct(q.tail(N));
      out.tail(N) = rep.hzt.cwiseProduct(q.head(N)) + rep.htt.cwiseProduct(q.tail(N));
      return out;
    };
    const Spectrum s = lanczos_extremes(apply, 2 * N, options.lanczos_steps);
    rep.min_eig_hessian = s.min;
    rep.norm_hessian = s.max_abs;
    rep.hessian_dense = false;
  }
  return rep;
}

Matrix assemble_hessian(const ConvexityReport& report) {
  const Eigen::Index N = report.hzz.rows();
  Matrix H = Matrix::Zero(2 * N, 2 * N);
  H.topLeftCorner(N, N) = report.hzz;
  H.topRightCorner(N, N).diagonal() = report.hzt;
  H.bottomLeftCorner(N, N).diagonal() = report.hzt;
  H.bottomRightCorner(N, N).diagonal() = report.htt;
  return H;
}

double hessian_quadratic_form(const ConvexityReport& report, const IncrementOperator& op, double omega,
                              const Vector& zeta, const Vector& theta, double eta, const Vector& q) {
  const Eigen::Index N = op.N;
  require(q.size() == 2 * N, "q must have length 2N");
  const Vector q1 = q.head(N), q2 = q.tail(N);
  const Vector x = apply_pseudoinverse(op, nullptr, q1);
  const double data = x.dot((report.c + report.d) * x) / (omega * omega);
  const Eigen::ArrayXd sq = q1.array() - zeta.array() * q2.array() / theta.array();
  return data + (sq.square() / theta.array()).sum() + (eta * q2.array().square() / theta.array().square()).sum();
}

Json convexity_to_json(const ConvexityReport& report, bool include_matrices) {
  Json j;
  j["min_eig_d"] = report.min_eig_d;
  j["min_eig_c_plus_ct"] = report.min_eig_c_sym;
  j["norm_c"] = report.norm_c;
  j["min_eig_c_plus_d"] = report.min_eig_cd;
  j["min_eig_hessian"] = report.min_eig_hessian;
  j["norm_hessian"] = report.norm_hessian;
  j["hessian_method"] = report.hessian_dense ? "dense" : "lanczos";
  j["d_psd"] = report.d_psd();
  j["c_plus_d_psd"] = report.cd_psd();
  j["hessian_psd"] = report.hessian_psd();
  j["spectrum_d"] = to_json(report.eig_d);
  j["spectrum_c_plus_d"] = to_json(report.eig_cd);
  j["hessian_zeta_theta_diag"] = to_json(report.hzt);
  j["hessian_theta_theta_diag"] = to_json(report.htt);
  if (include_matrices) {
    j["d"] = to_json(report.d);
    j["c"] = to_json(report.c);
    j["hessian_zeta_zeta"] = to_json(report.hzz);
  }
  return j;
}

}  // namespace eitias
