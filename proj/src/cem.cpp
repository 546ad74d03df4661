#include <eitias/cem.hpp>

#include <cmath>
#include <random>

namespace eitias {

CurrentBasis trigonometric_basis(int L) {
  require(L >= 4 && L % 2 == 0, "trigonometric basis needs an even electrode count >= 4");
  Matrix E(L, L - 1);
  for (int l = 1; l < L; ++l) {
    for (int j = 1; j <= L; ++j) {
      const double arg = l <= L / 2 ? 2.0 * kPi * l * j / L : 2.0 * kPi * (l - L / 2) * j / L;
      E(j - 1, l - 1) = l <= L / 2 ? std::cos(arg) : std::sin(arg);
    }
    E.col(l - 1).normalize();
  }
  return {std::move(E), "trig"};
}

CurrentBasis custom_basis(Matrix E) {
  require(E.rows() >= 2 && E.cols() == E.rows() - 1, "basis must be L x (L-1)");
  const Matrix gram = E.transpose() * E;
  require((gram - Matrix::Identity(E.cols(), E.cols())).cwiseAbs().maxCoeff() <= 1e-12,
          "basis columns are not orthonormal");
  require(E.colwise().sum().cwiseAbs().maxCoeff() <= 1e-12, "basis columns must sum to zero");
  return {std::move(E), "custom"};
}

Eigen::Matrix3d element_stiffness(const Mesh& mesh, int element) {
  require(element >= 0 && element < mesh.num_elements(), "element index out of range");
  const auto& t = mesh.triangles[element];
  const Vec2& a = mesh.vertices[t[0]];
  const Vec2& b = mesh.vertices[t[1]];
  const Vec2& c = mesh.vertices[t[2]];
  const double twice_area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
  if (!(std::abs(twice_area) > 0.0))
    throw InputError("degenerate triangle " + std::to_string(element));
  // grad psi_i = rot90(opposite edge) / (2 area)
  Eigen::Matrix<double, 2, 3> g;
  const Vec2 e0 = c - b, e1 = a - c, e2 = b - a;
  g.col(0) << -e0.y(), e0.x();
  g.col(1) << -e1.y(), e1.x();
  g.col(2) << -e2.y(), e2.x();
  return (g.transpose() * g) / (2.0 * std::abs(twice_area));
}

namespace {

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  return a < 0 ? a + 2.0 * kPi : a;
}

int electrode_of_segment(const ElectrodeLayout& layout, const Vec2& p, const Vec2& q) {
  const Vec2 mid = 0.5 * (p + q);
  const double phi = normalize_angle(std::atan2(mid.y(), mid.x()));
  for (int l = 0; l < layout.count(); ++l) {
    const Arc& arc = layout.arcs[l];
    if (normalize_angle(phi - arc.start) < arc.length()) return l;
  }
  return -1;
}

}  // namespace

CemSystem::CemSystem(Mesh mesh, int n, ElectrodeLayout layout, CurrentBasis basis, double sigma0)
    : mesh_(std::move(mesh)), n_(n), layout_(std::move(layout)), basis_(std::move(basis)), sigma0_(sigma0) {
  require(sigma0_ > 0, "background conductivity must be positive");
  require(n_ >= 0 && n_ <= mesh_.num_elements(), "subdomain size out of range");
  layout_.validate();
  require(basis_.electrodes() == layout_.count(), "basis and electrode layout disagree on L");
  const int nv = mesh_.num_vertices();
  const int L = layout_.count();
  const int P = basis_.patterns();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * mesh_.num_elements());
  element_matrices_.reserve(n_);
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    const Eigen::Matrix3d k = element_stiffness(mesh_, e);
    const auto& t = mesh_.triangles[e];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.emplace_back(t[i], t[j], k(i, j));
    if (e < n_) element_matrices_.push_back(k);
  }
  k0_.resize(nv, nv);
  k0_.setFromTriplets(trip.begin(), trip.end());

  // Boundary terms sum_l (1/z_l) int_{E_l} (u - U_l)(v - V_l) with exact
  // integration of linear traces on each boundary segment.
  trip.clear();
  Matrix trace_integrals = Matrix::Zero(nv, L);  // int_{E_l} psi_i
  electrode_lengths_ = Vector::Zero(L);
  for (const auto& seg : mesh_.boundary_segments) {
    const Vec2& p = mesh_.vertices[seg[0]];
    const Vec2& q = mesh_.vertices[seg[1]];
    const int l = electrode_of_segment(layout_, p, q);
    if (l < 0) continue;
    const double h = (q - p).norm();
    const double w = 1.0 / layout_.contact_impedance[l];
    trip.emplace_back(seg[0], seg[0], w * h / 3.0);
    trip.emplace_back(seg[1], seg[1], w * h / 3.0);
    trip.emplace_back(seg[0], seg[1], w * h / 6.0);
    trip.emplace_back(seg[1], seg[0], w * h / 6.0);
    trace_integrals(seg[0], l) += h / 2.0;
    trace_integrals(seg[1], l) += h / 2.0;
    electrode_lengths_[l] += h;
  }
  for (int l = 0; l < L; ++l)
    if (!(electrode_lengths_[l] > 0)) throw InputError("electrode " + std::to_string(l) + " covers no boundary segment");
  electrode_mass_.resize(nv, nv);
  electrode_mass_.setFromTriplets(trip.begin(), trip.end());

  const Vector inv_z = layout_.contact_impedance.cwiseInverse();
  k12_ = -trace_integrals * inv_z.asDiagonal() * basis_.E;
  k22_ = basis_.E.transpose() * (electrode_lengths_.cwiseProduct(inv_z)).asDiagonal() * basis_.E;
  (void)P;
}

void CemSystem::check_conductivity(const Vector& xi) const {
  require(xi.size() == n_, "xi has length " + std::to_string(xi.size()) + ", expected " + std::to_string(n_));
  for (int e = 0; e < n_; ++e)
    if (!(sigma0_ + xi[e] > 0))
      throw InputError("non-positive conductivity " + std::to_string(sigma0_ + xi[e]) + " on element " + std::to_string(e));
}

SparseMatrix CemSystem::stiffness(const Vector& xi) const {
  require(xi.size() == n_, "xi has wrong length");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * n_);
  for (int e = 0; e < n_; ++e) {
    if (xi[e] == 0.0) continue;
    const auto& t = mesh_.triangles[e];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.emplace_back(t[i], t[j], xi[e] * element_matrices_[e](i, j));
  }
  SparseMatrix pert(num_vertices(), num_vertices());
  pert.setFromTriplets(trip.begin(), trip.end());
  SparseMatrix out = sigma0_ * k0_;
  return out + pert;
}

SparseMatrix CemSystem::assemble(const Vector& xi) const {
  check_conductivity(xi);
  const SparseMatrix k11 = stiffness(xi) + electrode_mass_;
  const int nv = num_vertices();
  const int P = patterns();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(k11.nonZeros() + 2 * 4 * nv + P * P);
  for (int c = 0; c < k11.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(k11, c); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < nv; ++i)
    for (int k = 0; k < P; ++k)
      if (k12_(i, k) != 0.0) {
        trip.emplace_back(i, nv + k, k12_(i, k));
        trip.emplace_back(nv + k, i, k12_(i, k));
      }
  for (int k = 0; k < P; ++k)
    for (int j = 0; j < P; ++j) trip.emplace_back(nv + k, nv + j, k22_(k, j));
  SparseMatrix K(nv + P, nv + P);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

SparseMatrix CemSystem::direction_matrix(const Vector& v) const {
  require(v.size() == n_, "direction has wrong length");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * n_);
  for (int e = 0; e < n_; ++e) {
    if (v[e] == 0.0) continue;
    const auto& t = mesh_.triangles[e];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.emplace_back(t[i], t[j], v[e] * element_matrices_[e](i, j));
  }
  SparseMatrix D(dimension(), dimension());
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

Matrix FrameSolution::solve(const Matrix& rhs) const {
  Matrix out = factor->solve(rhs);
  if (factor->info() != Eigen::Success) throw NumericalError("solve with the CEM factorization failed");
  return out;
}

FrameSolution solve_frame(const CemSystem& system, const Vector& xi) {
  FrameSolution f;
  f.xi = xi;
  f.K = system.assemble(xi);
  auto llt = std::make_shared<SparseLLT>();
  llt->compute(f.K);
  if (llt->info() != Eigen::Success)
    throw NumericalError("CEM matrix is not positive definite; check sigma0 + xi > 0 and contact impedances");
  f.factor = llt;
  const int nv = system.num_vertices();
  const int P = system.patterns();
  Matrix rhs = Matrix::Zero(nv + P, P);
  rhs.bottomRows(P).setIdentity();
  f.X = llt->solve(rhs);
  // Normwise backward error; the 1/z terms make ||K|| large, so a residual
  // measured against ||rhs|| alone would reflect conditioning, not accuracy.
  auto backward_error = [&] { return (f.K * f.X - rhs).norm() / (f.K.norm() * f.X.norm() + rhs.norm()); };
  if (!(backward_error() <= 1e-12)) f.X += llt->solve(rhs - f.K * f.X);
  const double err = backward_error();
  if (!(err <= 1e-10)) throw NumericalError("frame solve backward error " + std::to_string(err) + " exceeds 1e-10");
  return f;
}

Matrix resistance_matrix(const CemSystem& system, const FrameSolution& frame) {
  const Matrix& E = system.basis().E;
  return E * frame.alpha() * E.transpose();
}

Matrix resistance_matrix(const CemSystem& system, const Vector& xi) {
  return resistance_matrix(system, solve_frame(system, xi));
}

Vector stack_voltages(const Matrix& E, const Matrix& alpha) {
  const Matrix U = E * alpha;
  return Eigen::Map<const Vector>(U.data(), U.size());
}

Vector forward_map(const CemSystem& system, const Vector& xi) {
  return stack_voltages(system.basis().E, solve_frame(system, xi).alpha());
}

double condition_estimate(const CemSystem& system, const Vector& xi, int iterations) {
  const FrameSolution f = solve_frame(system, xi);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Vector x(f.K.rows());
  for (auto& v : x) v = nd(rng);
  Vector y = x.normalized();
  double lmax = 0;
  for (int k = 0; k < iterations; ++k) {
    Vector z = f.K * y;
    lmax = z.norm();
    y = z / lmax;
  }
  y = x.normalized();
  double inv_lmin = 0;
  for (int k = 0; k < iterations; ++k) {
    Vector z = f.factor->solve(y);
    inv_lmin = z.norm();
    y = z / inv_lmin;
  }
  return lmax * inv_lmin;
}

void MeasurementSet::validate() const {
  require(L >= 2, "measurement L must be at least 2");
  require(m() == L * (L - 1), "measurement length must equal L(L-1)");
  require(noise_std >= 0, "noise_std must be non-negative");
  require(data.allFinite(), "measurement data contains non-finite values");
}

Json measurement_to_json(const MeasurementSet& ms) {
  Json j;
  j["L"] = ms.L;
  j["basis"] = ms.basis;
  j["m"] = ms.m();
  j["data"] = to_json(ms.data);
  j["noise_std"] = ms.noise_std;
  j["seed"] = ms.seed;
  j["mesh_id"] = ms.mesh_id;
  j["rng"] = "mt19937_64+box-muller";
  if (!ms.warnings.empty()) j["warnings"] = ms.warnings;
  return j;
}

MeasurementSet measurement_from_json(const Json& j) {
  for (const char* key : {"L", "m", "data", "noise_std"})
    require(j.contains(key), std::string("measurement file is missing field '") + key + "'");
  MeasurementSet ms;
  ms.L = j.at("L").get<int>();
  ms.basis = j.value("basis", std::string("trig"));
  require(ms.basis == "trig", "only the trigonometric basis is supported in measurement files");
  ms.data = vector_from_json(j.at("data"));
  require(j.at("m").get<int>() == ms.m(), "field m disagrees with the data length");
  ms.noise_std = j.at("noise_std").get<double>();
  ms.seed = j.value("seed", std::uint64_t{0});
  ms.mesh_id = j.value("mesh_id", std::string());
  if (j.contains("warnings")) ms.warnings = j.at("warnings").get<std::vector<std::string>>();
  ms.validate();
  return ms;
}

void write_measurement(const std::filesystem::path& path, const MeasurementSet& ms) {
  ms.validate();
  write_json_atomic(path, measurement_to_json(ms), 1);
}

MeasurementSet read_measurement(const std::filesystem::path& path) {
  return measurement_from_json(read_json(path));
}

}  // namespace eitias
