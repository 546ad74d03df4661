#pragma once

#include <eitias/pipeline.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <random>

namespace eitias::test {

inline Mesh small_mesh(int electrodes = 8, int target = 260, double grading = 2.0, double fill = 0.5) {
  return make_mesh(MeshConfig{electrodes, fill, target, grading}, 0.9);
}

inline Setup small_setup(int electrodes = 8, int target = 260, double z0 = 1e-2, double grading = 2.0) {
  return make_setup(small_mesh(electrodes, target, grading), ElectrodeLayout::uniform(electrodes, 0.5, 1.0).arcs,
                    ForwardConfig{1.0, z0, 0.9});
}

inline Vector uniform_vector(Eigen::Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline double rel_err(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

// Moore-Penrose inverse through a full SVD.
inline Matrix svd_pinv(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cut = 1e-13 * s[0] * std::max(A.rows(), A.cols());
  Vector inv = s;
  for (Eigen::Index i = 0; i < s.size(); ++i) inv[i] = s[i] > cut ? 1.0 / s[i] : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace eitias::test
