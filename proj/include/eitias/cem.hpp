#pragma once

#include <eitias/io.hpp>
#include <eitias/mesh.hpp>

#include <Eigen/SparseCholesky>

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace eitias {

// Orthonormal, zero-sum columns spanning the admissible current patterns.
struct CurrentBasis {
  Matrix E;  // L x (L-1)
  std::string kind = "custom";

  int electrodes() const { return static_cast<int>(E.rows()); }
  int patterns() const { return static_cast<int>(E.cols()); }
};

CurrentBasis trigonometric_basis(int L);
// Checks orthonormality and zero column sums to 1e-12.
CurrentBasis custom_basis(Matrix E);

// |K| grad(psi_j) . grad(psi_k) for the three hat functions of one triangle.
Eigen::Matrix3d element_stiffness(const Mesh& mesh, int element);

using SparseLLT = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

// Complete electrode model on a mesh whose first n elements form the
// subdomain carrying the unknowns xi. The unknown vector of the block system
// is [u; beta] with electrode potentials U = E beta.
class CemSystem {
 public:
  CemSystem(Mesh mesh, int n, ElectrodeLayout layout, CurrentBasis basis, double sigma0);

  const Mesh& mesh() const { return mesh_; }
  const ElectrodeLayout& layout() const { return layout_; }
  const CurrentBasis& basis() const { return basis_; }
  double sigma0() const { return sigma0_; }
  int n() const { return n_; }
  int num_vertices() const { return mesh_.num_vertices(); }
  int patterns() const { return basis_.patterns(); }
  int dimension() const { return num_vertices() + patterns(); }
  int measurements() const { return basis_.electrodes() * basis_.patterns(); }

  const SparseMatrix& k0() const { return k0_; }
  // 1/z weighted boundary mass of the electrode traces (part of K11).
  const SparseMatrix& electrode_mass() const { return electrode_mass_; }
  const Matrix& k12() const { return k12_; }
  const Matrix& k22() const { return k22_; }
  // Local matrices of the subdomain elements; vertices are mesh().triangles[nu].
  const std::vector<Eigen::Matrix3d>& element_matrices() const { return element_matrices_; }
  // Polygonal electrode lengths used by the boundary terms.
  const Vector& electrode_lengths() const { return electrode_lengths_; }

  // sigma0 K0 + sum xi_nu K_nu (the stiffness part of K11 only).
  SparseMatrix stiffness(const Vector& xi) const;
  // Full symmetric block matrix of dimension num_vertices + L - 1.
  SparseMatrix assemble(const Vector& xi) const;
  // Block matrix of sum v_nu K_nu, zero outside the K11 block.
  SparseMatrix direction_matrix(const Vector& v) const;

  // Throws InputError naming the first element with sigma0 + xi <= 0.
  void check_conductivity(const Vector& xi) const;

 private:
  Mesh mesh_;
  int n_;
  ElectrodeLayout layout_;
  CurrentBasis basis_;
  double sigma0_;
  SparseMatrix k0_;
  SparseMatrix electrode_mass_;
  Matrix k12_;
  Matrix k22_;
  std::vector<Eigen::Matrix3d> element_matrices_;
  Vector electrode_lengths_;
};

struct FrameSolution {
  Matrix X;  // (num_vertices + L - 1) x (L - 1), solves K X = [0; I]
  Vector xi;
  SparseMatrix K;
  std::shared_ptr<const SparseLLT> factor;

  Eigen::Index num_vertices() const { return X.rows() - X.cols(); }
  auto potentials() const { return X.topRows(num_vertices()); }
  Matrix alpha() const { return X.bottomRows(X.cols()); }
  Matrix solve(const Matrix& rhs) const;
};

FrameSolution solve_frame(const CemSystem& system, const Vector& xi);
Matrix resistance_matrix(const CemSystem& system, const Vector& xi);
Matrix resistance_matrix(const CemSystem& system, const FrameSolution& frame);
// Stacked electrode voltages U^l = E alpha^l, l = 1..L-1.
Vector forward_map(const CemSystem& system, const Vector& xi);
Vector stack_voltages(const Matrix& E, const Matrix& alpha);

// Estimate of the 2-norm condition number of K(xi) by power iterations.
double condition_estimate(const CemSystem& system, const Vector& xi, int iterations = 50);

struct MeasurementSet {
  int L = 0;
  std::string basis = "trig";
  Vector data;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::string mesh_id;
  std::vector<std::string> warnings;

  int m() const { return static_cast<int>(data.size()); }
  void validate() const;
};

Json measurement_to_json(const MeasurementSet& ms);
MeasurementSet measurement_from_json(const Json& j);
void write_measurement(const std::filesystem::path& path, const MeasurementSet& ms);
MeasurementSet read_measurement(const std::filesystem::path& path);

}  // namespace eitias
