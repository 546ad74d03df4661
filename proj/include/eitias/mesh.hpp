#pragma once

#include <eitias/common.hpp>

#include <Eigen/SparseCholesky>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace eitias {

struct Arc {
  double start = 0.0;  // radians, normalized to [0, 2*pi)
  double end = 0.0;    // start < end <= start + 2*pi
  double length() const { return end - start; }
};

// Electrodes on the unit circle with their contact impedances.
struct ElectrodeLayout {
  std::vector<Arc> arcs;
  Vector contact_impedance;

  int count() const { return static_cast<int>(arcs.size()); }
  double filling_fraction() const;
  void validate() const;

  // Electrode j (1-based) centered at angle 2*pi*j/L, all arcs of width
  // fill*2*pi/L and all impedances equal to z0.
  static ElectrodeLayout uniform(int count, double fill, double z0);
};

struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<std::array<int, 2>> boundary_segments;
  std::vector<double> element_areas;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_elements() const { return static_cast<int>(triangles.size()); }
  double total_area() const;
  Vec2 centroid(int element) const;

  // Recomputes areas and boundary segments from vertices and triangles,
  // reorienting triangles counter-clockwise.
  static Mesh from_triangles(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles);

  // Throws InputError naming the first violated invariant.
  void validate() const;
  // Additionally requires every arc endpoint to coincide with a boundary vertex.
  void validate_electrodes(const ElectrodeLayout& layout, double tol = 1e-9) const;

  // Stable content hash of vertex coordinates and connectivity, as hex.
  std::string content_id() const;
};

struct DiscMeshOptions {
  // A vertex ring is placed at this radius so that a disc subdomain of the
  // same radius is conformal with the triangulation.
  double conforming_radius = 0.9;
  // Largest ratio of vertex counts between neighbouring rings in the collar.
  double max_ring_growth = 1.3;
};

// Structured polar mesh of the unit disc: hexagonal rings inside the
// conforming radius, geometrically graded rings in the collar, and a boundary
// ring that contains every electrode endpoint.
Mesh build_disc_mesh(const ElectrodeLayout& layout, int target_elements, double boundary_grading,
                     const DiscMeshOptions& options = {});

// Uniformly refines (red, one triangle into four) every element inside the
// disc of the given radius, closing hanging nodes by bisecting the adjacent
// outside elements. Elements outside keep their vertices, so the electrode
// neighbourhood is unchanged.
Mesh refine_inside(const Mesh& mesh, double radius, int levels = 1);

struct SubdomainMap {
  int n = 0;
  double radius = 0.0;
  // permutation[new_index] = element index in the mesh passed to mark_subdomain.
  std::vector<int> permutation;
};

struct MarkedMesh {
  Mesh mesh;  // elements reordered so the subdomain occupies 0..n-1
  SubdomainMap subdomain;
};

inline constexpr double kSubdomainTolerance = 1e-9;

MarkedMesh mark_subdomain(const Mesh& mesh, double radius);

struct OrientedEdge {
  int plus = -1;   // lower element index
  int minus = -1;  // higher element index
};

struct IncrementOperator {
  SparseMatrix matrix;  // N x n
  std::vector<OrientedEdge> edges;
  int n = 0;
  int N = 0;
};

IncrementOperator build_increment_operator(const Mesh& mesh, const SubdomainMap& sub);

// Weighted pseudoinverse machinery for L_theta = D_theta^{-1/2} L, backed by
// a sparse Cholesky factorization of L^T D_theta^{-1} L.
class WeightedPseudoInverse {
 public:
  explicit WeightedPseudoInverse(const IncrementOperator& op, const Vector* theta = nullptr);
  WeightedPseudoInverse(const IncrementOperator& op, const Vector& theta)
      : WeightedPseudoInverse(op, &theta) {}

  // argmin_xi || D^{-1/2} (L xi - target) ||, i.e. L_theta^dagger D^{-1/2} target.
  Vector apply(const Vector& target) const;
  // L_theta^dagger alpha.
  Vector apply_scaled(const Vector& alpha) const;
  // (L^T D^{-1} L)^{-1} rhs for a block of right-hand sides (n x k).
  Matrix solve_normal(const Matrix& rhs) const;

  const SparseMatrix& matrix() const { return L_; }
  const Vector& inv_sqrt_theta() const { return inv_sqrt_theta_; }

 private:
  SparseMatrix L_;
  Vector inv_sqrt_theta_;
  std::shared_ptr<Eigen::SimplicialLLT<SparseMatrix>> llt_;
};

Vector apply_pseudoinverse(const IncrementOperator& op, const Vector* theta, const Vector& target);

}  // namespace eitias
