#pragma once

#include <eitias/cem.hpp>
#include <eitias/io.hpp>
#include <eitias/mesh.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace eitias {

struct Inclusion {
  enum class Shape { Disc, Rectangle };
  Shape shape = Shape::Disc;
  Vec2 center{0.0, 0.0};  // disc
  double radius = 0.0;    // disc
  Vec2 corner{0.0, 0.0};  // rectangle, lower-left corner
  double width = 0.0;
  double height = 0.0;
  double value = 1.0;  // conductivity inside

  bool contains(const Vec2& p) const;
  // Every point of the inclusion lies within this distance of the origin.
  double max_radius() const;
};

struct PhantomSpec {
  double sigma0 = 1.0;
  // Later inclusions take precedence where they overlap.
  std::vector<Inclusion> inclusions;

  void validate() const;
  double value_at(const Vec2& p) const;

  static PhantomSpec one_inclusion();
  static PhantomSpec two_inclusions();
};

Json phantom_to_json(const PhantomSpec& spec);
PhantomSpec phantom_from_json(const Json& j);

// Per-element xi* = sigma - sigma0 over all elements of the data mesh.
// subdivisions = 1 is the centroid rule; k > 1 averages over the centroids of
// the k^2 congruent sub-triangles.
Vector rasterize_phantom(const PhantomSpec& spec, const Mesh& data_mesh, int subdivisions = 1);

// Standard normals from mt19937_64 through the Box-Muller transform.
Vector gaussian_noise(Eigen::Index size, std::uint64_t seed);

struct Simulation {
  MeasurementSet measurement;
  Vector noiseless;
  double max_abs_voltage = 0.0;
};

// Forward data on the data mesh, then additive N(0, omega^2) noise with
// omega = noise_percent/100 * max |U|. A data mesh identical to the
// reconstruction mesh is recorded as an inverse-crime warning.
Simulation simulate_measurement(const PhantomSpec& spec, const Mesh& data_mesh, const ElectrodeLayout& layout,
                                const CurrentBasis& basis, double noise_percent, std::uint64_t seed,
                                const std::string& reconstruction_mesh_id = {}, int subdivisions = 1);

}  // namespace eitias
