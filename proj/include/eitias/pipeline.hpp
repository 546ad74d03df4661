#pragma once

#include <eitias/cem.hpp>
#include <eitias/hypermodel.hpp>
#include <eitias/ias.hpp>
#include <eitias/io.hpp>
#include <eitias/mesh.hpp>
#include <eitias/phantom.hpp>
#include <eitias/render.hpp>
#include <eitias/sensitivity.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace eitias {

struct ForwardConfig {
  double sigma0 = 1.0;
  double z0 = 1e-6;
  double d_radius = 0.9;
};

struct MeshConfig {
  int electrodes = 32;
  double fill = 0.45;
  int target = 5800;
  double grading = 4.6;
  // Levels of uniform refinement inside the conforming radius after generation.
  int refine_inside = 0;
};

struct HyperConfig {
  double r = 1.0;
  std::optional<double> eta = 1e-5;
  std::optional<double> beta;
  VarthetaRule vartheta_rule;
};

struct RunConfig {
  std::filesystem::path mesh_path;
  std::filesystem::path measurement_path;
  std::filesystem::path output_dir;
  MeshConfig mesh;
  // Data meshes are finer toward the electrodes than the reconstruction mesh.
  MeshConfig data_mesh{32, 0.45, 9000, 6.0};
  ForwardConfig forward;
  HyperConfig hypermodel;
  IasConfig ias;
  PhantomSpec phantom = PhantomSpec::one_inclusion();
  double noise_percent = 0.1;
  std::uint64_t seed = 1;
  int phantom_subdivisions = 1;
  RenderOptions render;
};

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json run_config_to_json(const RunConfig& config);

// Reconstruction mesh with the subdomain marked, its increment operator and
// the CEM system.
struct Setup {
  MarkedMesh marked;
  std::vector<Arc> arcs;
  IncrementOperator op;
  std::shared_ptr<const CemSystem> system;
  std::string mesh_id;

  const CemSystem& cem() const { return *system; }
};

Setup make_setup(const Mesh& mesh, const std::vector<Arc>& arcs, const ForwardConfig& forward);
Mesh make_mesh(const MeshConfig& config, double conforming_radius = 0.9);
ElectrodeLayout electrode_layout(const std::vector<Arc>& arcs, double z0);

// vartheta from the sensitivities at xi = 0, and the resulting hypermodel.
struct HyperSetup {
  HyperModel hyper;
  VarthetaResult vartheta;
};
HyperSetup make_hypermodel(const Setup& setup, const HyperConfig& config);

// Element-wise xi on the reconstruction mesh in original element order.
Vector xi_in_mesh_order(const Setup& setup, const Vector& xi);
// Full-mesh field sigma0 + xi (background outside the subdomain), in marked order.
Vector conductivity_field(const Setup& setup, const Vector& xi);

Json field_to_json(const Setup& setup, const Vector& xi, const IasResult* result = nullptr);

}  // namespace eitias
