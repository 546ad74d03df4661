#pragma once

#include <eitias/io.hpp>
#include <eitias/mesh.hpp>

#include <optional>

namespace eitias {

// On-disk mesh: vertices, 0-based triangles, boundary segments and electrode
// arcs. Contact impedances are not part of the file.
struct MeshFile {
  Mesh mesh;
  std::vector<Arc> electrode_arcs;
  std::optional<double> d_radius;
  std::string mesh_id;
};

Json mesh_to_json(const Mesh& mesh, const std::vector<Arc>& arcs, std::optional<double> d_radius = {});
// Validates every mesh invariant and electrode endpoint alignment.
MeshFile mesh_from_json(const Json& j);

void write_mesh(const std::filesystem::path& path, const Mesh& mesh, const std::vector<Arc>& arcs,
                std::optional<double> d_radius = {});
MeshFile read_mesh(const std::filesystem::path& path);

}  // namespace eitias
