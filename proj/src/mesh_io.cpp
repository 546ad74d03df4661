#include <eitias/mesh_io.hpp>

namespace eitias {

Json mesh_to_json(const Mesh& mesh, const std::vector<Arc>& arcs, std::optional<double> d_radius) {
  Json j;
  Json verts = Json::array();
  for (const Vec2& p : mesh.vertices) verts.push_back({p.x(), p.y()});
  j["vertices"] = std::move(verts);
  j["triangles"] = mesh.triangles;
  j["boundary_segments"] = mesh.boundary_segments;
  Json a = Json::array();
  for (const Arc& arc : arcs) a.push_back({arc.start, arc.end});
  j["electrode_arcs"] = std::move(a);
  if (d_radius) j["d_radius"] = *d_radius;
  j["mesh_id"] = mesh.content_id();
  return j;
}

MeshFile mesh_from_json(const Json& j) {
  for (const char* key : {"vertices", "triangles", "boundary_segments", "electrode_arcs"})
    require(j.contains(key), std::string("mesh file is missing field '") + key + "'");
  MeshFile out;
  std::vector<Vec2> vertices;
  for (const auto& v : j.at("vertices")) {
    require(v.is_array() && v.size() == 2, "vertex entries must be [x, y]");
    vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
  }
  auto triangles = j.at("triangles").get<std::vector<std::array<int, 3>>>();
  Mesh rebuilt = Mesh::from_triangles(vertices, triangles);
  // Orientation is part of the contract: the file must already be counter-clockwise.
  require(rebuilt.triangles == triangles, "triangles must be listed counter-clockwise");
  out.mesh = std::move(rebuilt);
  out.mesh.boundary_segments = j.at("boundary_segments").get<std::vector<std::array<int, 2>>>();
  out.mesh.validate();
  for (const auto& a : j.at("electrode_arcs")) {
    require(a.is_array() && a.size() == 2, "electrode arcs must be [start, end]");
    out.electrode_arcs.push_back({a[0].get<double>(), a[1].get<double>()});
  }
  ElectrodeLayout layout;
  layout.arcs = out.electrode_arcs;
  layout.contact_impedance = Vector::Ones(layout.count());
  out.mesh.validate_electrodes(layout);
  if (j.contains("d_radius")) out.d_radius = j.at("d_radius").get<double>();
  out.mesh_id = out.mesh.content_id();
  if (j.contains("mesh_id")) require(j.at("mesh_id").get<std::string>() == out.mesh_id, "mesh_id does not match the mesh content");
  return out;
}

void write_mesh(const std::filesystem::path& path, const Mesh& mesh, const std::vector<Arc>& arcs,
                std::optional<double> d_radius) {
  write_json_atomic(path, mesh_to_json(mesh, arcs, d_radius), -1);
}

MeshFile read_mesh(const std::filesystem::path& path) { return mesh_from_json(read_json(path)); }

}  // namespace eitias
