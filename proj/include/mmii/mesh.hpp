#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mmii::geom {

using Vec3 = Eigen::Vector3d;
using Face = std::array<std::uint32_t, 3>;

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  bool empty() const { return (min.array() > max.array()).any(); }
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
};

// Triangle surface mesh in meters. Produced by load_mesh / from_polygons,
// which guarantee in-range indices and no zero-area faces.
struct TriMesh {
  std::string structure_id;
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
};

struct LoadResult {
  TriMesh mesh;
  std::size_t degenerate_faces = 0;  // dropped during validation
};

// Builds a validated mesh from polygons (triangles, quads or larger fans).
// Polygons are fan-triangulated; zero-area triangles are dropped and counted;
// vertices no face references are removed.
LoadResult from_polygons(std::vector<Vec3> vertices,
                         const std::vector<std::vector<std::uint32_t>>& polygons,
                         std::string structure_id);

// OBJ (v/f records) or binary STL, picked by extension.
LoadResult load_mesh(const std::filesystem::path& path,
                     const std::string& structure_id);

void write_obj(const TriMesh& mesh, const std::filesystem::path& path);

Aabb bounds(const TriMesh& mesh);
double surface_area(const TriMesh& mesh);
double triangle_area(const TriMesh& mesh, std::size_t face);

// Signed volume by the divergence theorem; positive for outward-oriented
// closed meshes.
double volume(const TriMesh& mesh);

// Every undirected edge is shared by exactly two faces with opposite
// orientation.
bool is_watertight(const TriMesh& mesh);

// Number of edge-connected components over vertices.
std::size_t connected_components(const TriMesh& mesh);

// Area-weighted vertex normals, unit length (zero for isolated vertices).
std::vector<Vec3> vertex_normals(const TriMesh& mesh);

// Unique undirected edges (i < j), sorted.
std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriMesh& mesh);

Vec3 centroid(const TriMesh& mesh);

// FNV-1a over vertex coordinates and face indices.
std::uint64_t content_hash(const TriMesh& mesh);

void scale_in_place(TriMesh& mesh, double factor);
void translate_in_place(TriMesh& mesh, const Vec3& offset);

}  // namespace mmii::geom
