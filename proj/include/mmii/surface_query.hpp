#pragma once

#include <memory>
#include <vector>

#include "mmii/mesh.hpp"

namespace mmii::geom {

struct SurfaceHit {
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
  bool inside = false;  // only meaningful when the mesh is closed
  std::uint32_t face = 0;
};

// Axis-aligned bounding volume hierarchy over a mesh's triangles. Immutable
// after construction; every query is const and thread-safe.
class SurfaceQuery {
 public:
  explicit SurfaceQuery(std::shared_ptr<const TriMesh> mesh);
  explicit SurfaceQuery(TriMesh mesh)
      : SurfaceQuery(std::make_shared<const TriMesh>(std::move(mesh))) {}

  const TriMesh& mesh() const { return *mesh_; }
  bool closed() const { return closed_; }

  // Globally nearest surface point. `inside` is set by ray parity for closed
  // meshes (three rays, majority vote).
  SurfaceHit closest_point(const Vec3& query) const;

  bool contains(const Vec3& query) const;

  // Number of triangle crossings along the half-line origin + t*dir, t > 0.
  std::size_t count_crossings(const Vec3& origin, const Vec3& dir) const;

  // Index of the mesh vertex nearest to `query` (Euclidean).
  std::uint32_t nearest_vertex(const Vec3& query) const;

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: range into order_; inner: left child
    std::uint32_t count = 0;  // 0 for inner nodes
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);

  std::shared_ptr<const TriMesh> mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Aabb> tri_boxes_;
  std::vector<Node> nodes_;
  bool closed_ = false;
};

// Closest point on triangle abc to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace mmii::geom
