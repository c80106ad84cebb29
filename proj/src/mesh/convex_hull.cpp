#include "mmii/convex_hull.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mmii/error.hpp"

namespace mmii::geom {
namespace {

struct HullFace {
  std::array<std::uint32_t, 3> v;
  Vec3 normal;  // unit, outward
  double offset = 0.0;
  bool alive = true;
};

std::uint64_t key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

class IncrementalHull {
 public:
  IncrementalHull(std::span<const Vec3> pts, double eps) : pts_(pts), eps_(eps) {}

  void add_face(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    HullFace f;
    f.v = {a, b, c};
    f.normal = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]).normalized();
    f.offset = f.normal.dot(pts_[a]);
    const auto idx = static_cast<std::uint32_t>(faces_.size());
    faces_.push_back(f);
    for (int k = 0; k < 3; ++k) edge_face_[key(f.v[k], f.v[(k + 1) % 3])] = idx;
  }

  double distance(const HullFace& f, std::uint32_t p) const {
    return f.normal.dot(pts_[p]) - f.offset;
  }

  void insert(std::uint32_t p) {
    visible_.clear();
    for (std::uint32_t i = 0; i < faces_.size(); ++i) {
      if (faces_[i].alive && distance(faces_[i], p) > eps_) visible_.push_back(i);
    }
    if (visible_.empty()) return;  // inside or on the hull
    for (auto i : visible_) faces_[i].alive = false;

    horizon_.clear();
    for (auto i : visible_) {
      const auto& f = faces_[i];
      for (int k = 0; k < 3; ++k) {
        const auto a = f.v[k];
        const auto b = f.v[(k + 1) % 3];
        const auto it = edge_face_.find(key(b, a));
        if (it != edge_face_.end() && faces_[it->second].alive) horizon_.push_back({a, b});
      }
    }
    for (auto i : visible_) {
      const auto& f = faces_[i];
      for (int k = 0; k < 3; ++k) edge_face_.erase(key(f.v[k], f.v[(k + 1) % 3]));
    }
    for (const auto& [a, b] : horizon_) add_face(a, b, p);
  }

  TriMesh extract(std::string id) const {
    TriMesh mesh;
    mesh.structure_id = std::move(id);
    std::unordered_map<std::uint32_t, std::uint32_t> remap;
    for (const auto& f : faces_) {
      if (!f.alive) continue;
      Face out;
      for (int k = 0; k < 3; ++k) {
        auto [it, inserted] =
            remap.try_emplace(f.v[k], static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) mesh.vertices.push_back(pts_[f.v[k]]);
        out[k] = it->second;
      }
      mesh.faces.push_back(out);
    }
    return mesh;
  }

 private:
  std::span<const Vec3> pts_;
  double eps_;
  std::vector<HullFace> faces_;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_face_;
  std::vector<std::uint32_t> visible_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> horizon_;
};

}  // namespace

TriMesh convex_hull(std::span<const Vec3> points, std::string id) {
  if (points.size() < 4) {
    throw Error(Errc::degenerate, "convex hull needs at least 4 points, got " +
                                      std::to_string(points.size()));
  }
  Aabb box;
  for (const auto& p : points) {
    if (!p.allFinite()) throw Error(Errc::invalid_argument, "non-finite hull input point");
    box.extend(p);
  }
  const double scale = std::max(box.extent().maxCoeff(), box.max.cwiseAbs().maxCoeff());
  const double eps = 1e-10 * std::max(scale, 1e-300);

  const auto n = static_cast<std::uint32_t>(points.size());
  // Initial simplex: extreme pair along the widest axis, then farthest from
  // the line, then farthest from the plane.
  int axis = 0;
  box.extent().maxCoeff(&axis);
  std::uint32_t i0 = 0, i1 = 0;
  for (std::uint32_t i = 1; i < n; ++i) {
    if (points[i][axis] < points[i0][axis]) i0 = i;
    if (points[i][axis] > points[i1][axis]) i1 = i;
  }
  if ((points[i1] - points[i0]).norm() <= eps) {
    throw Error(Errc::degenerate, "hull input points coincide");
  }
  const Vec3 dir = (points[i1] - points[i0]).normalized();
  std::uint32_t i2 = i0;
  double best = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double d = (points[i] - points[i0]).cross(dir).norm();
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  if (best <= eps) throw Error(Errc::degenerate, "hull input points are collinear");
  const Vec3 plane_n = (points[i1] - points[i0]).cross(points[i2] - points[i0]).normalized();
  std::uint32_t i3 = i0;
  best = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double d = std::abs(plane_n.dot(points[i] - points[i0]));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (best <= eps) throw Error(Errc::degenerate, "hull input points are coplanar");

  IncrementalHull hull(points, eps);
  if (plane_n.dot(points[i3] - points[i0]) > 0) std::swap(i1, i2);
  // Now i3 lies on the negative side of (i0, i1, i2): that face points away.
  hull.add_face(i0, i1, i2);
  hull.add_face(i0, i3, i1);
  hull.add_face(i1, i3, i2);
  hull.add_face(i2, i3, i0);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (i == i0 || i == i1 || i == i2 || i == i3) continue;
    hull.insert(i);
  }
  return hull.extract(std::move(id));
}

}  // namespace mmii::geom
