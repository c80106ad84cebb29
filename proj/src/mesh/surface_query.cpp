#include "mmii/surface_query.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mmii::geom {
namespace {

constexpr std::uint32_t kLeafSize = 4;

// Generic directions; none is aligned with an axis or a common diagonal, so
// grid-aligned meshes do not produce edge grazes on all three at once.
const std::array<Vec3, 3> kParityRays = {
    Vec3(0.5773502691896258, 0.6180339887498949, 0.5338208).normalized(),
    Vec3(-0.7071067811865476, 0.1414213562373095, 0.6928203230275509).normalized(),
    Vec3(0.2236067977499790, -0.8660254037844386, -0.4472135954999579).normalized(),
};

double box_distance_sq(const Aabb& box, const Vec3& p) {
  const Vec3 d = (box.min - p).cwiseMax(p - box.max).cwiseMax(Vec3::Zero());
  return d.squaredNorm();
}

bool ray_hits_box(const Aabb& box, const Vec3& origin, const Vec3& inv_dir) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    double t0 = (box.min[a] - origin[a]) * inv_dir[a];
    double t1 = (box.max[a] - origin[a]) * inv_dir[a];
    if (t0 > t1) std::swap(t0, t1);
    // NaN from 0*inf keeps the previous bound.
    if (t0 > tmin) tmin = t0;
    if (t1 < tmax) tmax = t1;
    if (tmin > tmax) return false;
  }
  return true;
}

// Moller-Trumbore; true when the half-line t > 0 crosses the triangle.
bool ray_hits_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                       const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-300) return false;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  return e2.dot(qvec) * inv > 0.0;
}

}  // namespace

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    return a + (d1 / (d1 - d3)) * ab;
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    return a + (d2 / (d2 - d6)) * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

SurfaceQuery::SurfaceQuery(std::shared_ptr<const TriMesh> mesh) : mesh_(std::move(mesh)) {
  const auto n = static_cast<std::uint32_t>(mesh_->faces.size());
  order_.resize(n);
  tri_boxes_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    order_[i] = i;
    for (auto idx : mesh_->faces[i]) tri_boxes_[i].extend(mesh_->vertices[idx]);
  }
  nodes_.reserve(2 * n / kLeafSize + 2);
  if (n > 0) build(0, n);
  closed_ = is_watertight(*mesh_);
}

std::uint32_t SurfaceQuery::build(std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box;
  Aabb centers;
  for (std::uint32_t i = begin; i < end; ++i) {
    box.extend(tri_boxes_[order_[i]]);
    centers.extend(tri_boxes_[order_[i]].center());
  }
  nodes_[index].box = box;
  if (end - begin <= kLeafSize) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    return index;
  }
  int axis = 0;
  centers.extent().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t l, std::uint32_t r) {
                     const double cl = tri_boxes_[l].center()[axis];
                     const double cr = tri_boxes_[r].center()[axis];
                     return cl < cr || (cl == cr && l < r);
                   });
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  nodes_[index].first = left;
  nodes_[index].right = right;
  return index;
}

SurfaceHit SurfaceQuery::closest_point(const Vec3& query) const {
  SurfaceHit best;
  double best_sq = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;

  std::vector<std::uint32_t> stack;
  stack.reserve(64);
  stack.push_back(0);
  const auto& v = mesh_->vertices;
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (box_distance_sq(node.box, query) > best_sq) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto& f = mesh_->faces[order_[i]];
        const Vec3 cp = closest_point_on_triangle(query, v[f[0]], v[f[1]], v[f[2]]);
        const double dsq = (cp - query).squaredNorm();
        if (dsq < best_sq || (dsq == best_sq && order_[i] < best.face)) {
          best_sq = dsq;
          best.point = cp;
          best.face = order_[i];
        }
      }
      continue;
    }
    const double dl = box_distance_sq(nodes_[node.first].box, query);
    const double dr = box_distance_sq(nodes_[node.right].box, query);
    // Visit the nearer child first (pushed last).
    if (dl < dr) {
      stack.push_back(node.right);
      stack.push_back(node.first);
    } else {
      stack.push_back(node.first);
      stack.push_back(node.right);
    }
  }
  best.distance = std::sqrt(best_sq);
  best.inside = closed_ && best.distance > 0.0 && contains(query);
  return best;
}

std::size_t SurfaceQuery::count_crossings(const Vec3& origin, const Vec3& dir) const {
  if (nodes_.empty()) return 0;
  const Vec3 inv_dir = dir.cwiseInverse();
  std::size_t hits = 0;
  std::vector<std::uint32_t> stack;
  stack.reserve(64);
  stack.push_back(0);
  const auto& v = mesh_->vertices;
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!ray_hits_box(node.box, origin, inv_dir)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto& f = mesh_->faces[order_[i]];
        if (ray_hits_triangle(origin, dir, v[f[0]], v[f[1]], v[f[2]])) ++hits;
      }
      continue;
    }
    stack.push_back(node.first);
    stack.push_back(node.right);
  }
  return hits;
}

bool SurfaceQuery::contains(const Vec3& query) const {
  if (!closed_) return false;
  int votes = 0;
  for (const auto& dir : kParityRays) {
    if (count_crossings(query, dir) % 2 == 1) ++votes;
  }
  return votes >= 2;
}

std::uint32_t SurfaceQuery::nearest_vertex(const Vec3& query) const {
  std::uint32_t best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  const auto& v = mesh_->vertices;
  for (std::uint32_t i = 0; i < v.size(); ++i) {
    const double d = (v[i] - query).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best = i;
    }
  }
  return best;
}

}  // namespace mmii::geom
