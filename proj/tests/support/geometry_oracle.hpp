#pragma once

#include <cmath>

#include "mmii/surface_query.hpp"

namespace mmii::testing {

using geom::Vec3;

// Exhaustive distance to every triangle, no BVH.
inline double brute_distance(const geom::TriMesh& m, const Vec3& q) {
  double best = 1e300;
  for (const auto& f : m.faces) {
    best = std::min(best, (geom::closest_point_on_triangle(q, m.vertices[f[0]], m.vertices[f[1]],
                                                          m.vertices[f[2]]) - q).norm());
  }
  return best;
}

// Parity along +x with a tiny skew so the ray avoids edges.
inline bool brute_inside(const geom::TriMesh& m, const Vec3& q) {
  const Vec3 dir = Vec3(1.0, 1e-4, 2e-4).normalized();
  int crossings = 0;
  for (const auto& f : m.faces) {
    const Vec3 a = m.vertices[f[0]], b = m.vertices[f[1]], c = m.vertices[f[2]];
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-18) continue;
    const Vec3 s = q - a;
    const double u = s.dot(p) / det;
    const Vec3 qq = s.cross(e1);
    const double v = dir.dot(qq) / det;
    const double t = e2.dot(qq) / det;
    if (u >= 0 && v >= 0 && u + v <= 1 && t > 0) ++crossings;
  }
  return crossings % 2 == 1;
}

}  // namespace mmii::testing
