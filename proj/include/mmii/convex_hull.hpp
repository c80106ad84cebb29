#pragma once

#include <span>

#include "mmii/mesh.hpp"

namespace mmii::geom {

// Closed, outward-oriented convex hull of a point cloud. Throws
// Errc::degenerate for fewer than 4 points or collinear/coplanar input.
TriMesh convex_hull(std::span<const Vec3> points, std::string id = "hull");

}  // namespace mmii::geom
