#pragma once

#include <string>

#include "mmii/mesh.hpp"

namespace mmii::geom {

// Axis-aligned box as 6 quads split into 12 outward-facing triangles.
TriMesh make_box(const Vec3& lo, const Vec3& hi, std::string id = "box");

// Subdivided icosahedron; subdivisions = 0 gives 12 vertices, each level
// quadruples the face count.
TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero(),
                       std::string id = "sphere");

}  // namespace mmii::geom
