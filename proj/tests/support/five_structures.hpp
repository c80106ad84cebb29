#pragma once

#include <memory>

#include "mmii/interact.hpp"
#include "mmii/primitives.hpp"

namespace mmii::testing {

// Five separated structures of mixed shape.
inline interact::ProximityIndex five_structures() {
  interact::ProximityIndex idx;
  idx.add("tumor", std::make_shared<const geom::TriMesh>(geom::make_icosphere(0.01, 2, geom::Vec3(0, 0, 0))));
  idx.add("vessel", std::make_shared<const geom::TriMesh>(
                        geom::make_box(geom::Vec3(0.02, -0.005, -0.04), geom::Vec3(0.026, 0.005, 0.04))));
  idx.add("cord", std::make_shared<const geom::TriMesh>(geom::make_icosphere(0.006, 1, geom::Vec3(-0.03, 0.01, 0))));
  idx.add("vertebra", std::make_shared<const geom::TriMesh>(
                          geom::make_box(geom::Vec3(-0.01, -0.05, -0.01), geom::Vec3(0.01, -0.03, 0.01))));
  idx.add("grey", std::make_shared<const geom::TriMesh>(geom::make_icosphere(0.015, 2, geom::Vec3(0, 0.045, 0.02))));
  return idx;
}

}  // namespace mmii::testing
