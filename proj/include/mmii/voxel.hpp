#pragma once

#include <array>
#include <vector>

#include "mmii/mesh.hpp"

namespace mmii::geom {

struct GridSpec {
  Vec3 origin = Vec3::Zero();  // min corner of cell (0,0,0)
  double cell_size = 0.0;
  std::array<int, 3> dims{0, 0, 0};

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  Vec3 cell_center(int i, int j, int k) const {
    return origin + cell_size * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  std::size_t linear(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
};

struct VoxelGrid {
  GridSpec spec;
  std::vector<bool> occupancy;  // spec.cell_count() entries, x fastest

  std::size_t occupied() const;
  double occupied_volume() const {
    return static_cast<double>(occupied()) * spec.cell_size * spec.cell_size * spec.cell_size;
  }
};

// Grid covering `box` with cubic cells, centered on the box.
GridSpec grid_covering(const Aabb& box, double cell_size);

// Cell is occupied iff its center lies inside the closed mesh. Inside-ness is
// decided by parity along the three axis directions with a majority vote.
VoxelGrid voxelize(const TriMesh& mesh, double cell_size);
VoxelGrid voxelize(const TriMesh& mesh, const GridSpec& spec);

}  // namespace mmii::geom
