#include "mmii/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmii/error.hpp"

namespace mmii::geom {
namespace {

// Sub-cell offsets applied to column rays so they never run exactly along a
// shared edge of grid-aligned input (e.g. the diagonal of a split quad).
constexpr std::array<double, 3> kJitter = {1.2345678e-6, 2.7182818e-6, 3.1415926e-6};

// Fills votes[cell] += 1 for every cell whose center has odd crossing parity
// along rays parallel to `axis`.
void vote_along_axis(const TriMesh& mesh, const GridSpec& spec, int axis,
                     std::vector<std::uint8_t>& votes) {
  const int b = (axis + 1) % 3;
  const int c = (axis + 2) % 3;
  const int nb = spec.dims[b];
  const int nc = spec.dims[c];
  const double h = spec.cell_size;

  // Bin triangles into the columns their projected bounding box overlaps.
  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(nb) * nc);
  const auto& v = mesh.vertices;
  for (std::uint32_t t = 0; t < mesh.faces.size(); ++t) {
    const auto& f = mesh.faces[t];
    double lo_b = v[f[0]][b], hi_b = lo_b, lo_c = v[f[0]][c], hi_c = lo_c;
    for (int k = 1; k < 3; ++k) {
      lo_b = std::min(lo_b, v[f[k]][b]);
      hi_b = std::max(hi_b, v[f[k]][b]);
      lo_c = std::min(lo_c, v[f[k]][c]);
      hi_c = std::max(hi_c, v[f[k]][c]);
    }
    // Column j samples at origin + (j + 0.5) h.
    const int jb0 = std::max(0, static_cast<int>(std::floor((lo_b - spec.origin[b]) / h - 0.5)));
    const int jb1 = std::min(nb - 1, static_cast<int>(std::ceil((hi_b - spec.origin[b]) / h - 0.5)));
    const int jc0 = std::max(0, static_cast<int>(std::floor((lo_c - spec.origin[c]) / h - 0.5)));
    const int jc1 = std::min(nc - 1, static_cast<int>(std::ceil((hi_c - spec.origin[c]) / h - 0.5)));
    for (int jc = jc0; jc <= jc1; ++jc) {
      for (int jb = jb0; jb <= jb1; ++jb) {
        bins[static_cast<std::size_t>(jc) * nb + jb].push_back(t);
      }
    }
  }

  std::vector<double> crossings;
  for (int jc = 0; jc < nc; ++jc) {
    for (int jb = 0; jb < nb; ++jb) {
      const auto& bin = bins[static_cast<std::size_t>(jc) * nb + jb];
      if (bin.empty()) continue;
      const double pb = spec.origin[b] + (jb + 0.5) * h + kJitter[b] * h;
      const double pc = spec.origin[c] + (jc + 0.5) * h + kJitter[c] * h;
      crossings.clear();
      for (auto t : bin) {
        const auto& f = mesh.faces[t];
        const Vec3& p0 = v[f[0]];
        const Vec3& p1 = v[f[1]];
        const Vec3& p2 = v[f[2]];
        // Projected signed edge functions.
        const double e0 = (p1[b] - p0[b]) * (pc - p0[c]) - (p1[c] - p0[c]) * (pb - p0[b]);
        const double e1 = (p2[b] - p1[b]) * (pc - p1[c]) - (p2[c] - p1[c]) * (pb - p1[b]);
        const double e2 = (p0[b] - p2[b]) * (pc - p2[c]) - (p0[c] - p2[c]) * (pb - p2[b]);
        const bool inside = (e0 > 0 && e1 > 0 && e2 > 0) || (e0 < 0 && e1 < 0 && e2 < 0);
        if (!inside) continue;
        const double sum = e0 + e1 + e2;
        // Barycentric interpolation of the axis coordinate.
        const double at = (e1 * p0[axis] + e2 * p1[axis] + e0 * p2[axis]) / sum;
        crossings.push_back(at);
      }
      if (crossings.empty()) continue;
      std::sort(crossings.begin(), crossings.end());
      std::size_t passed = 0;
      for (int i = 0; i < spec.dims[axis]; ++i) {
        const double pa = spec.origin[axis] + (i + 0.5) * h;
        while (passed < crossings.size() && crossings[passed] < pa) ++passed;
        if (passed % 2 == 1) {
          int ijk[3];
          ijk[axis] = i;
          ijk[b] = jb;
          ijk[c] = jc;
          ++votes[spec.linear(ijk[0], ijk[1], ijk[2])];
        }
      }
    }
  }
}

}  // namespace

std::size_t VoxelGrid::occupied() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), true));
}

GridSpec grid_covering(const Aabb& box, double cell_size) {
  if (!(cell_size > 0.0)) throw Error(Errc::invalid_argument, "cell_size must be positive");
  GridSpec spec;
  spec.cell_size = cell_size;
  const Vec3 ext = box.extent();
  for (int a = 0; a < 3; ++a) {
    // Tolerate extents that are an integer multiple of the cell up to rounding.
    spec.dims[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / cell_size - 1e-9)));
  }
  const Vec3 span(spec.dims[0] * cell_size, spec.dims[1] * cell_size, spec.dims[2] * cell_size);
  spec.origin = box.center() - 0.5 * span;
  return spec;
}

VoxelGrid voxelize(const TriMesh& mesh, double cell_size) {
  if (!(cell_size > 0.0)) throw Error(Errc::invalid_argument, "cell_size must be positive");
  const Aabb box = bounds(mesh);
  if (cell_size > box.extent().maxCoeff()) {
    throw Error(Errc::invalid_argument, "cell_size " + std::to_string(cell_size) +
                                            " exceeds the mesh bounding box");
  }
  return voxelize(mesh, grid_covering(box, cell_size));
}

VoxelGrid voxelize(const TriMesh& mesh, const GridSpec& spec) {
  if (!(spec.cell_size > 0.0)) throw Error(Errc::invalid_argument, "cell_size must be positive");
  if (!is_watertight(mesh)) {
    throw Error(Errc::open_mesh, "mesh '" + mesh.structure_id + "' is not watertight");
  }
  std::vector<std::uint8_t> votes(spec.cell_count(), 0);
  for (int axis = 0; axis < 3; ++axis) vote_along_axis(mesh, spec, axis, votes);
  VoxelGrid grid;
  grid.spec = spec;
  grid.occupancy.resize(spec.cell_count());
  for (std::size_t i = 0; i < votes.size(); ++i) grid.occupancy[i] = votes[i] >= 2;
  return grid;
}

}  // namespace mmii::geom
