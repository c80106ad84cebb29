#include <array>
#include <cmath>
#include <map>
#include <string>

#include "mmii/error.hpp"
#include "mmii/modal.hpp"

namespace mmii::modal {
namespace {

using geom::Vec3;
using Triplets = std::vector<Eigen::Triplet<double>>;

double cot(const Vec3& a, const Vec3& b) { return a.dot(b) / a.cross(b).norm(); }

// Mixed Voronoi areas (obtuse triangles split by area halves/quarters) so the
// per-vertex areas tile the surface exactly.
Eigen::VectorXd voronoi_areas(const geom::TriMesh& mesh) {
  Eigen::VectorXd area = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
  const auto& v = mesh.vertices;
  for (const auto& f : mesh.faces) {
    const Vec3& p0 = v[f[0]];
    const Vec3& p1 = v[f[1]];
    const Vec3& p2 = v[f[2]];
    const double tri_area = 0.5 * (p1 - p0).cross(p2 - p0).norm();
    const std::array<double, 3> dots = {(p1 - p0).dot(p2 - p0), (p2 - p1).dot(p0 - p1),
                                        (p0 - p2).dot(p1 - p2)};
    const int obtuse = dots[0] < 0 ? 0 : dots[1] < 0 ? 1 : dots[2] < 0 ? 2 : -1;
    if (obtuse >= 0) {
      for (int k = 0; k < 3; ++k) area[f[k]] += tri_area * (k == obtuse ? 0.5 : 0.25);
      continue;
    }
    for (int k = 0; k < 3; ++k) {
      const Vec3& pi = v[f[k]];
      const Vec3& pj = v[f[(k + 1) % 3]];
      const Vec3& pk = v[f[(k + 2) % 3]];
      // Edge i-j is opposite k, edge i-k is opposite j.
      area[f[k]] += 0.125 * ((pj - pi).squaredNorm() * cot(pi - pk, pj - pk) +
                             (pk - pi).squaredNorm() * cot(pi - pj, pk - pj));
    }
  }
  return area;
}

void add_block(Triplets& t, int dpv, std::uint32_t a, std::uint32_t b,
               const Eigen::Matrix3d& block) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (block(r, c) != 0.0) t.emplace_back(a * dpv + r, b * dpv + c, block(r, c));
    }
  }
}

void add_axial_spring(Triplets& t, std::uint32_t a, std::uint32_t b, const Vec3& dir, double k) {
  const Eigen::Matrix3d block = k * dir * dir.transpose();
  add_block(t, 3, a, a, block);
  add_block(t, 3, b, b, block);
  add_block(t, 3, a, b, -block);
  add_block(t, 3, b, a, -block);
}

struct EdgeFaces {
  std::array<std::int64_t, 2> face{-1, -1};  // [0]: edge runs a->b, [1]: b->a
  int count = 0;
};

}  // namespace

AssembledSystem assemble_shell(const geom::TriMesh& mesh, const ModelParams& params,
                               double thickness) {
  if (!(thickness > 0.0)) throw Error(Errc::invalid_argument, "thickness must be positive");
  if (!(params.young_modulus > 0.0) || !(params.density > 0.0) || !(params.poisson >= 0.0) ||
      !(params.poisson < 0.5)) {
    throw Error(Errc::invalid_argument, "model parameters out of range");
  }
  if (mesh.vertices.empty() || mesh.faces.empty()) {
    throw Error(Errc::empty_mesh, "cannot assemble an empty mesh");
  }
  const std::size_t components = geom::connected_components(mesh);
  if (components != 1) {
    throw Error(Errc::disconnected_mesh,
                "mesh '" + mesh.structure_id + "' has " + std::to_string(components) +
                    " connected components; split them into separate structures");
  }

  AssembledSystem sys;
  sys.dof_per_vertex = 3;
  sys.vertex_count = mesh.vertices.size();
  sys.vertex_mass = params.density * thickness * voronoi_areas(mesh);

  const auto& v = mesh.vertices;
  std::map<std::pair<std::uint32_t, std::uint32_t>, EdgeFaces> edges;
  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto& f = mesh.faces[fi];
    for (int k = 0; k < 3; ++k) {
      const auto a = f[k];
      const auto b = f[(k + 1) % 3];
      auto& e = edges[std::minmax(a, b)];
      e.face[a < b ? 0 : 1] = static_cast<std::int64_t>(fi);
      ++e.count;
    }
  }

  auto third_vertex = [&](std::int64_t fi, std::uint32_t a, std::uint32_t b) {
    for (auto idx : mesh.faces[static_cast<std::size_t>(fi)]) {
      if (idx != a && idx != b) return idx;
    }
    return a;
  };

  const double shear = params.young_modulus / (2.0 * (1.0 + params.poisson));
  Triplets t;
  t.reserve(edges.size() * 4 * 9 + edges.size() * 16 * 9);
  for (const auto& [key, info] : edges) {
    const auto [a, b] = key;
    const Vec3 e = v[b] - v[a];
    const double len = e.norm();
    const Vec3 mid = 0.5 * (v[a] + v[b]);

    // Barycentric dual edge: midpoint to each adjacent triangle's centroid.
    double dual = 0.0;
    for (auto fi : info.face) {
      if (fi < 0) continue;
      const auto& f = mesh.faces[static_cast<std::size_t>(fi)];
      const Vec3 c = (v[f[0]] + v[f[1]] + v[f[2]]) / 3.0;
      dual += (c - mid).norm();
    }
    add_axial_spring(t, a, b, e / len, params.young_modulus * thickness * dual / len);

    // Bending only across manifold interior edges with consistent orientation.
    if (info.count != 2 || info.face[0] < 0 || info.face[1] < 0) continue;
    const std::uint32_t x0 = a, x1 = b;
    const std::uint32_t x2 = third_vertex(info.face[0], a, b);  // face has a->b
    const std::uint32_t x3 = third_vertex(info.face[1], a, b);  // face has b->a
    const Vec3 n0 = (v[x1] - v[x0]).cross(v[x2] - v[x0]);
    const Vec3 n1 = (v[x0] - v[x1]).cross(v[x3] - v[x1]);
    const double a0 = n0.norm();
    const double a1 = n1.norm();
    // Flap gradients n/h with h = 2A/|e| = |n|/|e|; hinge gradients follow from
    // translation and rotation invariance.
    const Vec3 g2 = len * n0 / (a0 * a0);
    const Vec3 g3 = len * n1 / (a1 * a1);
    const double tau2 = (v[x2] - v[x0]).dot(e) / (len * len);
    const double tau3 = (v[x3] - v[x0]).dot(e) / (len * len);
    const Vec3 g0 = -(1.0 - tau2) * g2 - (1.0 - tau3) * g3;
    const Vec3 g1 = -tau2 * g2 - tau3 * g3;
    const double k_theta = shear * thickness * len * len / 12.0;
    const std::array<std::uint32_t, 4> ids = {x0, x1, x2, x3};
    const std::array<Vec3, 4> grads = {g0, g1, g2, g3};
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        add_block(t, 3, ids[r], ids[c], k_theta * grads[r] * grads[c].transpose());
      }
    }
  }

  const auto n = static_cast<Eigen::Index>(sys.dof_count());
  sys.stiffness.resize(n, n);
  sys.stiffness.setFromTriplets(t.begin(), t.end());
  return sys;
}

AssembledSystem assemble_rod(int segments, double length, double area,
                             const ModelParams& params, RodEnds ends) {
  if (segments < 1 || !(length > 0.0) || !(area > 0.0)) {
    throw Error(Errc::invalid_argument, "rod needs segments >= 1, length > 0, area > 0");
  }
  if (!(params.young_modulus > 0.0) || !(params.density > 0.0)) {
    throw Error(Errc::invalid_argument, "model parameters out of range");
  }
  const double h = length / segments;
  const double k = params.young_modulus * area / h;
  const double m = params.density * area * h;

  AssembledSystem sys;
  sys.dof_per_vertex = 1;
  sys.vertex_count = static_cast<std::size_t>(segments) + 1;
  sys.vertex_mass = Eigen::VectorXd::Constant(segments + 1, m);
  sys.vertex_mass[0] = sys.vertex_mass[segments] = 0.5 * m;

  Triplets t;
  for (int s = 0; s < segments; ++s) {
    t.emplace_back(s, s, k);
    t.emplace_back(s + 1, s + 1, k);
    t.emplace_back(s, s + 1, -k);
    t.emplace_back(s + 1, s, -k);
  }
  sys.stiffness.resize(segments + 1, segments + 1);
  sys.stiffness.setFromTriplets(t.begin(), t.end());
  if (ends == RodEnds::fixed) sys.boundary = {0, static_cast<std::uint32_t>(segments)};
  return sys;
}

}  // namespace mmii::modal
