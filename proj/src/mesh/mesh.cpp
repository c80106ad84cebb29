#include "mmii/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "mmii/error.hpp"

namespace mmii::geom {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= kFnvPrime;
  }
}

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) { parent[find(a)] = find(b); }
};

// OBJ face token: "7", "7/2", "7//3", "-1/..."; returns zero-based index.
std::uint32_t parse_obj_index(const std::string& token, std::size_t vertex_count,
                              std::size_t line_no) {
  const std::string head = token.substr(0, token.find('/'));
  long idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stol(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw Error(Errc::bad_format, "obj line " + std::to_string(line_no) +
                                      ": bad face index '" + token + "'");
  }
  const long resolved = idx < 0 ? static_cast<long>(vertex_count) + idx : idx - 1;
  if (idx == 0 || resolved < 0 || resolved >= static_cast<long>(vertex_count)) {
    throw Error(Errc::bad_format, "obj line " + std::to_string(line_no) +
                                      ": face index out of range");
  }
  return static_cast<std::uint32_t>(resolved);
}

LoadResult load_obj(const std::filesystem::path& path, const std::string& id) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::vector<Vec3> vertices;
  std::vector<std::vector<std::uint32_t>> polygons;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x() >> p.y() >> p.z()) || !p.allFinite()) {
        throw Error(Errc::bad_format,
                    "obj line " + std::to_string(line_no) + ": bad vertex");
      }
      vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (ss >> tok) poly.push_back(parse_obj_index(tok, vertices.size(), line_no));
      if (poly.size() < 3) {
        throw Error(Errc::bad_format,
                    "obj line " + std::to_string(line_no) + ": face needs 3+ vertices");
      }
      polygons.push_back(std::move(poly));
    }
    // vt, vn, o, g, s, usemtl, mtllib: irrelevant for geometry.
  }
  return from_polygons(std::move(vertices), polygons, id);
}

LoadResult load_binary_stl(const std::filesystem::path& path, const std::string& id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  if (data.size() < 84) throw Error(Errc::bad_format, "stl: file too short");
  std::uint32_t count = 0;
  std::memcpy(&count, data.data() + 80, 4);  // little-endian on every target we build for
  if (data.size() != 84 + static_cast<std::size_t>(count) * 50) {
    throw Error(Errc::bad_format,
                "stl: size does not match triangle count (ASCII STL is not supported)");
  }
  // Weld exactly coincident corners so adjacency survives.
  std::map<std::array<float, 3>, std::uint32_t> index_of;
  std::vector<Vec3> vertices;
  std::vector<std::vector<std::uint32_t>> polygons;
  polygons.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    const char* rec = data.data() + 84 + static_cast<std::size_t>(t) * 50;
    std::vector<std::uint32_t> tri;
    for (int c = 0; c < 3; ++c) {
      std::array<float, 3> xyz{};
      std::memcpy(xyz.data(), rec + 12 + c * 12, 12);
      for (float f : xyz) {
        if (!std::isfinite(f)) throw Error(Errc::bad_format, "stl: non-finite vertex");
      }
      auto [it, inserted] =
          index_of.try_emplace(xyz, static_cast<std::uint32_t>(vertices.size()));
      if (inserted) vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
      tri.push_back(it->second);
    }
    polygons.push_back(std::move(tri));
  }
  return from_polygons(std::move(vertices), polygons, id);
}

}  // namespace

LoadResult from_polygons(std::vector<Vec3> vertices,
                         const std::vector<std::vector<std::uint32_t>>& polygons,
                         std::string structure_id) {
  LoadResult out;
  out.mesh.structure_id = std::move(structure_id);

  Aabb box;
  for (const auto& v : vertices) box.extend(v);
  const double diag = box.empty() ? 0.0 : box.extent().norm();
  // Relative to the bounding box so the rule is unit-independent.
  const double area_eps = 1e-14 * diag * diag;

  std::vector<Face> faces;
  for (const auto& poly : polygons) {
    for (std::uint32_t idx : poly) {
      if (idx >= vertices.size()) {
        throw Error(Errc::bad_format, "face index out of range");
      }
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      const Face f{poly[0], poly[k], poly[k + 1]};
      const double twice_area =
          (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || !(0.5 * twice_area > area_eps)) {
        ++out.degenerate_faces;
        continue;
      }
      faces.push_back(f);
    }
  }
  if (faces.empty()) throw Error(Errc::empty_mesh, "mesh has no valid faces");

  // Order-preserving compaction of unreferenced vertices.
  std::vector<char> used(vertices.size(), 0);
  for (const auto& f : faces) {
    for (auto idx : f) used[idx] = 1;
  }
  std::vector<std::uint32_t> remap(vertices.size(), UINT32_MAX);
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (used[i]) remap[i] = next++;
  }
  out.mesh.vertices.resize(next);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (remap[i] != UINT32_MAX) out.mesh.vertices[remap[i]] = vertices[i];
  }
  out.mesh.faces.reserve(faces.size());
  for (const auto& f : faces) {
    out.mesh.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
  }
  return out;
}

LoadResult load_mesh(const std::filesystem::path& path,
                     const std::string& structure_id) {
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::missing_file, "mesh file not found: " + path.string());
  }
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".obj") return load_obj(path, structure_id);
  if (ext == ".stl") return load_binary_stl(path, structure_id);
  throw Error(Errc::bad_format, "unsupported mesh format: " + ext);
}

void write_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out.precision(17);
  out << "# " << mesh.structure_id << "\n";
  for (const auto& v : mesh.vertices) {
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

Aabb bounds(const TriMesh& mesh) {
  Aabb box;
  for (const auto& v : mesh.vertices) box.extend(v);
  return box;
}

double triangle_area(const TriMesh& mesh, std::size_t face) {
  const auto& f = mesh.faces[face];
  const auto& v = mesh.vertices;
  return 0.5 * (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]).norm();
}

double surface_area(const TriMesh& mesh) {
  double a = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) a += triangle_area(mesh, i);
  return a;
}

double volume(const TriMesh& mesh) {
  double six_v = 0.0;
  for (const auto& f : mesh.faces) {
    const auto& a = mesh.vertices[f[0]];
    const auto& b = mesh.vertices[f[1]];
    const auto& c = mesh.vertices[f[2]];
    six_v += a.dot(b.cross(c));
  }
  return six_v / 6.0;
}

bool is_watertight(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      if (++directed[edge_key(f[k], f[(k + 1) % 3])] > 1) return false;
    }
  }
  for (const auto& [key, count] : directed) {
    const auto a = static_cast<std::uint32_t>(key >> 32);
    const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
    if (directed.find(edge_key(b, a)) == directed.end()) return false;
  }
  return !mesh.faces.empty();
}

std::size_t connected_components(const TriMesh& mesh) {
  UnionFind uf(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    uf.unite(f[0], f[1]);
    uf.unite(f[1], f[2]);
  }
  std::size_t roots = 0;
  for (std::uint32_t i = 0; i < mesh.vertices.size(); ++i) {
    if (uf.find(i) == i) ++roots;
  }
  return roots;
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
  std::vector<Vec3> n(mesh.vertices.size(), Vec3::Zero());
  for (const auto& f : mesh.faces) {
    const auto& v = mesh.vertices;
    const Vec3 fn = (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]);  // |fn| = 2A
    for (auto idx : f) n[idx] += fn;
  }
  for (auto& x : n) {
    const double len = x.norm();
    if (len > 0) x /= len;
  }
  return n;
}

std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriMesh& mesh) {
  std::vector<std::array<std::uint32_t, 2>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      auto a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.push_back({a, b});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

Vec3 centroid(const TriMesh& mesh) {
  Vec3 c = Vec3::Zero();
  for (const auto& v : mesh.vertices) c += v;
  return mesh.vertices.empty() ? c : Vec3(c / static_cast<double>(mesh.vertices.size()));
}

std::uint64_t content_hash(const TriMesh& mesh) {
  std::uint64_t h = kFnvOffset;
  for (const auto& v : mesh.vertices) fnv_mix(h, v.data(), 3 * sizeof(double));
  for (const auto& f : mesh.faces) fnv_mix(h, f.data(), sizeof(Face));
  return h;
}

void scale_in_place(TriMesh& mesh, double factor) {
  for (auto& v : mesh.vertices) v *= factor;
}

void translate_in_place(TriMesh& mesh, const Vec3& offset) {
  for (auto& v : mesh.vertices) v += offset;
}

}  // namespace mmii::geom
