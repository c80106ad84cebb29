#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mmii/mesh.hpp"
#include "mmii/tissue.hpp"

namespace mmii::modal {

using tissue::ModelParams;

// Lumped mass / sparse stiffness pair for one structure. Degrees of freedom
// are vertex-major: dof = vertex * dof_per_vertex + component.
struct AssembledSystem {
  int dof_per_vertex = 3;
  std::size_t vertex_count = 0;
  Eigen::VectorXd vertex_mass;             // kg, > 0
  Eigen::SparseMatrix<double> stiffness;   // N/m, symmetric PSD
  std::vector<std::uint32_t> boundary;     // fixed vertices; empty = free-free

  std::size_t dof_count() const { return vertex_count * dof_per_vertex; }
};

// Thin-shell surface model: Voronoi-area lumped masses, edge springs
// k = E t (dual length / edge length), and dihedral-angle bending springs
// scaled by the shear modulus E / (2 (1 + nu)). Every entry is linear in the
// thickness. Throws Errc::disconnected_mesh for multi-component meshes.
AssembledSystem assemble_shell(const geom::TriMesh& mesh, const ModelParams& params,
                               double thickness);

enum class RodEnds { free, fixed };

// Axial rod of `segments` equal elements (1 dof per node): k = E A / h,
// m = rho A h (half at the ends). Fixed ends become boundary vertices.
AssembledSystem assemble_rod(int segments, double length, double area,
                             const ModelParams& params, RodEnds ends);

struct ModalModel {
  Eigen::VectorXd frequencies;    // rad/s, ascending
  Eigen::VectorXd damping;        // zeta per mode, in (0, 1)
  Eigen::MatrixXd mode_shapes;    // dof_count x modes, mass-orthonormal
  int dof_per_vertex = 3;
  double pitch_scale = 1.0;
  std::size_t rigid_modes = 0;    // excluded near-zero modes
  double omega_max = 0.0;         // largest system frequency, rad/s

  std::size_t mode_count() const { return static_cast<std::size_t>(frequencies.size()); }
};

enum class Solver { automatic, dense, lanczos };

struct SolveOptions {
  Solver solver = Solver::automatic;
  double rigid_tolerance = 1e-9;    // omega^2 < tol * omega^2_max is rigid
  double max_damping_ratio = 0.3;
  std::size_t dense_limit = 1500;   // automatic: dense up to this many free dofs
};

// Solves K phi = omega^2 M phi, drops rigid-body modes, keeps up to
// max_modes lowest. zeta_i = loss/2 + beta omega_i / 2 with
// beta = loss / omega_top, capped so the top mode stays at or below
// max_damping_ratio.
ModalModel compute_modes(const AssembledSystem& sys, int max_modes, double loss_factor,
                         const SolveOptions& opts = {});

// Uniform frequency scale bringing the fundamental into [f_lo, f_hi] Hz;
// modes that then exceed f_hi are dropped.
ModalModel pitch_map(const ModalModel& model, double f_lo, double f_hi);

// --- binary cache ---------------------------------------------------------

inline constexpr std::uint32_t kCacheVersion = 1;

struct CacheKey {
  std::uint64_t mesh_hash = 0;
  ModelParams params;
  double thickness = 0.0;
  int max_modes = 0;
  std::vector<std::uint32_t> boundary;

  std::uint64_t digest() const;
};

void save_model(const std::filesystem::path& path, const CacheKey& key,
                const ModalModel& model);

// nullopt when the file is absent or was written for a different key;
// throws Errc::cache_mismatch when the file carries another format version.
std::optional<ModalModel> load_model(const std::filesystem::path& path, const CacheKey& key);

}  // namespace mmii::modal
