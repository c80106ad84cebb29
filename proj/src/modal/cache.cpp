#include <array>
#include <cstring>
#include <fstream>

#include "mmii/error.hpp"
#include "mmii/modal.hpp"

// Cache file layout (host byte order, little-endian on supported targets):
//   char[8]  magic "MMIIMODL"
//   u32      format version
//   u64      key digest
//   i32      dof_per_vertex
//   u64      mode count (n), u64 row count (r)
//   f64      pitch_scale, f64 omega_max, u64 rigid_modes
//   f64[n]   frequencies, f64[n] damping, f64[r*n] mode shapes (column-major)

namespace mmii::modal {
namespace {

constexpr std::array<char, 8> kMagic = {'M', 'M', 'I', 'I', 'M', 'O', 'D', 'L'};

template <typename T>
void put(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(Errc::truncated, "model cache truncated: " + path.string());
  }
  return value;
}

void mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
}

}  // namespace

std::uint64_t CacheKey::digest() const {
  std::uint64_t h = 1469598103934665603ull;
  mix(h, &kCacheVersion, sizeof(kCacheVersion));
  mix(h, &mesh_hash, sizeof(mesh_hash));
  const std::array<double, 5> values = {params.young_modulus, params.density, params.poisson,
                                        params.loss_factor, thickness};
  mix(h, values.data(), sizeof(values));
  mix(h, &max_modes, sizeof(max_modes));
  for (auto b : boundary) mix(h, &b, sizeof(b));
  return h;
}

void save_model(const std::filesystem::path& path, const CacheKey& key,
                const ModalModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write model cache " + tmp.string());
    out.write(kMagic.data(), kMagic.size());
    put(out, kCacheVersion);
    put(out, key.digest());
    put(out, static_cast<std::int32_t>(model.dof_per_vertex));
    const auto n = static_cast<std::uint64_t>(model.frequencies.size());
    const auto rows = static_cast<std::uint64_t>(model.mode_shapes.rows());
    put(out, n);
    put(out, rows);
    put(out, model.pitch_scale);
    put(out, model.omega_max);
    put(out, static_cast<std::uint64_t>(model.rigid_modes));
    out.write(reinterpret_cast<const char*>(model.frequencies.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    out.write(reinterpret_cast<const char*>(model.damping.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    out.write(reinterpret_cast<const char*>(model.mode_shapes.data()),
              static_cast<std::streamsize>(rows * n * sizeof(double)));
    if (!out) throw Error(Errc::io_error, "failed writing model cache " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<ModalModel> load_model(const std::filesystem::path& path, const CacheKey& key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error(Errc::bad_format, "not a model cache file: " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCacheVersion) {
    throw Error(Errc::cache_mismatch, "model cache " + path.string() + " has version " +
                                          std::to_string(version) + ", expected " +
                                          std::to_string(kCacheVersion) +
                                          "; delete it to rebuild");
  }
  if (get<std::uint64_t>(in, path) != key.digest()) return std::nullopt;
  ModalModel model;
  model.dof_per_vertex = get<std::int32_t>(in, path);
  const auto n = get<std::uint64_t>(in, path);
  const auto rows = get<std::uint64_t>(in, path);
  if (n > (1u << 20) || rows > (1u << 28)) {
    throw Error(Errc::bad_format, "model cache header out of range: " + path.string());
  }
  model.pitch_scale = get<double>(in, path);
  model.omega_max = get<double>(in, path);
  model.rigid_modes = static_cast<std::size_t>(get<std::uint64_t>(in, path));
  model.frequencies.resize(static_cast<Eigen::Index>(n));
  model.damping.resize(static_cast<Eigen::Index>(n));
  model.mode_shapes.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  auto read_block = [&](double* dst, std::uint64_t count) {
    if (!in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(double)))) {
      throw Error(Errc::truncated, "model cache truncated: " + path.string());
    }
  };
  read_block(model.frequencies.data(), n);
  read_block(model.damping.data(), n);
  read_block(model.mode_shapes.data(), rows * n);
  return model;
}

}  // namespace mmii::modal
