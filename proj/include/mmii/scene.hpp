#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmii/engine.hpp"
#include "mmii/mesh.hpp"
#include "mmii/modal.hpp"
#include "mmii/tissue.hpp"

namespace mmii::scene {

inline constexpr const char* kSceneSchema = "mmii.scene.v1";

// Mesh file, or a built-in primitive ("box" with lo/hi, "icosphere" with
// radius/subdivisions/center) for self-contained fixtures.
struct MeshSource {
  std::filesystem::path path;
  std::string primitive;
  geom::Vec3 lo = geom::Vec3::Zero(), hi = geom::Vec3::Ones();
  double radius = 0.01;
  int subdivisions = 2;
  geom::Vec3 center = geom::Vec3::Zero();
  double scale = 1.0;  // applied after loading, e.g. 0.001 for millimetre meshes
};

struct TissueOverrides {
  std::optional<double> young_modulus;  // Pa
  std::optional<double> density;        // kg/m^3
  std::optional<double> poisson;
  std::optional<double> loss_factor;
};

struct ExcitationDefaults {
  double force = 1.0;            // click force
  double sustain_level = 0.005;  // noise force scale while the probe is inside
  double pulse_drive = 0.02;     // grain-to-force scale (dynamic structures)
  double tilt_db_per_octave = 0.0;
  bool invert = false;
};

struct StructureConfig {
  std::string id;
  MeshSource mesh;
  std::string tissue;
  TissueOverrides overrides;
  std::optional<bool> dynamic;   // defaults to the tissue record
  double thickness = 0.001;      // shell thickness, m
  ExcitationDefaults excitation;
  std::filesystem::path pulse_sample;  // WAV; empty = built-in synthetic pulse
};

struct AudioSettings {
  double sample_rate = 48000.0;
  std::size_t block = 128;
  double band_lo = 80.0;
  double band_hi = 8000.0;
  int max_modes = 64;
  bool pitch_map = true;
  double heart_rate = 60.0;
};

struct SceneConfig {
  std::string name = "scene";
  std::vector<StructureConfig> structures;
  double probe_radius = 0.030;
  double gain_exponent = 1.0;
  AudioSettings audio;
  std::optional<std::string> ground_truth_id;
  std::filesystem::path tissue_table;  // empty = built-in records
  std::filesystem::path cache_dir;     // empty = no model cache
  std::filesystem::path base_dir;      // relative paths resolve here
  std::filesystem::path source;        // file the config was loaded from, if any
};

// Throws Errc::config_error (with the offending key) or Errc::bad_format.
SceneConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
SceneConfig load_config(const std::filesystem::path& path);
std::string to_json(const SceneConfig& cfg);

geom::TriMesh load_structure_mesh(const StructureConfig& s, const std::filesystem::path& base_dir);
// Mesh of the ground-truth structure. Throws Errc::config_error if unset.
geom::TriMesh ground_truth_mesh(const SceneConfig& cfg);

struct Structure {
  std::string id;
  std::shared_ptr<const geom::TriMesh> mesh;
  tissue::ModelParams params;
  bool dynamic = false;
  modal::ModalModel raw_model;     // before pitch mapping
  modal::ModalModel model;         // as synthesized
  synth::ResonatorBank bank;
  std::vector<float> pulse_sample; // dynamic structures only
  ExcitationDefaults excitation;
  bool from_cache = false;
};

// Immutable, shareable between sessions.
struct Scene {
  SceneConfig config;
  std::vector<Structure> structures;

  std::optional<std::size_t> find(const std::string& id) const;
  // Fresh voices (copies of the banks) for one audio engine.
  std::vector<synth::Voice> make_voices(std::uint64_t seed) const;
};

// Loads meshes, resolves tissues (Errc::unknown_tissue names the tissue),
// builds or loads cached modal models and the resonator banks.
std::shared_ptr<const Scene> build_scene(const SceneConfig& cfg);

}  // namespace mmii::scene
