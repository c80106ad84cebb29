#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mmii/analysis.hpp"
#include "mmii/error.hpp"
#include "mmii/primitives.hpp"
#include "mmii/scene.hpp"

namespace mmii::scene {
namespace {

using nlohmann::json;

geom::Vec3 vec3(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::config_error, key + " must be [x, y, z]");
  return geom::Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_json(const geom::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

template <class T>
void opt(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

SceneConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::bad_format, std::string("scene config: ") + e.what());
  }
  SceneConfig c;
  c.base_dir = base_dir;
  std::set<std::string> ids;
  try {
    if (j.value("schema", kSceneSchema) != std::string(kSceneSchema)) {
      throw Error(Errc::config_error, "scene config schema must be " + std::string(kSceneSchema));
    }
    c.name = j.value("name", c.name);
    if (j.contains("probe")) {
      c.probe_radius = j["probe"].value("radius", c.probe_radius);
      c.gain_exponent = j["probe"].value("gain_exponent", c.gain_exponent);
    }
    if (j.contains("audio")) {
      const auto& a = j["audio"];
      c.audio.sample_rate = a.value("sample_rate", c.audio.sample_rate);
      c.audio.block = a.value("block", c.audio.block);
      if (a.contains("band")) {
        c.audio.band_lo = a["band"].at(0).get<double>();
        c.audio.band_hi = a["band"].at(1).get<double>();
      }
      c.audio.max_modes = a.value("max_modes", c.audio.max_modes);
      c.audio.pitch_map = a.value("pitch_map", c.audio.pitch_map);
      c.audio.heart_rate = a.value("heart_rate", c.audio.heart_rate);
    }
    if (j.contains("ground_truth_id")) c.ground_truth_id = j["ground_truth_id"].get<std::string>();
    if (j.contains("tissue_table")) c.tissue_table = j["tissue_table"].get<std::string>();
    if (j.contains("cache_dir")) c.cache_dir = j["cache_dir"].get<std::string>();

    for (const auto& s : j.at("structures")) {
      StructureConfig sc;
      sc.id = s.at("id").get<std::string>();
      if (!ids.insert(sc.id).second) throw Error(Errc::config_error, "duplicate structure id " + sc.id);
      sc.tissue = s.at("tissue").get<std::string>();
      const auto& m = s.at("mesh");
      if (m.is_string()) {
        sc.mesh.path = m.get<std::string>();
      } else {
        sc.mesh.primitive = m.at("primitive").get<std::string>();
        if (m.contains("lo")) sc.mesh.lo = vec3(m["lo"], "lo");
        if (m.contains("hi")) sc.mesh.hi = vec3(m["hi"], "hi");
        if (m.contains("center")) sc.mesh.center = vec3(m["center"], "center");
        sc.mesh.radius = m.value("radius", sc.mesh.radius);
        sc.mesh.subdivisions = m.value("subdivisions", sc.mesh.subdivisions);
        if (sc.mesh.primitive != "box" && sc.mesh.primitive != "icosphere") {
          throw Error(Errc::config_error, "unknown primitive " + sc.mesh.primitive);
        }
      }
      sc.mesh.scale = s.value("scale", 1.0);
      if (s.contains("overrides")) {
        const auto& o = s["overrides"];
        opt(o, "young_modulus", sc.overrides.young_modulus);
        opt(o, "density", sc.overrides.density);
        opt(o, "poisson", sc.overrides.poisson);
        opt(o, "loss_factor", sc.overrides.loss_factor);
      }
      opt(s, "dynamic", sc.dynamic);
      sc.thickness = s.value("thickness", sc.thickness);
      if (s.contains("excitation")) {
        const auto& e = s["excitation"];
        sc.excitation.force = e.value("force", sc.excitation.force);
        sc.excitation.sustain_level = e.value("sustain_level", sc.excitation.sustain_level);
        sc.excitation.pulse_drive = e.value("pulse_drive", sc.excitation.pulse_drive);
        sc.excitation.tilt_db_per_octave = e.value("tilt_db_per_octave", sc.excitation.tilt_db_per_octave);
        sc.excitation.invert = e.value("invert", sc.excitation.invert);
      }
      if (s.contains("pulse_sample")) sc.pulse_sample = s["pulse_sample"].get<std::string>();
      c.structures.push_back(std::move(sc));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::config_error, std::string("scene config: ") + e.what());
  }
  if (c.structures.empty()) throw Error(Errc::config_error, "scene has no structures");
  if (!(c.probe_radius > 0.0)) throw Error(Errc::config_error, "probe.radius must be positive");
  if (c.audio.block == 0 || !(c.audio.sample_rate > 0.0) || c.audio.max_modes <= 0) {
    throw Error(Errc::config_error, "audio settings out of range");
  }
  if (!(c.audio.band_lo > 0.0 && c.audio.band_lo < c.audio.band_hi)) {
    throw Error(Errc::config_error, "audio.band must satisfy 0 < lo < hi");
  }
  if (c.ground_truth_id && !ids.count(*c.ground_truth_id)) {
    throw Error(Errc::config_error, "ground_truth_id names no structure: " + *c.ground_truth_id);
  }
  return c;
}

SceneConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::missing_file, "cannot open scene " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    auto c = parse_config(ss.str(), path.parent_path());
    c.source = path;
    return c;
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string to_json(const SceneConfig& c) {
  json j = {{"schema", kSceneSchema}, {"name", c.name}};
  j["probe"] = {{"radius", c.probe_radius}, {"gain_exponent", c.gain_exponent}};
  j["audio"] = {{"sample_rate", c.audio.sample_rate}, {"block", c.audio.block},
                {"band", {c.audio.band_lo, c.audio.band_hi}}, {"max_modes", c.audio.max_modes},
                {"pitch_map", c.audio.pitch_map}, {"heart_rate", c.audio.heart_rate}};
  if (c.ground_truth_id) j["ground_truth_id"] = *c.ground_truth_id;
  if (!c.tissue_table.empty()) j["tissue_table"] = c.tissue_table.string();
  if (!c.cache_dir.empty()) j["cache_dir"] = c.cache_dir.string();
  json arr = json::array();
  for (const auto& s : c.structures) {
    json sj = {{"id", s.id}, {"tissue", s.tissue}, {"thickness", s.thickness}, {"scale", s.mesh.scale}};
    if (s.mesh.primitive.empty()) {
      sj["mesh"] = s.mesh.path.string();
    } else if (s.mesh.primitive == "box") {
      sj["mesh"] = {{"primitive", "box"}, {"lo", vec3_json(s.mesh.lo)}, {"hi", vec3_json(s.mesh.hi)}};
    } else {
      sj["mesh"] = {{"primitive", "icosphere"}, {"radius", s.mesh.radius},
                    {"subdivisions", s.mesh.subdivisions}, {"center", vec3_json(s.mesh.center)}};
    }
    json o = json::object();
    if (s.overrides.young_modulus) o["young_modulus"] = *s.overrides.young_modulus;
    if (s.overrides.density) o["density"] = *s.overrides.density;
    if (s.overrides.poisson) o["poisson"] = *s.overrides.poisson;
    if (s.overrides.loss_factor) o["loss_factor"] = *s.overrides.loss_factor;
    if (!o.empty()) sj["overrides"] = o;
    if (s.dynamic) sj["dynamic"] = *s.dynamic;
    sj["excitation"] = {{"force", s.excitation.force}, {"sustain_level", s.excitation.sustain_level},
                        {"pulse_drive", s.excitation.pulse_drive},
                        {"tilt_db_per_octave", s.excitation.tilt_db_per_octave}, {"invert", s.excitation.invert}};
    if (!s.pulse_sample.empty()) sj["pulse_sample"] = s.pulse_sample.string();
    arr.push_back(std::move(sj));
  }
  j["structures"] = std::move(arr);
  return j.dump(2);
}

geom::TriMesh load_structure_mesh(const StructureConfig& s, const std::filesystem::path& base_dir) {
  geom::TriMesh m;
  if (s.mesh.primitive == "box") {
    m = geom::make_box(s.mesh.lo, s.mesh.hi, s.id);
  } else if (s.mesh.primitive == "icosphere") {
    m = geom::make_icosphere(s.mesh.radius, s.mesh.subdivisions, s.mesh.center, s.id);
  } else {
    m = geom::load_mesh(resolve(base_dir, s.mesh.path), s.id).mesh;
  }
  if (s.mesh.scale != 1.0) geom::scale_in_place(m, s.mesh.scale);
  return m;
}

geom::TriMesh ground_truth_mesh(const SceneConfig& cfg) {
  if (!cfg.ground_truth_id) throw Error(Errc::config_error, "scene has no ground_truth_id");
  for (const auto& s : cfg.structures) {
    if (s.id == *cfg.ground_truth_id) return load_structure_mesh(s, cfg.base_dir);
  }
  throw Error(Errc::config_error, "ground_truth_id names no structure");
}

std::optional<std::size_t> Scene::find(const std::string& id) const {
  for (std::size_t i = 0; i < structures.size(); ++i) {
    if (structures[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<synth::Voice> Scene::make_voices(std::uint64_t seed) const {
  std::vector<synth::Voice> voices;
  for (std::size_t i = 0; i < structures.size(); ++i) {
    const auto& s = structures[i];
    synth::Voice v;
    v.id = s.id;
    v.bank = s.bank;
    v.bank.reset();
    v.sustain_level = s.excitation.sustain_level;
    v.pulse_drive = s.excitation.pulse_drive;
    if (s.dynamic) {
      synth::GranularOptions g;
      g.sample_rate = config.audio.sample_rate;
      g.heart_rate = config.audio.heart_rate;
      g.seed = seed ^ (0x9E3779B97F4A7C15ull * (i + 1));
      v.pulse.emplace(s.pulse_sample, g);
    }
    voices.push_back(std::move(v));
  }
  return voices;
}

std::shared_ptr<const Scene> build_scene(const SceneConfig& cfg) {
  auto scene = std::make_shared<Scene>();
  scene->config = cfg;
  const auto registry = cfg.tissue_table.empty() ? tissue::TissueRegistry::builtin()
                                                 : tissue::TissueRegistry::from_file(resolve(cfg.base_dir, cfg.tissue_table));
  const auto cache_dir = resolve(cfg.base_dir, cfg.cache_dir);
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);

  for (const auto& sc : cfg.structures) {
    if (!registry.contains(sc.tissue)) {
      throw Error(Errc::unknown_tissue, "structure " + sc.id + ": unknown tissue '" + sc.tissue + "'");
    }
    const auto& rec = registry.get(sc.tissue);
    Structure st;
    st.id = sc.id;
    st.excitation = sc.excitation;
    st.mesh = std::make_shared<const geom::TriMesh>(load_structure_mesh(sc, cfg.base_dir));
    st.params = tissue::to_model_params(rec);
    if (sc.overrides.young_modulus) st.params.young_modulus = *sc.overrides.young_modulus;
    if (sc.overrides.density) st.params.density = *sc.overrides.density;
    if (sc.overrides.poisson) st.params.poisson = *sc.overrides.poisson;
    if (sc.overrides.loss_factor) st.params.loss_factor = *sc.overrides.loss_factor;
    st.dynamic = sc.dynamic.value_or(rec.dynamic);

    modal::CacheKey key;
    key.mesh_hash = geom::content_hash(*st.mesh);
    key.params = st.params;
    key.thickness = sc.thickness;
    key.max_modes = cfg.audio.max_modes;
    const auto cache_file = cache_dir.empty()
                                ? std::filesystem::path{}
                                : cache_dir / (sc.id + "-" + std::to_string(key.digest()) + ".modes");
    std::optional<modal::ModalModel> cached;
    if (!cache_file.empty()) cached = modal::load_model(cache_file, key);
    if (cached) {
      st.raw_model = std::move(*cached);
      st.from_cache = true;
    } else {
      const auto sys = modal::assemble_shell(*st.mesh, st.params, sc.thickness);
      st.raw_model = modal::compute_modes(sys, cfg.audio.max_modes, st.params.loss_factor);
      if (!cache_file.empty()) modal::save_model(cache_file, key, st.raw_model);
    }
    st.model = cfg.audio.pitch_map ? modal::pitch_map(st.raw_model, cfg.audio.band_lo, cfg.audio.band_hi)
                                   : st.raw_model;

    synth::BankOptions bo;
    bo.sample_rate = cfg.audio.sample_rate;
    bo.max_block = cfg.audio.block;
    bo.tilt_db_per_octave = sc.excitation.tilt_db_per_octave;
    bo.invert = sc.excitation.invert;
    bo.band_lo = cfg.audio.band_lo;
    bo.band_hi = cfg.audio.band_hi;
    st.bank = synth::ResonatorBank(st.model, synth::vertex_gains(st.model, geom::vertex_normals(*st.mesh)), bo);

    if (st.dynamic) {
      if (sc.pulse_sample.empty()) {
        st.pulse_sample = synth::synthetic_pulse(cfg.audio.sample_rate);
      } else {
        const auto w = analysis::read_wav(resolve(cfg.base_dir, sc.pulse_sample));
        if (w.sample_rate != static_cast<int>(cfg.audio.sample_rate)) {
          throw Error(Errc::config_error, "pulse sample rate differs from the scene rate: " + sc.pulse_sample.string());
        }
        st.pulse_sample = analysis::to_mono(w);
      }
    }
    scene->structures.push_back(std::move(st));
  }
  return scene;
}

}  // namespace mmii::scene
