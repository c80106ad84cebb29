#include <algorithm>
#include <cmath>

#include "mmii/error.hpp"
#include "mmii/session.hpp"

namespace mmii::session {

namespace {

synth::EngineConfig engine_config(const scene::Scene& s, const SessionOptions& o) {
  synth::EngineConfig c;
  c.sample_rate = s.config.audio.sample_rate;
  c.block = s.config.audio.block;
  c.seed = o.seed;
  c.clip = o.clip;
  return c;
}

}  // namespace

Session::Session(std::shared_ptr<const scene::Scene> scene, SessionOptions opts)
    : scene_(std::move(scene)),
      opts_(std::move(opts)),
      engine_(engine_config(*scene_, opts_), scene_->make_voices(opts_.seed)),
      visual_(scene_->structures.size()) {
  if (opts_.state_every == 0) throw Error(Errc::invalid_argument, "state_every must be positive");
  for (const auto& s : scene_->structures) index_.add(s.id, s.mesh);
  probe_.radius = scene_->config.probe_radius;
  // Far away until the first probe message.
  probe_.position = geom::Vec3::Constant(1e9);
  sustain_vertex_.resize(scene_->structures.size());
  inside_.assign(scene_->structures.size(), false);
  if (!opts_.log_path.empty()) {
    log_ = trial::LogWriter(opts_.log_path);
    trial::LogHeader h;
    if (!scene_->config.source.empty()) h.scene = std::filesystem::absolute(scene_->config.source).string();
    h.sample_rate = engine_.sample_rate();
    h.block = static_cast<std::uint32_t>(engine_.block_size());
    h.seed = opts_.seed;
    log_.write_header(h);
  }
}

Session::~Session() { close(); }

void Session::close() { log_.close(); }

double Session::now() const {
  return static_cast<double>(engine_.block_index()) * static_cast<double>(engine_.block_size()) / engine_.sample_rate();
}

void Session::command(synth::Command c) {
  c.block = engine_.block_index();
  engine_.apply(c);
}

void Session::reject(const osc::Message& msg, const std::string& why) {
  ++malformed_;
  errors_.push_back({std::string(osc::addr::error), {msg.address, why}});
}

bool Session::handle_message(const osc::Message& msg) {
  try {
    osc::validate(msg);
  } catch (const Error& e) {
    reject(msg, e.what());
    return false;
  }
  if (osc::find_schema(msg.address)->direction == "out") {
    reject(msg, "server-to-client address");
    return false;
  }
  const auto f = [&](std::size_t i) { return static_cast<double>(std::get<float>(msg.args[i])); };
  try {
    if (msg.address == osc::addr::probe) {
      probe_.position = geom::Vec3(f(0), f(1), f(2));
      probe_.radius = f(3);
      probe_dirty_ = true;
    } else if (msg.address == osc::addr::click) {
      if (probe_dirty_) apply_probe();
      if (msg.args.empty()) {
        click_at_probe();
      } else {
        click_direct(std::get<std::string>(msg.args[0]), std::get<std::int32_t>(msg.args[1]));
      }
    } else if (msg.address == osc::addr::hr) {
      for (std::size_t i = 0; i < scene_->structures.size(); ++i) {
        if (scene_->structures[i].dynamic) {
          command({synth::Command::Type::set_heart_rate, static_cast<std::uint32_t>(i), 0, 0, f(0), 0});
        }
      }
    }
    // marker, unmark, trial, trial_end only go to the log.
  } catch (const Error& e) {
    reject(msg, e.what());
    return false;
  }
  ++accepted_;
  if (log_.is_open()) log_.append({now(), static_cast<std::uint64_t>(engine_.block_index()), msg});
  return true;
}

std::size_t Session::handle_packet(std::span<const std::uint8_t> bytes) {
  std::vector<osc::Message> msgs;
  try {
    msgs = osc::decode_packet(bytes);
  } catch (const Error& e) {
    ++malformed_;
    errors_.push_back({std::string(osc::addr::error), {std::string("(undecodable)"), std::string(e.what())}});
    return 0;
  }
  std::size_t ok = 0;
  for (const auto& m : msgs) ok += handle_message(m);
  return ok;
}

void Session::click_at_probe() {
  const auto hit = index_.click(probe_, 1.0);
  if (!hit) return;  // nothing within R
  click_direct(hit->event.structure_id, static_cast<std::int32_t>(hit->event.vertex));
}

void Session::click_direct(const std::string& name, std::int32_t vertex) {
  const auto s = scene_->find(name);
  if (!s) throw Error(Errc::invalid_argument, "no structure named " + name);
  if (vertex < 0 || static_cast<std::size_t>(vertex) >= scene_->structures[*s].mesh->vertices.size()) {
    throw Error(Errc::invalid_vertex, "vertex out of range for " + name);
  }
  command({synth::Command::Type::impulse, static_cast<std::uint32_t>(*s), static_cast<std::uint32_t>(vertex), 0,
           scene_->structures[*s].excitation.force, 0});
  visual_.pulse(*s);
  clicks_.push_back(osc::make_click(name, vertex));
}

void Session::apply_probe() {
  probe_dirty_ = false;
  events_ = index_.update_probe(probe_, scene_->config.gain_exponent);
  std::vector<const interact::ProximityEvent*> by(scene_->structures.size(), nullptr);
  for (const auto& e : events_) by[e.structure] = &e;
  for (std::size_t i = 0; i < scene_->structures.size(); ++i) {
    const auto& st = scene_->structures[i];
    const auto v = static_cast<std::uint32_t>(i);
    const auto* e = by[i];
    command({synth::Command::Type::set_gain, v, 0, 0, e ? e->gain : 0.0, 0});
    if (!e) {
      if (sustain_vertex_[i]) command({synth::Command::Type::sustain_stop, v, *sustain_vertex_[i], 0, 0.0, 0});
      sustain_vertex_[i].reset();
      if (st.dynamic && inside_[i]) command({synth::Command::Type::set_engaged, v, 0, 0, 1.0, 0});
      inside_[i] = false;
      continue;
    }
    // Pan by the centroid's horizontal offset from the probe, in units of R.
    const double dx = geom::centroid(*st.mesh).x() - probe_.position.x();
    command({synth::Command::Type::set_pan, v, 0, 0, std::clamp(dx / probe_.radius, -1.0, 1.0), 0});
    if (st.dynamic) {
      // Inside a vessel is the cutting case: grains bypass the wall model.
      if (e->inside != inside_[i]) command({synth::Command::Type::set_engaged, v, 0, 0, e->inside ? 0.0 : 1.0, 0});
    } else {
      const auto nv = index_.query(i).nearest_vertex(probe_.position);
      if (sustain_vertex_[i] != nv) {
        if (sustain_vertex_[i]) command({synth::Command::Type::sustain_stop, v, *sustain_vertex_[i], 0, 0.0, 0});
        command({synth::Command::Type::sustain_start, v, nv, 0, 1.0, 0});
        sustain_vertex_[i] = nv;
      }
    }
    inside_[i] = e->inside;
  }
}

void Session::render_block(std::span<float> interleaved) {
  if (interleaved.size() < 2 * engine_.block_size()) throw Error(Errc::invalid_argument, "block buffer too small");
  if (probe_dirty_) apply_probe();
  engine_.render_block(interleaved);
  visual_.step(1000.0 * static_cast<double>(engine_.block_size()) / engine_.sample_rate());
  if (engine_.block_index() % static_cast<std::int64_t>(opts_.state_every) == 0) state_ready_ = true;
}

std::vector<osc::Message> Session::state_messages() const {
  std::vector<osc::Message> m;
  m.push_back({std::string(osc::addr::state),
               {static_cast<std::int32_t>(engine_.block_index()), static_cast<std::int32_t>(dropped_state_)}});
  for (const auto& e : events_) m.push_back(osc::make_prox(e.structure_id, static_cast<float>(e.distance)));
  for (const auto& e : events_) {
    m.push_back({std::string(osc::addr::cue),
                 {e.structure_id, static_cast<float>(e.gain), static_cast<std::int32_t>(e.inside)}});
  }
  for (std::size_t i = 0; i < scene_->structures.size(); ++i) {
    m.push_back({std::string(osc::addr::visual),
                 {scene_->structures[i].id, static_cast<float>(visual_.scale(i)), static_cast<float>(visual_.albedo(i))}});
  }
  m.insert(m.end(), clicks_.begin(), clicks_.end());
  return m;
}

std::optional<osc::Bytes> Session::take_state() {
  if (!state_ready_) return std::nullopt;
  state_ready_ = false;
  const auto msgs = state_messages();
  clicks_.clear();
  return osc::encode_bundle(msgs);
}

std::vector<osc::Message> Session::take_errors() {
  std::vector<osc::Message> out;
  out.swap(errors_);
  return out;
}

std::vector<float> render_offline(std::shared_ptr<const scene::Scene> scene,
                                  const std::vector<trial::LogEntry>& entries, std::uint64_t seed, double duration,
                                  SessionOptions opts) {
  opts.seed = seed;
  Session s(std::move(scene), opts);
  const auto block = s.block_size();
  const double fs = s.sample_rate();
  auto block_of = [&](const trial::LogEntry& e) {
    return e.block ? static_cast<std::int64_t>(*e.block)
                   : static_cast<std::int64_t>(std::floor(e.t * fs / static_cast<double>(block)));
  };
  if (duration <= 0.0) {
    double last = 0.0;
    for (const auto& e : entries) last = std::max(last, static_cast<double>(block_of(e)) * static_cast<double>(block) / fs);
    duration = last + 1.0;
  }
  const auto blocks = static_cast<std::int64_t>(std::ceil(duration * fs / static_cast<double>(block)));
  std::vector<float> out(static_cast<std::size_t>(blocks) * 2 * block);
  std::size_t next = 0;
  for (std::int64_t b = 0; b < blocks; ++b) {
    while (next < entries.size() && block_of(entries[next]) <= b) s.handle_message(entries[next++].msg);
    s.render_block(std::span(out).subspan(static_cast<std::size_t>(b) * 2 * block, 2 * block));
    s.take_state();
  }
  return out;
}

}  // namespace mmii::session
