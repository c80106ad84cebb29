#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmii/engine.hpp"
#include "mmii/interact.hpp"
#include "mmii/osc.hpp"
#include "mmii/scene.hpp"
#include "mmii/trial_log.hpp"

namespace mmii::session {

struct SessionOptions {
  std::string id = "session";
  std::uint64_t seed = 0;
  std::filesystem::path log_path;  // empty = no TrialLog file
  std::size_t state_every = 10;    // blocks between state bundles (37.5 Hz at 48 kHz / 128)
  bool clip = true;
};

// One isolated interactive session: its own audio engine, probe, visual
// state and TrialLog. Not thread-safe; the owner serializes calls (the server
// runs handle_* and render_block on the session's audio thread).
class Session {
 public:
  Session(std::shared_ptr<const scene::Scene> scene, SessionOptions opts);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return opts_.id; }
  const scene::Scene& scene() const { return *scene_; }
  std::size_t block_size() const { return engine_.block_size(); }
  double sample_rate() const { return engine_.sample_rate(); }
  std::int64_t block_index() const { return engine_.block_index(); }
  double now() const;  // audio time of the next block, s

  // Validates, logs and applies a message at the next block boundary.
  // Unknown addresses and schema mismatches are dropped and counted; the
  // return value says whether the message was accepted.
  bool handle_message(const osc::Message& msg);
  // Decodes one OSC packet (message or immediate bundle) and handles each
  // message. Undecodable packets count as malformed.
  std::size_t handle_packet(std::span<const std::uint8_t> bytes);

  // Renders one interleaved stereo block (2 * block_size floats).
  void render_block(std::span<float> interleaved);

  // Set after every state_every-th block; take_state clears it.
  bool state_ready() const { return state_ready_; }
  std::optional<osc::Bytes> take_state();
  // Messages of the current state bundle: /mmii/state, then /mmii/prox and
  // /mmii/cue per event, /mmii/visual per structure, /mmii/click echoes.
  std::vector<osc::Message> state_messages() const;

  // Outbound /mmii/error replies since the last call.
  std::vector<osc::Message> take_errors();

  const std::vector<interact::ProximityEvent>& proximity() const { return events_; }
  const interact::Probe& probe() const { return probe_; }
  const interact::VisualState& visual() const { return visual_; }
  const synth::AudioEngine& engine() const { return engine_; }

  std::uint64_t malformed() const { return malformed_; }  // undecodable or invalid messages
  std::uint64_t accepted() const { return accepted_; }
  std::uint64_t dropped_state() const { return dropped_state_; }
  void note_dropped_state(std::uint64_t n) { dropped_state_ += n; }

  // Flushes and closes the TrialLog (also done by the destructor).
  void close();

 private:
  void apply_probe();
  void click_at_probe();
  void click_direct(const std::string& name, std::int32_t vertex);
  void reject(const osc::Message& msg, const std::string& why);
  void command(synth::Command c);

  std::shared_ptr<const scene::Scene> scene_;
  SessionOptions opts_;
  synth::AudioEngine engine_;
  interact::ProximityIndex index_;
  interact::VisualState visual_;
  interact::Probe probe_;
  bool probe_dirty_ = false;
  std::vector<interact::ProximityEvent> events_;
  std::vector<std::optional<std::uint32_t>> sustain_vertex_;  // per structure
  std::vector<bool> inside_;
  std::vector<osc::Message> clicks_;  // echoes for the next state bundle
  std::vector<osc::Message> errors_;
  trial::LogWriter log_;
  bool state_ready_ = false;
  std::uint64_t malformed_ = 0;
  std::uint64_t accepted_ = 0;
  std::uint64_t dropped_state_ = 0;
};

// Offline replay of timestamped protocol messages (an event script or a
// TrialLog) into a fresh session. Each entry is applied before rendering its
// block (entry.block, or floor(t * fs / block)). Renders until `duration`
// seconds, or one second past the last entry when duration <= 0.
// Returns interleaved stereo.
std::vector<float> render_offline(std::shared_ptr<const scene::Scene> scene,
                                  const std::vector<trial::LogEntry>& entries, std::uint64_t seed,
                                  double duration = 0.0, SessionOptions opts = {});

}  // namespace mmii::session
