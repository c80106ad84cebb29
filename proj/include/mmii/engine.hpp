#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmii/spsc_queue.hpp"
#include "mmii/synth.hpp"

namespace mmii::synth {

// Control change applied by the audio context at a block boundary.
struct Command {
  enum class Type : std::uint8_t {
    set_gain,        // value = target gain in [0, 1]
    set_pan,         // value in [-1, 1], -1 = hard left
    impulse,         // vertex, value = force, offset = sample within the block
    sustain_start,   // vertex, value = force
    sustain_stop,    // vertex
    set_heart_rate,  // value = bpm
    set_engaged,     // value != 0
  };
  Type type = Type::set_gain;
  std::uint32_t voice = 0;
  std::uint32_t vertex = 0;
  std::uint32_t offset = 0;
  double value = 0.0;
  std::int64_t block = 0;   // apply when rendering this block index (or later)
};

struct Voice {
  std::string id;
  ResonatorBank bank;
  std::optional<GranularSource> pulse;   // pulsatile structures only
  double pulse_drive = 0.02;             // grain-to-force scale when engaged
  double sustain_level = 0.005;          // noise force scale for sustained contact
  bool engaged = true;
};

struct EngineConfig {
  double sample_rate = kDefaultSampleRate;
  std::size_t block = kDefaultBlock;
  std::uint64_t seed = 0;
  bool clip = true;            // false leaves the mix unclipped (linearity tests)
  std::size_t queue_capacity = 4096;
};

// Owns every voice of one scene. render_block and apply are the audio side;
// commands normally arrive through queue() from a single control producer.
class AudioEngine {
 public:
  static constexpr std::size_t kMaxSustained = 8;

  AudioEngine(const EngineConfig& cfg, std::vector<Voice> voices);

  std::size_t voice_count() const { return voices_.size(); }
  const Voice& voice(std::size_t i) const { return voices_[i].v; }
  std::size_t block_size() const { return cfg_.block; }
  double sample_rate() const { return cfg_.sample_rate; }
  std::int64_t block_index() const { return block_; }
  std::uint64_t overloads() const { return overloads_; }
  double gain(std::size_t voice) const { return voices_[voice].gain; }

  // Validates and applies a command immediately (throws Errc::invalid_vertex,
  // Errc::invalid_argument). Use between render_block calls.
  void apply(const Command& c);

  SpscQueue<Command>& queue() { return queue_; }

  // Drains queued commands whose block index is due, then renders one block of
  // interleaved stereo (2 * block floats). Never allocates.
  void render_block(std::span<float> interleaved);

  // Commands that failed validation on the audio side.
  std::uint64_t rejected_commands() const { return rejected_; }

 private:
  struct Sustain {
    std::uint32_t vertex = 0;
    double force = 0.0;
    bool active = false;
  };
  struct State {
    Voice v;
    double gain = 0.0;
    double prev_gain = 0.0;
    double pan_l = 0.0;
    double pan_r = 0.0;
    std::mt19937_64 noise;
    std::array<Sustain, kMaxSustained> sustained{};
  };

  EngineConfig cfg_;
  std::vector<State> voices_;
  SpscQueue<Command> queue_;
  std::vector<float> mono_;
  std::vector<float> scratch_;
  std::vector<float> pulse_;
  std::int64_t block_ = 0;
  std::uint64_t overloads_ = 0;
  std::uint64_t rejected_ = 0;
};

// Render a whole impulse response offline (mono, no engine): used for
// analysis and tests.
std::vector<float> impulse_response(ResonatorBank bank, std::uint32_t vertex, double force,
                                    std::size_t samples);

}  // namespace mmii::synth
