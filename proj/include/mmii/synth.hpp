#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mmii/mesh.hpp"
#include "mmii/modal.hpp"

namespace mmii::synth {

inline constexpr double kDefaultSampleRate = 48000.0;
inline constexpr std::size_t kDefaultBlock = 128;

// Per-vertex, per-mode coupling gains (vertices x modes). Shell modes are
// projected onto the vertex normal; one-dof models use the shape directly.
Eigen::MatrixXd vertex_gains(const modal::ModalModel& model,
                             const std::vector<geom::Vec3>& normals);

enum class EventKind { impulse, sustained_start, sustained_stop };

struct ExcitationEvent {
  std::string structure_id;
  std::uint32_t vertex = 0;
  EventKind kind = EventKind::impulse;
  double force = 1.0;           // normalized; 1 hits the structure at -12 dBFS peak
  std::int64_t timestamp = 0;   // absolute sample index
};

struct BankOptions {
  double sample_rate = kDefaultSampleRate;
  std::size_t max_block = kDefaultBlock;
  std::int64_t pickup_vertex = -1;   // -1: the most active vertex
  double tilt_db_per_octave = 0.0;   // relative to the fundamental
  bool invert = false;               // mirror frequencies log-symmetrically in the band
  double band_lo = 80.0;
  double band_hi = 8000.0;
  double normalize_dbfs = -12.0;     // peak impulse response at the pickup; NaN disables
  double normalize_seconds = 0.5;
};

// Bank of impulse-invariant two-pole resonators, one per retained mode:
//   y[n] = 2 r cos(theta) y[n-1] - r^2 y[n-2] + (r sin(theta) / omega_d) x[n-1]
// with r = exp(-zeta omega T), theta = omega_d T, omega_d = omega sqrt(1 - zeta^2),
// so the unit impulse response samples exp(-zeta omega t) sin(omega_d t) / omega_d.
class ResonatorBank {
 public:
  ResonatorBank() = default;
  ResonatorBank(const modal::ModalModel& model, Eigen::MatrixXd vertex_gains,
                const BankOptions& opts = {});

  std::size_t mode_count() const { return freq_hz_.size(); }
  std::size_t vertex_count() const { return static_cast<std::size_t>(gains_.rows()); }
  std::uint32_t pickup_vertex() const { return pickup_; }
  std::uint32_t default_excite_vertex() const { return pickup_; }
  const std::vector<double>& frequencies_hz() const { return freq_hz_; }
  double max_pole_radius() const;
  double normalization() const { return norm_; }
  // Sum over modes of squared output amplitude, g_k^2 A_k^2 r_k^(2n). Uses the
  // invariant y[n]^2 - 2 cos(theta) y[n] y[n-1] + y[n-1]^2 of each undamped
  // resonator, so it decays strictly with zero input even when modes beat.
  double state_energy() const;
  // Modes above 0.45 fs that were left out of the bank.
  std::size_t dropped_modes() const { return dropped_; }

  // Adds force * gain[v] to every mode's drive at `offset` in the current block.
  // Throws Errc::invalid_vertex.
  void impulse(std::uint32_t vertex, double force, std::size_t offset);
  // Adds a force signal (one value per sample of the block) at `vertex`.
  void drive(std::uint32_t vertex, std::span<const float> force);
  // Advances n samples, accumulating (not overwriting) the pickup signal into out.
  void process(std::span<float> out);
  void reset();

  // Input gain of mode i at vertex v (after tilt and normalization).
  double input_gain(std::uint32_t v, std::size_t mode) const;

 private:
  void check_vertex(std::uint32_t v) const;

  std::vector<double> freq_hz_;
  std::vector<double> a1_, a2_, b1_;
  std::vector<double> y1_, y2_, x1_;
  std::vector<double> out_gain_;
  Eigen::MatrixXd gains_;          // vertices x modes, input side
  std::vector<double> drive_;      // modes x max_block, mode-major
  std::vector<double> acc_;
  std::size_t max_block_ = kDefaultBlock;
  std::uint32_t pickup_ = 0;
  double norm_ = 1.0;
  std::size_t dropped_ = 0;
};

// Bundled Korotkoff-like pulse: decaying 60-120 Hz partials, peak 1.
std::vector<float> synthetic_pulse(double sample_rate);

struct GranularOptions {
  double sample_rate = kDefaultSampleRate;
  double grain_ms = 40.0;       // [10, 100]
  double heart_rate = 60.0;     // bpm
  double jitter = 0.25;         // read-position jitter as a fraction of the grain hop
  std::uint64_t seed = 0;
};

// Heartbeat-paced granular player. Burst k starts at round(k * 60 fs / bpm);
// each burst overlap-adds Hann grains (50% overlap) read through the sample.
class GranularSource {
 public:
  static constexpr std::size_t kMaxGrains = 64;

  GranularSource() = default;
  GranularSource(std::vector<float> sample, const GranularOptions& opts);

  void set_heart_rate(double bpm);
  double heart_rate() const { return bpm_; }
  double grain_ms() const { return grain_ms_; }
  std::size_t grains_per_burst() const { return grains_per_burst_; }
  std::int64_t burst_count() const { return beat_; }
  std::int64_t last_burst() const { return last_burst_; }

  // Renders the next out.size() samples (overwrites out).
  void render(std::span<float> out);
  std::int64_t position() const { return now_; }

 private:
  struct Grain {
    std::int64_t start = 0;  // absolute output sample
    std::int64_t src = 0;    // read offset in sample_
  };

  std::vector<float> sample_;
  std::vector<float> window_;
  double sr_ = kDefaultSampleRate;
  double bpm_ = 60.0;
  double grain_ms_ = 40.0;
  std::size_t grain_len_ = 0;
  std::size_t hop_ = 0;
  std::size_t grains_per_burst_ = 0;
  double jitter_ = 0.0;
  std::mt19937_64 rng_;
  std::int64_t now_ = 0;
  std::int64_t last_burst_ = 0;
  double next_burst_ = 0.0;
  std::int64_t beat_ = 0;
  std::array<Grain, kMaxGrains> grains_{};
  std::size_t active_ = 0;
};

// Soft clipper: identity up to 0.8, then 0.8 + 0.2 tanh((|x| - 0.8) / 0.2).
float soft_clip(float x);

}  // namespace mmii::synth
