#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmii/engine.hpp"
#include "mmii/error.hpp"

namespace mmii::synth {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void set_pan(double p, double& l, double& r) {
  const double theta = (std::clamp(p, -1.0, 1.0) + 1.0) * std::numbers::pi / 4.0;
  l = std::cos(theta);
  r = std::sin(theta);
}

}  // namespace

AudioEngine::AudioEngine(const EngineConfig& cfg, std::vector<Voice> voices)
    : cfg_(cfg), queue_(cfg.queue_capacity) {
  if (cfg_.block == 0 || !(cfg_.sample_rate > 0.0)) {
    throw Error(Errc::invalid_argument, "engine needs a positive block size and sample rate");
  }
  voices_.reserve(voices.size());
  for (std::size_t i = 0; i < voices.size(); ++i) {
    State s;
    s.v = std::move(voices[i]);
    s.noise.seed(splitmix(cfg_.seed ^ splitmix(i + 1)));
    set_pan(0.0, s.pan_l, s.pan_r);
    voices_.push_back(std::move(s));
  }
  mono_.resize(cfg_.block);
  scratch_.resize(cfg_.block);
  pulse_.resize(cfg_.block);
}

void AudioEngine::apply(const Command& c) {
  if (c.voice >= voices_.size()) throw Error(Errc::invalid_argument, "no such voice");
  State& s = voices_[c.voice];
  switch (c.type) {
    case Command::Type::set_gain:
      if (!(c.value >= 0.0 && c.value <= 1.0)) {
        throw Error(Errc::invalid_argument, "gain must lie in [0, 1]");
      }
      s.gain = c.value;
      break;
    case Command::Type::set_pan:
      set_pan(c.value, s.pan_l, s.pan_r);
      break;
    case Command::Type::impulse:
      s.v.bank.impulse(c.vertex, c.value, std::min<std::size_t>(c.offset, cfg_.block - 1));
      break;
    case Command::Type::sustain_start: {
      s.v.bank.input_gain(c.vertex, 0);  // vertex check
      Sustain* slot = nullptr;
      for (auto& st : s.sustained) {
        if (st.active && st.vertex == c.vertex) slot = &st;
      }
      for (auto& st : s.sustained) {
        if (!slot && !st.active) slot = &st;
      }
      if (!slot) throw Error(Errc::invalid_argument, "too many sustained contacts");
      *slot = {c.vertex, c.value, true};
      break;
    }
    case Command::Type::sustain_stop:
      for (auto& st : s.sustained) {
        if (st.active && st.vertex == c.vertex) st.active = false;
      }
      break;
    case Command::Type::set_heart_rate:
      if (s.v.pulse) s.v.pulse->set_heart_rate(c.value);
      break;
    case Command::Type::set_engaged:
      s.v.engaged = c.value != 0.0;
      break;
  }
}

void AudioEngine::render_block(std::span<float> interleaved) {
  const std::size_t n = cfg_.block;
  if (interleaved.size() < 2 * n) return;

  while (const Command* c = queue_.peek()) {
    if (c->block > block_) break;
    try {
      apply(*c);
    } catch (const Error&) {
      ++rejected_;
    }
    queue_.pop();
  }

  std::fill(interleaved.begin(), interleaved.begin() + static_cast<std::ptrdiff_t>(2 * n), 0.0f);
  for (auto& s : voices_) {
    std::fill(mono_.begin(), mono_.end(), 0.0f);

    for (const auto& st : s.sustained) {
      if (!st.active) continue;
      const double amp = st.force * s.v.sustain_level;
      for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(s.noise() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
        scratch_[i] = static_cast<float>(amp * u);
      }
      s.v.bank.drive(st.vertex, scratch_);
    }

    if (s.v.pulse) {
      s.v.pulse->render(pulse_);
      if (s.v.engaged) {
        for (std::size_t i = 0; i < n; ++i) scratch_[i] = static_cast<float>(pulse_[i] * s.v.pulse_drive);
        s.v.bank.drive(s.v.bank.default_excite_vertex(), scratch_);
      } else {
        for (std::size_t i = 0; i < n; ++i) mono_[i] += pulse_[i];
      }
    }

    s.v.bank.process(mono_);

    // Linear ramp from the previous block's gain to the current target.
    const double g0 = s.prev_gain;
    const double dg = (s.gain - g0) / static_cast<double>(n);
    if (g0 == 0.0 && s.gain == 0.0) {
      s.prev_gain = 0.0;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double g = g0 + dg * static_cast<double>(i + 1);
      const double x = g * mono_[i];
      interleaved[2 * i] += static_cast<float>(x * s.pan_l);
      interleaved[2 * i + 1] += static_cast<float>(x * s.pan_r);
    }
    s.prev_gain = s.gain;
  }

  if (cfg_.clip) {
    for (std::size_t i = 0; i < 2 * n; ++i) {
      if (std::abs(interleaved[i]) > 1.0f) ++overloads_;
      interleaved[i] = soft_clip(interleaved[i]);
    }
  }
  ++block_;
}

std::vector<float> impulse_response(ResonatorBank bank, std::uint32_t vertex, double force,
                                    std::size_t samples) {
  std::vector<float> out(samples, 0.0f);
  bank.reset();
  bank.impulse(vertex, force, 0);
  constexpr std::size_t kChunk = 64;
  for (std::size_t pos = 0; pos < samples; pos += kChunk) {
    const std::size_t len = std::min(kChunk, samples - pos);
    bank.process(std::span<float>(out).subspan(pos, len));
  }
  return out;
}

}  // namespace mmii::synth
