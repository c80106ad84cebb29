#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "mmii/osc.hpp"

namespace mmii::wire {

using osc::Bytes;

// Session stream framing. Every frame is
//   u32 BE  length of (kind + payload)
//   u8      kind
//   ...     payload
enum class FrameKind : std::uint8_t {
  osc = 1,    // one OSC packet (message or immediate bundle)
  audio = 2,  // u64 BE block index, u16 BE channels, u16 BE frames, f32 LE samples (interleaved)
  state = 3,  // OSC immediate bundle: /mmii/state, then /mmii/prox, /mmii/cue, /mmii/visual, /mmii/click
};

inline constexpr std::size_t kMaxFrame = 1u << 20;

struct Frame {
  FrameKind kind = FrameKind::osc;
  Bytes payload;
};

struct AudioFrame {
  std::uint64_t block = 0;
  std::uint16_t channels = 2;
  std::vector<float> samples;  // interleaved, frames * channels
};

Bytes encode_frame(FrameKind kind, std::span<const std::uint8_t> payload);
Bytes encode_audio(std::uint64_t block, std::uint16_t channels, std::span<const float> interleaved);
// Throws Errc::truncated / Errc::bad_format.
AudioFrame decode_audio(std::span<const std::uint8_t> payload);

// Incremental parser for a byte stream of frames.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete frame; throws Errc::bad_format on an oversize or unknown frame.
  std::optional<Frame> next();
  std::size_t buffered() const { return buf_.size(); }

 private:
  std::deque<std::uint8_t> buf_;
};

}  // namespace mmii::wire
