#include <bit>
#include <cstring>

#include "mmii/error.hpp"
#include "mmii/frame.hpp"

namespace mmii::wire {
namespace {

void put_be(Bytes& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(std::span<const std::uint8_t> d, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | d[at + static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

Bytes encode_frame(FrameKind kind, std::span<const std::uint8_t> payload) {
  if (payload.size() + 1 > kMaxFrame) throw Error(Errc::invalid_argument, "frame too large");
  Bytes out;
  out.reserve(payload.size() + 5);
  put_be(out, payload.size() + 1, 4);
  out.push_back(static_cast<std::uint8_t>(kind));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bytes encode_audio(std::uint64_t block, std::uint16_t channels, std::span<const float> interleaved) {
  if (channels == 0 || interleaved.size() % channels != 0 ||
      interleaved.size() / channels > 0xffff) {
    throw Error(Errc::invalid_argument, "audio frame shape");
  }
  Bytes payload;
  payload.reserve(12 + 4 * interleaved.size());
  put_be(payload, block, 8);
  put_be(payload, channels, 2);
  put_be(payload, interleaved.size() / channels, 2);
  for (float s : interleaved) {
    const auto u = std::bit_cast<std::uint32_t>(s);
    for (int i = 0; i < 4; ++i) payload.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  return encode_frame(FrameKind::audio, payload);
}

AudioFrame decode_audio(std::span<const std::uint8_t> payload) {
  if (payload.size() < 12) throw Error(Errc::truncated, "audio frame header");
  AudioFrame f;
  f.block = get_be(payload, 0, 8);
  f.channels = static_cast<std::uint16_t>(get_be(payload, 8, 2));
  const auto frames = static_cast<std::size_t>(get_be(payload, 10, 2));
  if (f.channels == 0) throw Error(Errc::bad_format, "audio frame with zero channels");
  const std::size_t n = frames * f.channels;
  if (payload.size() != 12 + 4 * n) throw Error(Errc::truncated, "audio frame body");
  f.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u = 0;
    for (int b = 3; b >= 0; --b) u = (u << 8) | payload[12 + 4 * i + static_cast<std::size_t>(b)];
    f.samples[i] = std::bit_cast<float>(u);
  }
  return f;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::next() {
  if (buf_.size() < 4) return std::nullopt;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = (len << 8) | buf_[static_cast<std::size_t>(i)];
  if (len == 0 || len > kMaxFrame) throw Error(Errc::bad_format, "frame length out of range");
  if (buf_.size() < 4 + static_cast<std::size_t>(len)) return std::nullopt;
  const std::uint8_t kind = buf_[4];
  if (kind < 1 || kind > 3) throw Error(Errc::bad_format, "unknown frame kind");
  Frame f;
  f.kind = static_cast<FrameKind>(kind);
  f.payload.assign(buf_.begin() + 5, buf_.begin() + 4 + len);
  buf_.erase(buf_.begin(), buf_.begin() + 4 + len);
  return f;
}

}  // namespace mmii::wire
