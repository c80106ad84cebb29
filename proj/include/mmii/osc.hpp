#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mmii::osc {

using Bytes = std::vector<std::uint8_t>;
using Blob = std::vector<std::uint8_t>;

// int32 'i', float32 'f', string 's', blob 'b'. double and int64 are
// representable so callers can build messages from loosely typed sources,
// but encode rejects them (Errc::unsupported_type).
using Arg = std::variant<std::int32_t, float, std::string, Blob, double, std::int64_t>;

struct Message {
  std::string address;
  std::vector<Arg> args;

  // ",sf" style tag string; throws Errc::unsupported_type.
  std::string type_tags() const;
  bool operator==(const Message&) const = default;
};

// OSC 1.0: null-padded address and tags, big-endian arguments, every field
// 4-byte aligned.
Bytes encode(const Message& msg);
void encode_append(const Message& msg, Bytes& out);

// Strict inverse of encode. Throws Errc::truncated, Errc::bad_padding,
// Errc::bad_address, Errc::unknown_type_tag, Errc::bad_format. Never reads
// outside `data`.
Message decode(std::span<const std::uint8_t> data);

// Bundle with the immediate timetag (1).
Bytes encode_bundle(std::span<const Message> messages);

// Accepts a message or an immediate bundle (nested up to depth 4) and
// returns the contained messages in order. Other timetags are rejected
// with Errc::unsupported_type.
std::vector<Message> decode_packet(std::span<const std::uint8_t> data);

inline bool is_bundle(std::span<const std::uint8_t> data) {
  static constexpr char kTag[8] = {'#', 'b', 'u', 'n', 'd', 'l', 'e', '\0'};
  if (data.size() < 8) return false;
  for (int i = 0; i < 8; ++i) {
    if (data[static_cast<std::size_t>(i)] != static_cast<std::uint8_t>(kTag[i])) return false;
  }
  return true;
}

// --- schema registry --------------------------------------------------------

struct Schema {
  std::string_view address;
  std::string_view tags;       // accepted tag strings, '|'-separated
  std::string_view fields;     // human-readable argument names
  std::string_view direction;  // "in" (client to server), "out", or "both"
};

const std::vector<Schema>& schemas();
const Schema* find_schema(std::string_view address);

// Throws Errc::unknown_address or Errc::schema_mismatch.
void validate(const Message& msg);

namespace addr {
inline constexpr std::string_view prox = "/mmii/prox";
inline constexpr std::string_view click = "/mmii/click";
inline constexpr std::string_view probe = "/mmii/probe";
inline constexpr std::string_view marker = "/mmii/marker";
inline constexpr std::string_view unmark = "/mmii/unmark";
inline constexpr std::string_view hr = "/mmii/hr";
inline constexpr std::string_view trial = "/mmii/trial";
inline constexpr std::string_view trial_end = "/mmii/trial_end";
inline constexpr std::string_view cue = "/mmii/cue";
inline constexpr std::string_view visual = "/mmii/visual";
inline constexpr std::string_view state = "/mmii/state";
inline constexpr std::string_view error = "/mmii/error";
inline constexpr std::string_view hello = "/mmii/hello";
}  // namespace addr

Message make_prox(const std::string& name, float distance);
Message make_click(const std::string& name, std::int32_t vertex);
Message make_probe(float x, float y, float z, float radius);
Message make_marker(float x, float y, float z);
Message make_hr(float bpm);

}  // namespace mmii::osc
