#include <algorithm>
#include <bit>
#include <cstring>

#include "mmii/error.hpp"
#include "mmii/osc.hpp"

namespace mmii::osc {
namespace {

constexpr std::size_t kMaxDepth = 4;

std::size_t pad4(std::size_t n) { return (n + 3) & ~std::size_t{3}; }

void put_u32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_padded(Bytes& out, const void* data, std::size_t n, bool terminate) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + n);
  const std::size_t total = terminate ? pad4(n + 1) : pad4(n);
  out.insert(out.end(), total - n, 0);
}

void put_string(Bytes& out, std::string_view s) {
  if (s.find('\0') != std::string_view::npos) {
    throw Error(Errc::unsupported_type, "OSC strings cannot contain NUL");
  }
  put_padded(out, s.data(), s.size(), true);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> d) : d_(d) {}

  bool done() const { return pos_ == d_.size(); }
  std::size_t remaining() const { return d_.size() - pos_; }

  std::uint32_t u32() {
    need(4, "32-bit field");
    const std::uint8_t* p = d_.data() + pos_;
    pos_ += 4;
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
           (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
  }

  std::string str(const char* what) {
    const std::uint8_t* begin = d_.data() + pos_;
    const std::uint8_t* end = d_.data() + d_.size();
    const std::uint8_t* nul = std::find(begin, end, std::uint8_t{0});
    if (nul == end) throw Error(Errc::truncated, std::string("unterminated ") + what);
    const auto len = static_cast<std::size_t>(nul - begin);
    const std::size_t total = pad4(len + 1);
    need(total, what);
    for (std::size_t i = len; i < total; ++i) {
      if (begin[i] != 0) throw Error(Errc::bad_padding, std::string("nonzero padding after ") + what);
    }
    pos_ += total;
    return std::string(reinterpret_cast<const char*>(begin), len);
  }

  Blob blob() {
    const std::uint32_t n = u32();
    if (n > remaining()) throw Error(Errc::truncated, "blob runs past the buffer");
    const std::size_t total = pad4(n);
    need(total, "blob");
    const std::uint8_t* begin = d_.data() + pos_;
    for (std::size_t i = n; i < total; ++i) {
      if (begin[i] != 0) throw Error(Errc::bad_padding, "nonzero padding after blob");
    }
    pos_ += total;
    return Blob(begin, begin + n);
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n, "bundle element");
    auto s = d_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > d_.size() - pos_) throw Error(Errc::truncated, std::string("truncated ") + what);
  }

  std::span<const std::uint8_t> d_;
  std::size_t pos_ = 0;
};

void collect(std::span<const std::uint8_t> data, std::size_t depth, std::vector<Message>& out) {
  if (!is_bundle(data)) {
    out.push_back(decode(data));
    return;
  }
  if (depth >= kMaxDepth) throw Error(Errc::bad_format, "bundles nested too deeply");
  Reader r(data);
  r.take(8);
  const std::uint32_t hi = r.u32();
  const std::uint32_t lo = r.u32();
  if (hi != 0 || lo != 1) {
    throw Error(Errc::unsupported_type, "only immediate bundles (timetag 1) are accepted");
  }
  while (!r.done()) {
    const std::uint32_t n = r.u32();
    if (n % 4 != 0 || n == 0) {
      throw Error(Errc::bad_padding, "bundle element size not a positive multiple of 4");
    }
    collect(r.take(n), depth + 1, out);
  }
}

}  // namespace

std::string Message::type_tags() const {
  std::string tags = ",";
  for (const auto& a : args) {
    switch (a.index()) {
      case 0: tags += 'i'; break;
      case 1: tags += 'f'; break;
      case 2: tags += 's'; break;
      case 3: tags += 'b'; break;
      default:
        throw Error(Errc::unsupported_type, "argument type not in the OSC subset (i, f, s, b)");
    }
  }
  return tags;
}

void encode_append(const Message& msg, Bytes& out) {
  if (msg.address.empty() || msg.address.front() != '/') {
    throw Error(Errc::bad_address, "OSC address must start with '/'");
  }
  const std::string tags = msg.type_tags();
  const std::size_t start = out.size();
  try {
    put_string(out, msg.address);
    put_string(out, tags);
    for (const auto& a : msg.args) {
      if (const auto* i = std::get_if<std::int32_t>(&a)) {
        put_u32(out, static_cast<std::uint32_t>(*i));
      } else if (const auto* f = std::get_if<float>(&a)) {
        put_u32(out, std::bit_cast<std::uint32_t>(*f));
      } else if (const auto* s = std::get_if<std::string>(&a)) {
        put_string(out, *s);
      } else if (const auto* b = std::get_if<Blob>(&a)) {
        if (b->size() > 0x7fffffffu) throw Error(Errc::unsupported_type, "blob too large");
        put_u32(out, static_cast<std::uint32_t>(b->size()));
        put_padded(out, b->data(), b->size(), false);
      }
    }
  } catch (...) {
    out.resize(start);
    throw;
  }
}

Bytes encode(const Message& msg) {
  Bytes out;
  encode_append(msg, out);
  return out;
}

Message decode(std::span<const std::uint8_t> data) {
  if (data.size() % 4 != 0) throw Error(Errc::bad_padding, "OSC packet length not a multiple of 4");
  Reader r(data);
  Message m;
  m.address = r.str("address");
  if (m.address.empty() || m.address.front() != '/') {
    throw Error(Errc::bad_address, "OSC address must start with '/'");
  }
  const std::string tags = r.str("type tags");
  if (tags.empty() || tags.front() != ',') {
    throw Error(Errc::bad_format, "type tag string must start with ','");
  }
  m.args.reserve(tags.size() - 1);
  for (std::size_t i = 1; i < tags.size(); ++i) {
    switch (tags[i]) {
      case 'i': m.args.emplace_back(static_cast<std::int32_t>(r.u32())); break;
      case 'f': m.args.emplace_back(std::bit_cast<float>(r.u32())); break;
      case 's': m.args.emplace_back(r.str("string argument")); break;
      case 'b': m.args.emplace_back(r.blob()); break;
      default:
        throw Error(Errc::unknown_type_tag, std::string("unknown type tag '") + tags[i] + "'");
    }
  }
  if (!r.done()) throw Error(Errc::bad_format, "trailing bytes after the last argument");
  return m;
}

Bytes encode_bundle(std::span<const Message> messages) {
  Bytes out = {'#', 'b', 'u', 'n', 'd', 'l', 'e', 0};
  put_u32(out, 0);
  put_u32(out, 1);
  for (const auto& m : messages) {
    const std::size_t at = out.size();
    put_u32(out, 0);
    encode_append(m, out);
    const auto n = static_cast<std::uint32_t>(out.size() - at - 4);
    out[at] = static_cast<std::uint8_t>(n >> 24);
    out[at + 1] = static_cast<std::uint8_t>(n >> 16);
    out[at + 2] = static_cast<std::uint8_t>(n >> 8);
    out[at + 3] = static_cast<std::uint8_t>(n);
  }
  return out;
}

std::vector<Message> decode_packet(std::span<const std::uint8_t> data) {
  std::vector<Message> out;
  collect(data, 0, out);
  return out;
}

const std::vector<Schema>& schemas() {
  static const std::vector<Schema> kSchemas = {
      {addr::prox, ",sf", "name, distance_m", "out"},
      {addr::click, ",|,si", "(none: click at probe) | name, vertex", "both"},
      {addr::probe, ",ffff", "x, y, z, radius_m", "in"},
      {addr::marker, ",fff", "x, y, z", "in"},
      {addr::unmark, ",", "(retract last marker)", "in"},
      {addr::hr, ",f", "bpm", "in"},
      {addr::trial, ",ss", "trial_id, condition", "in"},
      {addr::trial_end, ",", "(end of current trial)", "in"},
      {addr::cue, ",sfi", "name, gain, inside", "out"},
      {addr::visual, ",sff", "name, scale, albedo", "out"},
      {addr::state, ",ii", "block_index, dropped_messages", "out"},
      {addr::error, ",ss", "address, reason", "out"},
      {addr::hello, ",siii", "session_id, sample_rate, block, channels", "out"},
  };
  return kSchemas;
}

const Schema* find_schema(std::string_view address) {
  for (const auto& s : schemas()) {
    if (s.address == address) return &s;
  }
  return nullptr;
}

void validate(const Message& msg) {
  const Schema* s = find_schema(msg.address);
  if (!s) throw Error(Errc::unknown_address, "unknown address " + msg.address);
  const std::string tags = msg.type_tags();
  std::string_view alts = s->tags;
  while (true) {
    const auto bar = alts.find('|');
    if (alts.substr(0, bar) == tags) break;
    if (bar == std::string_view::npos) {
      throw Error(Errc::schema_mismatch,
                  msg.address + " expects " + std::string(s->tags) + ", got " + tags);
    }
    alts.remove_prefix(bar + 1);
  }
  if (msg.address == addr::prox && !(std::get<float>(msg.args[1]) >= 0.0f)) {
    throw Error(Errc::schema_mismatch, "/mmii/prox distance must be non-negative");
  }
  if (msg.address == addr::probe && !(std::get<float>(msg.args[3]) > 0.0f)) {
    throw Error(Errc::schema_mismatch, "/mmii/probe radius must be positive");
  }
  if (msg.address == addr::hr && !(std::get<float>(msg.args[0]) > 0.0f)) {
    throw Error(Errc::schema_mismatch, "/mmii/hr bpm must be positive");
  }
  if (msg.address == addr::trial) {
    const auto& cond = std::get<std::string>(msg.args[1]);
    if (cond != "visual" && cond != "audiovisual") {
      throw Error(Errc::schema_mismatch, "trial condition must be visual or audiovisual");
    }
  }
}

Message make_prox(const std::string& name, float distance) {
  return {std::string(addr::prox), {name, distance}};
}
Message make_click(const std::string& name, std::int32_t vertex) {
  return {std::string(addr::click), {name, vertex}};
}
Message make_probe(float x, float y, float z, float radius) {
  return {std::string(addr::probe), {x, y, z, radius}};
}
Message make_marker(float x, float y, float z) {
  return {std::string(addr::marker), {x, y, z}};
}
Message make_hr(float bpm) { return {std::string(addr::hr), {bpm}}; }

}  // namespace mmii::osc
