#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mmii/analysis.hpp"
#include "mmii/error.hpp"

namespace mmii::analysis {
namespace {

void put16(std::vector<std::uint8_t>& o, std::uint16_t v) {
  o.push_back(static_cast<std::uint8_t>(v));
  o.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& o, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void tag(std::vector<std::uint8_t>& o, const char* t) { o.insert(o.end(), t, t + 4); }

std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) | (std::uint32_t{b[at + 2]} << 16) |
         (std::uint32_t{b[at + 3]} << 24);
}
std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}
bool is(std::span<const std::uint8_t> b, std::size_t at, const char* t) {
  return std::memcmp(b.data() + at, t, 4) == 0;
}

constexpr std::uint16_t kPcm = 1;
constexpr std::uint16_t kFloat = 3;
constexpr std::uint16_t kExtensible = 0xFFFE;

}  // namespace

std::vector<std::uint8_t> encode_wav(const WavData& wav, WavFormat format) {
  if (wav.channels <= 0 || wav.sample_rate <= 0 || wav.samples.size() % static_cast<std::size_t>(wav.channels)) {
    throw Error(Errc::invalid_argument, "WAV shape");
  }
  const bool f32 = format == WavFormat::f32;
  const std::uint16_t bytes = f32 ? 4 : 2;
  const auto data_len = static_cast<std::uint32_t>(wav.samples.size() * bytes);
  const std::uint32_t fmt_len = f32 ? 18 : 16;
  const std::uint32_t fact_len = f32 ? 12 : 0;

  std::vector<std::uint8_t> o;
  o.reserve(44 + data_len + 14);
  tag(o, "RIFF");
  put32(o, 4 + (8 + fmt_len) + fact_len + (8 + data_len));
  tag(o, "WAVE");
  tag(o, "fmt ");
  put32(o, fmt_len);
  put16(o, f32 ? kFloat : kPcm);
  put16(o, static_cast<std::uint16_t>(wav.channels));
  put32(o, static_cast<std::uint32_t>(wav.sample_rate));
  put32(o, static_cast<std::uint32_t>(wav.sample_rate) * wav.channels * bytes);
  put16(o, static_cast<std::uint16_t>(wav.channels * bytes));
  put16(o, static_cast<std::uint16_t>(8 * bytes));
  if (f32) {
    put16(o, 0);
    tag(o, "fact");
    put32(o, 4);
    put32(o, static_cast<std::uint32_t>(wav.frames()));
  }
  tag(o, "data");
  put32(o, data_len);
  for (float s : wav.samples) {
    if (f32) {
      put32(o, std::bit_cast<std::uint32_t>(s));
    } else {
      const double c = std::clamp(static_cast<double>(s), -1.0, 1.0);
      put16(o, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
    }
  }
  return o;
}

void write_wav(const std::filesystem::path& path, const WavData& wav, WavFormat format) {
  const auto bytes = encode_wav(wav, format);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::io_error, "write failed: " + path.string());
}

WavData decode_wav(std::span<const std::uint8_t> b) {
  if (b.size() < 12 || !is(b, 0, "RIFF") || !is(b, 8, "WAVE")) throw Error(Errc::bad_format, "not a RIFF/WAVE file");
  std::size_t at = 12;
  bool have_fmt = false;
  std::uint16_t fmt = 0, bits = 0;
  WavData w;
  while (at + 8 <= b.size()) {
    const std::uint32_t len = get32(b, at + 4);
    const std::size_t body = at + 8;
    if (len > b.size() - body) throw Error(Errc::truncated, "WAV chunk runs past the file");
    if (is(b, at, "fmt ")) {
      if (len < 16) throw Error(Errc::bad_format, "short fmt chunk");
      fmt = get16(b, body);
      w.channels = get16(b, body + 2);
      w.sample_rate = static_cast<int>(get32(b, body + 4));
      bits = get16(b, body + 14);
      if (fmt == kExtensible) {
        if (len < 40) throw Error(Errc::bad_format, "short extensible fmt chunk");
        fmt = get16(b, body + 24);
      }
      have_fmt = true;
    } else if (is(b, at, "data")) {
      if (!have_fmt) throw Error(Errc::bad_format, "data before fmt");
      if (w.channels <= 0) throw Error(Errc::bad_format, "zero channels");
      if (fmt == kFloat && bits == 32) {
        w.samples.resize(len / 4);
        for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = std::bit_cast<float>(get32(b, body + 4 * i));
      } else if (fmt == kPcm && bits == 16) {
        w.samples.resize(len / 2);
        for (std::size_t i = 0; i < w.samples.size(); ++i) {
          w.samples[i] = static_cast<float>(static_cast<std::int16_t>(get16(b, body + 2 * i)) / 32768.0);
        }
      } else {
        throw Error(Errc::unsupported_type, "only 16-bit PCM and 32-bit float WAV are supported");
      }
      w.samples.resize(w.samples.size() - w.samples.size() % static_cast<std::size_t>(w.channels));
      return w;
    }
    at = body + len + (len & 1);
  }
  throw Error(Errc::bad_format, "WAV has no data chunk");
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::missing_file, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<float> to_mono(const WavData& wav) {
  const auto c = static_cast<std::size_t>(wav.channels);
  std::vector<float> out(wav.frames());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += wav.samples[i * c + k];
    out[i] = static_cast<float>(s / static_cast<double>(c));
  }
  return out;
}

}  // namespace mmii::analysis
