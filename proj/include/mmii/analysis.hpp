#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace mmii::analysis {

// --- WAV --------------------------------------------------------------------

enum class WavFormat { f32, s16 };

struct WavData {
  int sample_rate = 48000;
  int channels = 1;
  std::vector<float> samples;  // interleaved
  std::size_t frames() const { return channels ? samples.size() / static_cast<std::size_t>(channels) : 0; }
};

// Canonical RIFF bytes; identical input gives identical output.
std::vector<std::uint8_t> encode_wav(const WavData& wav, WavFormat format = WavFormat::f32);
void write_wav(const std::filesystem::path& path, const WavData& wav, WavFormat format = WavFormat::f32);
// Reads 16-bit PCM and 32-bit float files (plain or extensible header).
WavData read_wav(const std::filesystem::path& path);
WavData decode_wav(std::span<const std::uint8_t> bytes);

// Channel average.
std::vector<float> to_mono(const WavData& wav);

// --- mel spectrogram --------------------------------------------------------

struct MelConfig {
  std::size_t fft_size = 2048;
  std::size_t hop = 512;
  std::size_t n_mels = 64;
  double f_min = 30.0;
  double f_max = 16000.0;
};

// HTK: mel = 2595 log10(1 + f / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels filter centres, evenly spaced in mel from f_min to f_max inclusive.
std::vector<double> mel_centers(const MelConfig& cfg);

// n_mels x (fft_size/2 + 1). Unit-peak triangles between neighbouring
// centres, so the filters sum to exactly 1 on every bin in [f_min, f_max].
Eigen::MatrixXd mel_filterbank(const MelConfig& cfg, double sample_rate);

// Floor applied to mel power before taking the log.
inline constexpr double kPowerFloor = 1e-12;

struct MelSpectrogram {
  Eigen::MatrixXd db;  // n_mels x frames, 10 log10(max(power, kPowerFloor))
  double sample_rate = 0.0;
  MelConfig cfg;
  std::size_t frames() const { return static_cast<std::size_t>(db.cols()); }
};

// Periodic Hann window, power spectrum scaled by 1 / (sum w)^2 so a
// full-scale sine peaks near -6 dB. Throws Errc::too_short.
MelSpectrogram mel_spectrogram(std::span<const float> audio, double sample_rate, const MelConfig& cfg = {});

// Power-weighted mean frequency of the Hann-windowed full-signal spectrum.
// Throws Errc::silent_input.
double spectral_centroid(std::span<const float> audio, double sample_rate);

// Rows are mel bands (low first), columns frames.
void write_csv(const MelSpectrogram& spec, const std::filesystem::path& path);
// 8-bit grayscale, low frequencies at the bottom, top 80 dB mapped to 0..255.
void write_png(const MelSpectrogram& spec, const std::filesystem::path& path, double range_db = 80.0);

}  // namespace mmii::analysis
