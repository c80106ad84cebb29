#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmii/error.hpp"
#include "mmii/synth.hpp"

namespace mmii::synth {

std::vector<float> synthetic_pulse(double sample_rate) {
  constexpr double kDuration = 0.15;
  constexpr std::array<double, 4> kFreq = {60.0, 80.0, 100.0, 120.0};
  constexpr std::array<double, 4> kAmp = {1.0, 0.8, 0.6, 0.4};
  const auto n = static_cast<std::size_t>(kDuration * sample_rate);
  std::vector<double> x(n, 0.0);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double env = (1.0 - std::exp(-t / 0.003)) * std::exp(-t / 0.035);
    double s = 0.0;
    for (std::size_t k = 0; k < kFreq.size(); ++k) {
      s += kAmp[k] * std::sin(2.0 * std::numbers::pi * kFreq[k] * t);
    }
    x[i] = env * s;
    peak = std::max(peak, std::abs(x[i]));
  }
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(x[i] / peak);
  return out;
}

GranularSource::GranularSource(std::vector<float> sample, const GranularOptions& opts)
    : sample_(std::move(sample)),
      sr_(opts.sample_rate),
      grain_ms_(opts.grain_ms),
      jitter_(opts.jitter),
      rng_(opts.seed) {
  if (sample_.empty()) throw Error(Errc::empty_sample, "granular source needs a non-empty sample");
  if (!(opts.grain_ms >= 10.0 && opts.grain_ms <= 100.0)) {
    throw Error(Errc::invalid_argument, "grain duration must lie in [10, 100] ms");
  }
  if (!(opts.sample_rate > 0.0)) throw Error(Errc::invalid_argument, "sample rate must be positive");
  set_heart_rate(opts.heart_rate);
  grain_len_ = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(grain_ms_ * sr_ / 1000.0)));
  grain_len_ += grain_len_ % 2;
  hop_ = grain_len_ / 2;
  window_.resize(grain_len_);
  for (std::size_t i = 0; i < grain_len_; ++i) {
    window_[i] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / grain_len_));
  }
  grains_per_burst_ =
      sample_.size() <= grain_len_ ? 1 : (sample_.size() - grain_len_ + hop_ - 1) / hop_ + 1;
  grains_per_burst_ = std::min(grains_per_burst_, kMaxGrains / 2);
}

void GranularSource::set_heart_rate(double bpm) {
  if (!(bpm > 0.0)) throw Error(Errc::invalid_argument, "heart rate must be positive");
  bpm_ = bpm;
  if (beat_ > 0) {
    next_burst_ = std::max(static_cast<double>(last_burst_) + 60.0 * sr_ / bpm_,
                           static_cast<double>(now_));
  }
}

void GranularSource::render(std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  const auto n = static_cast<std::int64_t>(out.size());
  const std::int64_t end = now_ + n;

  for (std::int64_t start = std::llround(next_burst_); start < end;
       start = std::llround(next_burst_)) {
    for (std::size_t j = 0; j < grains_per_burst_ && active_ < kMaxGrains; ++j) {
      // Uniform in [-1, 1) from the top 53 bits.
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
      const auto base = static_cast<std::int64_t>(j * hop_);
      const auto off = static_cast<std::int64_t>(std::lround(u * jitter_ * static_cast<double>(hop_)));
      const auto max_src = static_cast<std::int64_t>(sample_.size()) - 1;
      grains_[active_++] = {start + base, std::clamp<std::int64_t>(base + off, 0, max_src)};
    }
    last_burst_ = start;
    ++beat_;
    next_burst_ += 60.0 * sr_ / bpm_;
  }

  const auto len = static_cast<std::int64_t>(grain_len_);
  const auto size = static_cast<std::int64_t>(sample_.size());
  std::size_t keep = 0;
  for (std::size_t g = 0; g < active_; ++g) {
    const Grain gr = grains_[g];
    const std::int64_t from = std::max(gr.start, now_);
    const std::int64_t to = std::min(gr.start + len, end);
    for (std::int64_t t = from; t < to; ++t) {
      const std::int64_t i = t - gr.start;
      const std::int64_t src = gr.src + i;
      if (src >= size) break;
      out[static_cast<std::size_t>(t - now_)] += sample_[static_cast<std::size_t>(src)] *
                                                 window_[static_cast<std::size_t>(i)];
    }
    if (gr.start + len > end) grains_[keep++] = gr;
  }
  active_ = keep;
  now_ = end;
}

}  // namespace mmii::synth
