#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "mmii/analysis.hpp"
#include "mmii/error.hpp"

namespace mmii::analysis {
namespace {

// Planner calls are not thread-safe in FFTW; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  // |X_k|^2 for k = 0..n/2.
  void power(Eigen::Ref<Eigen::VectorXd> p) {
    fftw_execute(plan_);
    for (std::size_t k = 0; k <= n_ / 2; ++k) p[static_cast<Eigen::Index>(k)] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

void check(const MelConfig& cfg, double sr) {
  if (cfg.fft_size < 2 || cfg.hop == 0 || cfg.n_mels < 2 || sr <= 0) {
    throw Error(Errc::invalid_argument, "mel config");
  }
  if (!(cfg.f_min >= 0.0 && cfg.f_min < cfg.f_max)) throw Error(Errc::invalid_argument, "mel band");
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_centers(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min), hi = hz_to_mel(cfg.f_max);
  std::vector<double> c(cfg.n_mels);
  for (std::size_t i = 0; i < cfg.n_mels; ++i) {
    c[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels - 1));
  }
  c.front() = cfg.f_min;
  c.back() = cfg.f_max;
  return c;
}

Eigen::MatrixXd mel_filterbank(const MelConfig& cfg, double sample_rate) {
  check(cfg, sample_rate);
  const auto c = mel_centers(cfg);
  const std::size_t nb = cfg.fft_size / 2 + 1;
  const double step = hz_to_mel(cfg.f_max) - hz_to_mel(cfg.f_min);
  const double dm = step / static_cast<double>(cfg.n_mels - 1);
  // Outer edges one mel step beyond the end centres.
  const double below = mel_to_hz(std::max(0.0, hz_to_mel(cfg.f_min) - dm));
  const double above = mel_to_hz(hz_to_mel(cfg.f_max) + dm);

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.n_mels), static_cast<Eigen::Index>(nb));
  for (std::size_t k = 0; k < nb; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(cfg.fft_size);
    for (std::size_t i = 0; i < cfg.n_mels; ++i) {
      const double l = i == 0 ? below : c[i - 1];
      const double r = i + 1 == cfg.n_mels ? above : c[i + 1];
      double v = 0.0;
      if (f >= l && f <= c[i] && c[i] > l) {
        v = (f - l) / (c[i] - l);
      } else if (f > c[i] && f < r) {
        v = (r - f) / (r - c[i]);
      }
      fb(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(std::span<const float> audio, double sample_rate, const MelConfig& cfg) {
  check(cfg, sample_rate);
  if (audio.size() < cfg.fft_size) throw Error(Errc::too_short, "audio shorter than one FFT frame");
  const std::size_t frames = (audio.size() - cfg.fft_size) / cfg.hop + 1;
  const auto fb = mel_filterbank(cfg, sample_rate);
  const auto w = hann(cfg.fft_size);
  double wsum = 0.0;
  for (double x : w) wsum += x;
  const double scale = 1.0 / (wsum * wsum);

  RealFft fft(cfg.fft_size);
  Eigen::VectorXd p(static_cast<Eigen::Index>(cfg.fft_size / 2 + 1));
  MelSpectrogram out;
  out.sample_rate = sample_rate;
  out.cfg = cfg;
  out.db.resize(static_cast<Eigen::Index>(cfg.n_mels), static_cast<Eigen::Index>(frames));
  for (std::size_t t = 0; t < frames; ++t) {
    double* in = fft.input();
    const float* x = audio.data() + t * cfg.hop;
    for (std::size_t i = 0; i < cfg.fft_size; ++i) in[i] = w[i] * static_cast<double>(x[i]);
    fft.power(p);
    const Eigen::VectorXd mel = (fb * p) * scale;
    for (Eigen::Index m = 0; m < mel.size(); ++m) out.db(m, static_cast<Eigen::Index>(t)) = 10.0 * std::log10(std::max(mel[m], kPowerFloor));
  }
  return out;
}

double spectral_centroid(std::span<const float> audio, double sample_rate) {
  if (audio.size() < 2 || sample_rate <= 0) throw Error(Errc::too_short, "centroid needs at least two samples");
  const std::size_t n = audio.size();
  const auto w = hann(n);
  RealFft fft(n);
  for (std::size_t i = 0; i < n; ++i) fft.input()[i] = w[i] * static_cast<double>(audio[i]);
  Eigen::VectorXd p(static_cast<Eigen::Index>(n / 2 + 1));
  fft.power(p);
  double num = 0.0, den = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    num += p[k] * static_cast<double>(k) * sample_rate / static_cast<double>(n);
    den += p[k];
  }
  if (!(den > 0.0)) throw Error(Errc::silent_input, "spectral centroid of silence");
  return num / den;
}

}  // namespace mmii::analysis
