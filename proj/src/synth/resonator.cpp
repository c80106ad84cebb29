#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmii/error.hpp"
#include "mmii/synth.hpp"

namespace mmii::synth {

Eigen::MatrixXd vertex_gains(const modal::ModalModel& model,
                             const std::vector<geom::Vec3>& normals) {
  const Eigen::Index dpv = model.dof_per_vertex;
  const Eigen::Index verts = model.mode_shapes.rows() / dpv;
  const Eigen::Index modes = model.mode_shapes.cols();
  if (dpv == 1) return model.mode_shapes;
  if (dpv != 3 || static_cast<Eigen::Index>(normals.size()) != verts) {
    throw Error(Errc::invalid_argument, "vertex_gains needs one normal per vertex");
  }
  Eigen::MatrixXd g(verts, modes);
  for (Eigen::Index v = 0; v < verts; ++v) {
    const geom::Vec3& n = normals[static_cast<std::size_t>(v)];
    for (Eigen::Index i = 0; i < modes; ++i) {
      g(v, i) = model.mode_shapes.block<3, 1>(3 * v, i).dot(n);
    }
  }
  return g;
}

ResonatorBank::ResonatorBank(const modal::ModalModel& model, Eigen::MatrixXd vertex_gains,
                             const BankOptions& opts)
    : max_block_(opts.max_block) {
  if (model.mode_count() == 0) throw Error(Errc::empty_model, "model has no retained modes");
  if (vertex_gains.cols() != static_cast<Eigen::Index>(model.mode_count()) ||
      vertex_gains.rows() == 0) {
    throw Error(Errc::invalid_argument, "vertex gain matrix does not match the model");
  }
  if (!(opts.sample_rate > 0.0) || opts.max_block == 0) {
    throw Error(Errc::invalid_argument, "sample rate and block size must be positive");
  }
  const double T = 1.0 / opts.sample_rate;
  const double nyquist_guard = 0.45 * opts.sample_rate;

  std::vector<Eigen::Index> kept;
  std::vector<double> freqs;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(model.mode_count()); ++i) {
    double f = model.frequencies[i] / (2.0 * std::numbers::pi);
    if (opts.invert) f = opts.band_lo * opts.band_hi / f;
    if (!(f > 0.0) || f >= nyquist_guard) {
      ++dropped_;
      continue;
    }
    kept.push_back(i);
    freqs.push_back(f);
  }
  if (kept.empty()) throw Error(Errc::empty_model, "every mode lies above the Nyquist guard");
  const double f_ref = *std::min_element(freqs.begin(), freqs.end());

  const auto m = kept.size();
  gains_.resize(vertex_gains.rows(), static_cast<Eigen::Index>(m));
  freq_hz_ = freqs;
  a1_.resize(m);
  a2_.resize(m);
  b1_.resize(m);
  out_gain_.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Eigen::Index i = kept[k];
    const double tilt = std::pow(10.0, opts.tilt_db_per_octave * std::log2(freqs[k] / f_ref) / 20.0);
    gains_.col(static_cast<Eigen::Index>(k)) = tilt * vertex_gains.col(i);
    const double omega = 2.0 * std::numbers::pi * freqs[k];
    const double zeta = model.damping[i];
    const double r = std::exp(-zeta * omega * T);
    const double omega_d = omega * std::sqrt(1.0 - zeta * zeta);
    const double theta = omega_d * T;
    a1_[k] = 2.0 * r * std::cos(theta);
    a2_[k] = -r * r;
    b1_[k] = r * std::sin(theta) / omega_d;
  }

  if (opts.pickup_vertex >= 0) {
    if (opts.pickup_vertex >= vertex_gains.rows()) {
      throw Error(Errc::invalid_vertex, "pickup vertex out of range");
    }
    pickup_ = static_cast<std::uint32_t>(opts.pickup_vertex);
  } else {
    Eigen::Index best = 0;
    gains_.cwiseAbs().rowwise().sum().maxCoeff(&best);
    pickup_ = static_cast<std::uint32_t>(best);
  }
  for (std::size_t k = 0; k < m; ++k) {
    out_gain_[k] = vertex_gains(pickup_, kept[k]);
  }

  y1_.assign(m, 0.0);
  y2_.assign(m, 0.0);
  x1_.assign(m, 0.0);
  drive_.assign(m * max_block_, 0.0);
  acc_.assign(max_block_, 0.0);

  if (!std::isnan(opts.normalize_dbfs)) {
    // Driving-point impulse response at the pickup, run through the real filter.
    const auto n = static_cast<std::size_t>(opts.normalize_seconds * opts.sample_rate);
    std::vector<float> block(max_block_);
    double peak = 0.0;
    impulse(pickup_, 1.0, 0);
    for (std::size_t done = 0; done < n; done += max_block_) {
      std::fill(block.begin(), block.end(), 0.0f);
      process(block);
      for (float s : block) peak = std::max(peak, static_cast<double>(std::abs(s)));
    }
    reset();
    if (peak > 0.0) {
      norm_ = std::pow(10.0, opts.normalize_dbfs / 20.0) / peak;
      for (auto& g : out_gain_) g *= norm_;
    }
  }
}

double ResonatorBank::max_pole_radius() const {
  double r = 0.0;
  for (double a2 : a2_) r = std::max(r, std::sqrt(-a2));
  return r;
}

double ResonatorBank::state_energy() const {
  double e = 0.0;
  for (std::size_t k = 0; k < mode_count(); ++k) {
    const double r = std::sqrt(-a2_[k]);
    const double c = a1_[k] / (2.0 * r);
    const double s2 = 1.0 - c * c;
    // Rescale y[n-1] by r so the quadratic form is the undamped invariant.
    const double y1 = y1_[k], y2 = r * y2_[k];
    const double q = y1 * y1 - 2.0 * c * y1 * y2 + y2 * y2;
    e += out_gain_[k] * out_gain_[k] * q / s2;
  }
  return e;
}

void ResonatorBank::check_vertex(std::uint32_t v) const {
  if (v >= static_cast<std::uint32_t>(gains_.rows())) {
    throw Error(Errc::invalid_vertex, "vertex " + std::to_string(v) + " out of range (" +
                                          std::to_string(gains_.rows()) + " vertices)");
  }
}

double ResonatorBank::input_gain(std::uint32_t v, std::size_t mode) const {
  check_vertex(v);
  return gains_(v, static_cast<Eigen::Index>(mode));
}

void ResonatorBank::impulse(std::uint32_t vertex, double force, std::size_t offset) {
  check_vertex(vertex);
  if (offset >= max_block_) throw Error(Errc::invalid_argument, "impulse offset beyond block");
  const std::size_t m = mode_count();
  for (std::size_t k = 0; k < m; ++k) {
    drive_[k * max_block_ + offset] += force * gains_(vertex, static_cast<Eigen::Index>(k));
  }
}

void ResonatorBank::drive(std::uint32_t vertex, std::span<const float> force) {
  check_vertex(vertex);
  const std::size_t n = std::min(force.size(), max_block_);
  const std::size_t m = mode_count();
  for (std::size_t k = 0; k < m; ++k) {
    const double g = gains_(vertex, static_cast<Eigen::Index>(k));
    if (g == 0.0) continue;
    double* d = drive_.data() + k * max_block_;
    for (std::size_t s = 0; s < n; ++s) d[s] += g * force[s];
  }
}

void ResonatorBank::process(std::span<float> out) {
  const std::size_t n = std::min(out.size(), max_block_);
  std::fill(acc_.begin(), acc_.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
  for (std::size_t k = 0; k < mode_count(); ++k) {
    const double a1 = a1_[k], a2 = a2_[k], b1 = b1_[k], g = out_gain_[k];
    double y1 = y1_[k], y2 = y2_[k], x1 = x1_[k];
    double* d = drive_.data() + k * max_block_;
    for (std::size_t s = 0; s < n; ++s) {
      const double y = a1 * y1 + a2 * y2 + b1 * x1;
      x1 = d[s];
      d[s] = 0.0;
      y2 = y1;
      y1 = y;
      acc_[s] += g * y;
    }
    y1_[k] = y1;
    y2_[k] = y2;
    x1_[k] = x1;
  }
  for (std::size_t s = 0; s < n; ++s) out[s] += static_cast<float>(acc_[s]);
}

void ResonatorBank::reset() {
  std::fill(y1_.begin(), y1_.end(), 0.0);
  std::fill(y2_.begin(), y2_.end(), 0.0);
  std::fill(x1_.begin(), x1_.end(), 0.0);
  std::fill(drive_.begin(), drive_.end(), 0.0);
}

float soft_clip(float x) {
  const float a = std::abs(x);
  if (a <= 0.8f) return x;
  const float y = 0.8f + 0.2f * std::tanh((a - 0.8f) / 0.2f);
  return x < 0 ? -y : y;
}

}  // namespace mmii::synth
