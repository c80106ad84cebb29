#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "mmii/engine.hpp"
#include "mmii/error.hpp"
#include "mmii/modal.hpp"
#include "mmii/primitives.hpp"
#include "mmii/tissue.hpp"

using namespace mmii;
using namespace mmii::synth;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

modal::ModalModel single_mode(double hz, double zeta) {
  modal::ModalModel m;
  m.dof_per_vertex = 1;
  m.frequencies = Eigen::VectorXd::Constant(1, 2 * kPi * hz);
  m.damping = Eigen::VectorXd::Constant(1, zeta);
  m.mode_shapes = Eigen::MatrixXd::Ones(1, 1);
  return m;
}

double rms(const std::vector<float>& x, std::size_t from, std::size_t len) {
  double acc = 0.0;
  for (std::size_t i = from; i < from + len; ++i) acc += double(x[i]) * x[i];
  return std::sqrt(acc / static_cast<double>(len));
}

// Single-bin DFT power.
double bin_power(const std::vector<float>& x, double hz, double sr) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += double(x[i]) * std::polar(1.0, -2 * kPi * hz * static_cast<double>(i) / sr);
  }
  return std::norm(acc);
}

std::vector<float> render_left(AudioEngine& e, std::size_t blocks) {
  std::vector<float> out;
  std::vector<float> buf(2 * e.block_size());
  for (std::size_t b = 0; b < blocks; ++b) {
    e.render_block(buf);
    for (std::size_t i = 0; i < e.block_size(); ++i) out.push_back(buf[2 * i]);
  }
  return out;
}

Voice mode_voice(double hz, double zeta, const std::string& id = "m") {
  Voice v;
  v.id = id;
  v.bank = ResonatorBank(single_mode(hz, zeta), Eigen::MatrixXd::Ones(1, 1));
  return v;
}

}  // namespace

TEST_CASE("single-mode impulse response equals the damped sinusoid") {
  const double f = 440.0, zeta = 0.01, sr = 48000.0;
  BankOptions opts;
  opts.normalize_dbfs = kNaN;
  const ResonatorBank bank(single_mode(f, zeta), Eigen::MatrixXd::Ones(1, 1), opts);
  const auto h = impulse_response(bank, 0, 1.0, 48000);
  const double w = 2 * kPi * f;
  const double wd = w * std::sqrt(1 - zeta * zeta);
  const double peak = 1.0 / wd;
  CHECK(h[0] == 0.0f);
  // Sample n + 1 holds t = (n + 1) T: the input enters through x[n-1].
  for (std::size_t n = 0; n + 1 < h.size(); ++n) {
    const double t = static_cast<double>(n + 1) / sr;
    const double expected = std::exp(-zeta * w * t) * std::sin(wd * t) / wd;
    CHECK(std::abs(h[n + 1] - expected) <= 1e-6 * peak);
  }

  // RMS over one period-aligned window at 0.1 s relative to the first window.
  const auto win = static_cast<std::size_t>(std::lround(10 * sr / f));  // 10 periods
  const double r0 = rms(h, 1, win);
  const double r1 = rms(h, 1 + 4800, win);
  const double expected = std::exp(-2 * kPi * 440 * 0.01 * 0.1);
  CHECK(expected == doctest::Approx(0.0629).epsilon(1e-3));
  CHECK(std::abs(r1 / r0 - expected) / expected < 0.05);
}

TEST_CASE("bank linearity and node vertices") {
  modal::ModalModel m;
  m.dof_per_vertex = 1;
  m.frequencies = Eigen::Vector2d(2 * kPi * 200, 2 * kPi * 530);
  m.damping = Eigen::Vector2d(0.01, 0.02);
  m.mode_shapes.resize(2, 2);
  m.mode_shapes << 1.0, 0.0,   // vertex 0 sits on a node of mode 2
      0.7, 0.9;
  BankOptions opts;
  opts.pickup_vertex = 1;
  const ResonatorBank bank(m, m.mode_shapes, opts);

  const auto zero = impulse_response(bank, 0, 0.0, 2000);
  for (float s : zero) CHECK(s == 0.0f);

  auto twice = bank;
  twice.impulse(0, 1.0, 0);
  const auto single = impulse_response(bank, 0, 1.0, 2000);
  const auto doubled = impulse_response(twice, 0, 1.0, 2000);  // reset() clears the pending hit
  CHECK(single == doubled);

  ResonatorBank two = bank;
  two.reset();
  two.impulse(0, 1.0, 0);
  two.impulse(0, 1.0, 0);
  std::vector<float> out(2000, 0.0f);
  for (std::size_t p = 0; p < out.size(); p += 100) {
    two.process(std::span<float>(out).subspan(p, 100));
  }
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 2.0f * single[i]);

  CHECK(bank.input_gain(0, 1) == 0.0);
  // Vertex 0 only reaches mode 1: the response has no 530 Hz component.
  const auto h0 = impulse_response(bank, 0, 1.0, 48000);
  const auto h1 = impulse_response(bank, 1, 1.0, 48000);
  modal::ModalModel only_first = m;
  only_first.frequencies.conservativeResize(1);
  only_first.damping.conservativeResize(1);
  only_first.mode_shapes = m.mode_shapes.leftCols(1).eval();
  BankOptions raw = opts;
  raw.normalize_dbfs = kNaN;
  const ResonatorBank full_raw(m, m.mode_shapes, raw);
  const ResonatorBank first_raw(only_first, only_first.mode_shapes, raw);
  CHECK(impulse_response(full_raw, 0, 1.0, 4800) == impulse_response(first_raw, 0, 1.0, 4800));
  CHECK(impulse_response(full_raw, 1, 1.0, 4800) != impulse_response(first_raw, 1, 1.0, 4800));
  CHECK(bin_power(h1, 530, 48000) > 1e-2 * bin_power(h1, 200, 48000));
  CHECK(h0 != h1);

  CHECK_THROWS_AS(impulse_response(bank, 7, 1.0, 10), Error);
}

TEST_CASE("normalization puts the driving-point peak at -12 dBFS") {
  const auto sphere = geom::make_icosphere(0.05, 2);
  const auto params = tissue::to_model_params(tissue::TissueRegistry::builtin().get("vertebra"));
  const auto model = modal::pitch_map(
      modal::compute_modes(modal::assemble_shell(sphere, params, 0.002), 32, params.loss_factor),
      80, 8000);
  const ResonatorBank bank(model, vertex_gains(model, geom::vertex_normals(sphere)));
  const auto h = impulse_response(bank, bank.pickup_vertex(), 1.0, 24000);
  double peak = 0.0;
  for (float s : h) peak = std::max(peak, double(std::abs(s)));
  CHECK(peak == doctest::Approx(std::pow(10.0, -12.0 / 20.0)).epsilon(1e-5));
}

TEST_CASE("vertex gains project shell modes on the normals") {
  modal::ModalModel m;
  m.dof_per_vertex = 3;
  m.frequencies = Eigen::VectorXd::Constant(1, 100.0);
  m.damping = Eigen::VectorXd::Constant(1, 0.01);
  m.mode_shapes.resize(6, 1);
  m.mode_shapes << 1, 2, 3, 0, 0, 5;
  const auto g = vertex_gains(m, {geom::Vec3(0, 1, 0), geom::Vec3(0, 0, -1)});
  CHECK(g(0, 0) == 2.0);
  CHECK(g(1, 0) == -5.0);
  CHECK_THROWS_AS(vertex_gains(m, {}), Error);
}

TEST_CASE("poles are stable for every tissue on the fixture shell") {
  const auto sphere = geom::make_icosphere(0.05, 2);
  const auto normals = geom::vertex_normals(sphere);
  const auto reg = tissue::TissueRegistry::builtin();
  for (const auto& name : reg.names()) {
    const auto p = tissue::to_model_params(reg.get(name));
    const auto model = modal::pitch_map(
        modal::compute_modes(modal::assemble_shell(sphere, p, 0.002), 64, p.loss_factor), 80, 8000);
    const ResonatorBank bank(model, vertex_gains(model, normals));
    INFO(name);
    CHECK(bank.max_pole_radius() < 1.0);
    ResonatorBank b = bank;
    b.impulse(0, 1.0, 0);
    std::vector<float> block(128);
    std::vector<float> h;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 750; ++k) {
      std::fill(block.begin(), block.end(), 0.0f);
      b.process(block);
      h.insert(h.end(), block.begin(), block.end());
      const double e = b.state_energy();
      CHECK(e < prev);
      prev = e;
    }
    // Pickup level in the last half-second sits below the first.
    CHECK(rms(h, h.size() - 24000, 24000) < rms(h, 0, 24000));
  }
}

TEST_CASE("engine: silence, gain 0 and pan") {
  std::vector<Voice> voices;
  voices.push_back(mode_voice(300, 0.01, "a"));
  voices.push_back(mode_voice(700, 0.01, "b"));
  AudioEngine e({}, std::move(voices));
  std::vector<float> buf(256, 1.0f);
  e.render_block(buf);
  for (float s : buf) CHECK(s == 0.0f);

  e.apply({Command::Type::impulse, 0, 0, 0, 1.0});
  e.apply({Command::Type::impulse, 1, 0, 0, 1.0});
  e.apply({Command::Type::set_gain, 1, 0, 0, 1.0});   // voice a stays at gain 0
  e.apply({Command::Type::set_pan, 1, 0, 0, -1.0});   // hard left
  const auto left = render_left(e, 40);
  std::vector<Voice> only_b;
  only_b.push_back(mode_voice(700, 0.01, "b"));
  AudioEngine ref({}, std::move(only_b));
  ref.apply({Command::Type::impulse, 0, 0, 0, 1.0});
  ref.apply({Command::Type::set_gain, 0, 0, 0, 1.0});
  ref.apply({Command::Type::set_pan, 0, 0, 0, -1.0});
  CHECK(left == render_left(ref, 40));
  e.render_block(buf);
  for (std::size_t i = 0; i < 128; ++i) CHECK(std::abs(buf[2 * i + 1]) < 1e-7f);
  CHECK(e.overloads() == 0);
}

TEST_CASE("engine: gain ramps across one block, then holds") {
  std::vector<Voice> voices;
  voices.push_back(mode_voice(300, 0.0001));
  AudioEngine e({.clip = false}, std::move(voices));
  e.apply({Command::Type::impulse, 0, 0, 0, 1.0});
  e.apply({Command::Type::set_gain, 0, 0, 0, 1.0});
  auto a = render_left(e, 2);

  std::vector<Voice> ref_voices;
  ref_voices.push_back(mode_voice(300, 0.0001));
  AudioEngine r({.clip = false}, std::move(ref_voices));
  r.apply({Command::Type::impulse, 0, 0, 0, 1.0});
  r.apply({Command::Type::set_gain, 0, 0, 0, 1.0});
  std::vector<float> buf(256);
  r.render_block(buf);
  // Second block runs at full gain in both engines.
  r.render_block(buf);
  for (std::size_t i = 0; i < 128; ++i) CHECK(a[128 + i] == buf[2 * i]);
  // First block ramps from 0: sample i carries gain (i + 1) / 128.
  std::vector<Voice> full_voices;
  full_voices.push_back(mode_voice(300, 0.0001));
  AudioEngine f({.clip = false}, std::move(full_voices));
  f.apply({Command::Type::impulse, 0, 0, 0, 1.0});
  f.apply({Command::Type::set_gain, 0, 0, 0, 1.0});
  f.render_block(buf);  // prev gain 0 -> 1 ramp
  for (std::size_t i = 0; i < 128; ++i) CHECK(a[i] == buf[2 * i]);
}

TEST_CASE("engine: commands wait for their block") {
  std::vector<Voice> voices;
  voices.push_back(mode_voice(300, 0.01));
  AudioEngine e({}, std::move(voices));
  CHECK(e.queue().push({Command::Type::set_gain, 0, 0, 0, 1.0, 0}));
  CHECK(e.queue().push({Command::Type::impulse, 0, 0, 5, 1.0, 3}));
  std::vector<float> buf(256);
  for (int b = 0; b < 3; ++b) {
    e.render_block(buf);
    for (float s : buf) CHECK(s == 0.0f);
  }
  e.render_block(buf);
  CHECK(buf[2 * 5] == 0.0f);
  CHECK(buf[2 * 6] != 0.0f);  // one-sample filter delay after offset 5
  CHECK(e.queue().size() == 0);

  CHECK(e.queue().push({Command::Type::impulse, 0, 99, 0, 1.0, 0}));
  e.render_block(buf);
  CHECK(e.rejected_commands() == 1);
}

TEST_CASE("engine linearity and determinism with sustained noise") {
  auto make = [](std::uint64_t seed, double scale) {
    std::vector<Voice> voices;
    voices.push_back(mode_voice(250, 0.02, "a"));
    voices.push_back(mode_voice(900, 0.05, "b"));
    auto e = std::make_unique<AudioEngine>(EngineConfig{.seed = seed, .clip = false}, std::move(voices));
    e->apply({Command::Type::set_gain, 0, 0, 0, 0.8});
    e->apply({Command::Type::set_gain, 1, 0, 0, 0.3});
    e->apply({Command::Type::impulse, 0, 0, 17, 0.7 * scale});
    e->apply({Command::Type::impulse, 1, 0, 90, 1.1 * scale});
    return e;
  };
  auto base = make(1, 1.0);
  auto scaled = make(1, 3.0);
  const auto x = render_left(*base, 50);
  const auto y = render_left(*scaled, 50);
  double peak = 0.0;
  for (float s : x) peak = std::max(peak, double(std::abs(s)));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - 3.0 * x[i]) <= 1e-6 * peak);

  auto noisy = [&](std::uint64_t seed) {
    auto e = make(seed, 1.0);
    e->apply({Command::Type::sustain_start, 0, 0, 0, 1.0});
    return render_left(*e, 30);
  };
  CHECK(noisy(5) == noisy(5));
  CHECK(noisy(5) != noisy(6));

  auto e = make(1, 1.0);
  e->apply({Command::Type::sustain_start, 0, 0, 0, 1.0});
  e->apply({Command::Type::sustain_stop, 0, 0, 0, 0.0});
  const auto stopped = render_left(*e, 50);
  CHECK(stopped == x);
}

TEST_CASE("soft clip") {
  CHECK(soft_clip(0.5f) == 0.5f);
  CHECK(soft_clip(-0.8f) == -0.8f);
  CHECK(soft_clip(10.0f) <= 1.0f);
  CHECK(soft_clip(10.0f) > 0.99f);
  CHECK(soft_clip(-3.0f) == -soft_clip(3.0f));
  float prev = soft_clip(0.0f);
  for (float x = 0.001f; x < 3.0f; x += 0.001f) {
    CHECK(soft_clip(x) >= prev);
    CHECK(std::abs(soft_clip(x) - prev) < 0.002f);
    prev = soft_clip(x);
  }

  std::vector<Voice> voices;
  voices.push_back(mode_voice(300, 0.01));
  AudioEngine e({}, std::move(voices));
  e.apply({Command::Type::set_gain, 0, 0, 0, 1.0});
  e.apply({Command::Type::impulse, 0, 0, 0, 20.0});
  std::vector<float> buf(256);
  for (int b = 0; b < 4; ++b) {
    e.render_block(buf);
    for (float s : buf) CHECK(std::abs(s) <= 1.0f);
  }
  CHECK(e.overloads() > 0);
}

TEST_CASE("granular bursts follow the heart rate") {
  for (double bpm : {60.0, 120.0, 75.0}) {
    GranularSource g(synthetic_pulse(48000), {.heart_rate = bpm});
    std::vector<float> block(128);
    std::vector<std::int64_t> starts;
    std::int64_t seen = 0;
    for (int b = 0; b < 48000 * 3 / 128; ++b) {
      g.render(block);
      if (g.burst_count() != seen) {
        seen = g.burst_count();
        starts.push_back(g.last_burst());
      }
    }
    const double period = 60.0 * 48000 / bpm;
    REQUIRE(starts.size() >= 2);
    for (std::size_t k = 0; k < starts.size(); ++k) {
      CHECK(std::abs(static_cast<double>(starts[k]) - k * period) <= 1.0);
    }
  }
  GranularSource g60(synthetic_pulse(48000), {.heart_rate = 60});
  GranularSource g120(synthetic_pulse(48000), {.heart_rate = 120});
  CHECK(g60.grains_per_burst() > 1);
}

TEST_CASE("granular source validation") {
  CHECK_THROWS_AS(GranularSource({}, {}), Error);
  CHECK_THROWS_AS(GranularSource(synthetic_pulse(48000), {.grain_ms = 5}), Error);
  CHECK_THROWS_AS(GranularSource(synthetic_pulse(48000), {.grain_ms = 150}), Error);
  CHECK_THROWS_AS(GranularSource(synthetic_pulse(48000), {.heart_rate = 0}), Error);
  GranularSource g(synthetic_pulse(48000), {});
  CHECK_THROWS_AS(g.set_heart_rate(-1), Error);
}

TEST_CASE("grain overlap-add rebuilds the pulse when jitter is off") {
  const auto pulse = synthetic_pulse(48000);
  GranularSource g(pulse, {.jitter = 0.0});
  std::vector<float> out(pulse.size() + 4000);
  g.render(out);
  // Periodic Hann at 50% overlap sums to 1 away from the first half-grain.
  const std::size_t half = 960;
  double err = 0.0, ref = 0.0;
  for (std::size_t i = half; i + half < pulse.size(); ++i) {
    err += std::pow(out[i] - pulse[i], 2);
    ref += std::pow(pulse[i], 2);
  }
  CHECK(std::sqrt(err / ref) < 1e-5);
}

TEST_CASE("engaged vessel output carries the vessel modes") {
  auto render = [](bool engaged) {
    Voice v = mode_voice(523.0, 0.01, "vessel");
    v.pulse.emplace(synthetic_pulse(48000), GranularOptions{.seed = 3});
    v.engaged = engaged;
    std::vector<Voice> voices;
    voices.push_back(std::move(v));
    AudioEngine e({.seed = 3}, std::move(voices));
    e.apply({Command::Type::set_gain, 0, 0, 0, 1.0});
    return render_left(e, 48000 * 2 / 128);
  };
  const auto on = render(true);
  const auto off = render(false);
  CHECK(on != off);
  auto ratio = [](const std::vector<float>& x) {
    return bin_power(x, 523.0, 48000) / (bin_power(x, 80.0, 48000) + bin_power(x, 60.0, 48000));
  };
  CHECK(ratio(on) > 100.0 * ratio(off));
}
