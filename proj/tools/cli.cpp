#include "mmii/cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <pthread.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmii/analysis.hpp"
#include "mmii/error.hpp"
#include "mmii/eval.hpp"
#include "mmii/modal.hpp"
#include "mmii/scene.hpp"
#include "mmii/server.hpp"
#include "mmii/session.hpp"
#include "mmii/trial_log.hpp"

namespace mmii::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error(Errc::missing_file, "cannot open " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot write " + out_path);
  f << text;
}

// --- modes ------------------------------------------------------------------

void modes_row(std::ostringstream& os, const std::string& id, std::size_t i, double raw_hz,
               std::optional<double> synth_hz, double zeta) {
  os << kModesSchema << ',' << id << ',' << i << ',' << fmt(raw_hz) << ','
     << (synth_hz ? fmt(*synth_hz) : std::string()) << ',' << fmt(zeta) << '\n';
}

// Axial chain: {"schema":"mmii.chain.v1","segments":9,"length":0.9,"area":1e-4,
// "young_modulus":1e6,"density":1000,"ends":"fixed"}.
std::string chain_modes(const json& j) {
  const auto name = j.value("name", std::string("chain"));
  const int segments = j.at("segments").get<int>();
  tissue::ModelParams p;
  p.young_modulus = j.at("young_modulus").get<double>();
  p.density = j.at("density").get<double>();
  p.loss_factor = j.value("loss_factor", 0.01);
  const auto ends_s = j.value("ends", std::string("fixed"));
  if (ends_s != "fixed" && ends_s != "free") throw Error(Errc::config_error, "ends must be fixed or free");
  const auto ends = ends_s == "fixed" ? modal::RodEnds::fixed : modal::RodEnds::free;
  const auto sys = modal::assemble_rod(segments, j.at("length").get<double>(), j.at("area").get<double>(), p, ends);
  modal::SolveOptions so;
  so.solver = modal::Solver::dense;
  const auto m = modal::compute_modes(sys, static_cast<int>(sys.dof_count()), p.loss_factor, so);
  std::ostringstream os;
  for (std::size_t i = 0; i < m.mode_count(); ++i) {
    const double hz = m.frequencies[static_cast<Eigen::Index>(i)] / (2 * std::numbers::pi);
    modes_row(os, name, i, hz, hz, m.damping[static_cast<Eigen::Index>(i)]);
  }
  return os.str();
}

std::string scene_modes(const fs::path& path) {
  const auto sc = scene::build_scene(scene::load_config(path));
  std::ostringstream os;
  for (const auto& s : sc->structures) {
    for (std::size_t i = 0; i < s.raw_model.mode_count(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      std::optional<double> synth;
      if (i < s.model.mode_count()) synth = s.model.frequencies[k] / (2 * std::numbers::pi);
      modes_row(os, s.id, i, s.raw_model.frequencies[k] / (2 * std::numbers::pi), synth, s.raw_model.damping[k]);
    }
  }
  return os.str();
}

std::string modes_table(const fs::path& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw Error(Errc::bad_format, path.string() + ": " + e.what());
  }
  std::string body;
  if (j.is_object() && j.value("schema", std::string()) == kChainSchema) {
    try {
      body = chain_modes(j);
    } catch (const json::exception& e) {
      throw Error(Errc::config_error, path.string() + ": " + e.what());
    }
  } else {
    body = scene_modes(path);
  }
  return "schema,structure,mode,frequency_hz,synth_hz,damping\n" + body;
}

// --- render -----------------------------------------------------------------

void render(const fs::path& scene_path, const fs::path& events, const fs::path& out_path,
            std::optional<std::uint64_t> seed, const std::string& format, double duration) {
  const auto cfg = scene::load_config(scene_path);
  const auto sc = scene::build_scene(cfg);
  const auto log = trial::read_log(events);
  std::uint64_t s = seed.value_or(log.header ? log.header->seed : 0);
  analysis::WavData wav;
  wav.sample_rate = static_cast<int>(cfg.audio.sample_rate);
  wav.channels = 2;
  session::SessionOptions opts;
  opts.id = "render";
  wav.samples = session::render_offline(sc, log.entries, s, duration, opts);
  analysis::write_wav(out_path, wav, format == "s16" ? analysis::WavFormat::s16 : analysis::WavFormat::f32);
}

// --- spectrogram ------------------------------------------------------------

void spectrogram(const fs::path& in, const std::vector<std::string>& outs, const analysis::MelConfig& cfg,
                 double range_db, std::ostream& out) {
  const auto wav = analysis::read_wav(in);
  const auto mono = analysis::to_mono(wav);
  const auto spec = analysis::mel_spectrogram(mono, wav.sample_rate, cfg);
  for (const auto& o : outs) {
    auto ext = fs::path(o).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") {
      analysis::write_png(spec, o, range_db);
    } else if (ext == ".csv") {
      analysis::write_csv(spec, o);
    } else {
      throw Error(Errc::invalid_argument, "output must end in .csv or .png: " + o);
    }
  }
  out << "frames," << spec.frames() << "\ncentroid_hz," << fmt(analysis::spectral_centroid(mono, wav.sample_rate), "%.6g")
      << '\n';
}

// --- eval -------------------------------------------------------------------

void evaluate(const std::vector<std::string>& logs, const fs::path& out_path, double cell,
              const eval::OutlierOptions& oo, std::ostream& out) {
  std::vector<eval::TrialScore> trials;
  for (const auto& l : logs) {
    auto t = eval::score_log(l, cell);
    trials.insert(trials.end(), t.begin(), t.end());
  }
  std::stable_sort(trials.begin(), trials.end(), [](const auto& a, const auto& b) {
    return std::tie(a.trial_id, a.source) < std::tie(b.trial_id, b.source);
  });
  const auto summary = eval::aggregate_trials(trials, oo);
  eval::write_summary_csv(summary, out_path);
  auto trials_path = out_path;
  trials_path.replace_extension(".trials.json");
  emit(eval::trials_json(trials), trials_path.string(), out);
  out << eval::summary_csv(summary);
}

// --- serve ------------------------------------------------------------------

void serve(const fs::path& scene_path, server::ServerOptions opts, std::ostream& out) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  // Blocked before any thread starts so every thread inherits the mask.
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  const auto sc = scene::build_scene(scene::load_config(scene_path));
  server::Server srv(sc, opts);
  srv.start();
  out << "ws " << srv.ws_port() << "\nudp " << srv.udp_port() << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  srv.stop();
  pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Physically-based sonification engine", "mmii"};
  app.require_subcommand(1);

  std::string path, events, output;
  std::vector<std::string> outputs, logs;
  std::optional<std::uint64_t> seed;
  std::string format = "f32";
  double duration = 0.0, cell = 0.0, range_db = 80.0;
  analysis::MelConfig mel;
  server::ServerOptions sopts;
  std::string log_dir = sopts.log_dir.string();
  eval::OutlierOptions oo;

  auto* modes = app.add_subcommand("modes", "Print retained modal frequencies per structure");
  modes->add_option("scene", path, "Scene config or chain fixture")->required();
  modes->add_option("-o,--output", output, "Write the table here instead of stdout");

  auto* rend = app.add_subcommand("render", "Render an event script or trial log offline");
  rend->add_option("scene", path, "Scene config")->required();
  rend->add_option("events", events, "JSON-lines events")->required();
  rend->add_option("-o,--output", output, "Output WAV")->required();
  rend->add_option("--seed", seed, "Seed for stochastic sources (default: log header, else 0)");
  rend->add_option("--format", format, "Sample format")->check(CLI::IsMember({"f32", "s16"}));
  rend->add_option("--duration", duration, "Seconds to render (default: last event + 1 s)");

  auto* spec = app.add_subcommand("spectrogram", "Mel spectrogram of a WAV file");
  spec->add_option("input", path, "Input WAV")->required();
  spec->add_option("-o,--output", outputs, "Output .csv and/or .png")->required();
  spec->add_option("--n-fft", mel.fft_size);
  spec->add_option("--hop", mel.hop);
  spec->add_option("--mels", mel.n_mels);
  spec->add_option("--f-min", mel.f_min);
  spec->add_option("--f-max", mel.f_max);
  spec->add_option("--range-db", range_db, "Dynamic range of the PNG");

  auto* srv = app.add_subcommand("serve", "Serve interactive sessions until SIGINT or SIGTERM");
  srv->add_option("scene", path, "Scene config")->required();
  srv->add_option("--udp", sopts.udp_port, "OSC/UDP port for the main session");
  srv->add_option("--ws", sopts.ws_port, "WebSocket port");
  srv->add_option("--address", sopts.address);
  srv->add_option("--log-dir", log_dir, "TrialLog directory (empty disables logging)");
  srv->add_option("--seed", sopts.seed);

  auto* ev = app.add_subcommand("eval", "Score trial logs and summarise by condition");
  ev->add_option("logs", logs, "TrialLog files")->required();
  ev->add_option("-o,--output", output, "Summary CSV")->required();
  ev->add_option("--cell", cell, "Voxel size in metres (default: ground-truth extent / 128)");
  ev->add_flag("--dice-outliers", oo.dice_3sd, "Drop Dice values beyond 3 sd of the condition mean");
  ev->add_flag("--time-outliers", oo.time_iqr, "Drop task times beyond 1.5 IQR");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*modes) {
      emit(modes_table(path), output, out);
    } else if (*rend) {
      render(path, events, output, seed, format, duration);
    } else if (*spec) {
      spectrogram(path, outputs, mel, range_db, out);
    } else if (*srv) {
      sopts.log_dir = log_dir;
      serve(path, sopts, out);
    } else if (*ev) {
      evaluate(logs, output, cell, oo, out);
    }
  } catch (const std::exception& e) {
    err << "mmii: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mmii::cli
