#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mmii/error.hpp"
#include "mmii/session.hpp"

using namespace mmii;
using namespace mmii::scene;
using namespace mmii::session;

namespace {

const std::filesystem::path kFixtures = MMII_FIXTURE_DIR;

std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("mmii_scene_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::shared_ptr<const Scene> fixture_scene() {
  static auto s = build_scene(load_config(kFixtures / "two_structures.json"));
  return s;
}

double block_energy(const std::vector<float>& b) {
  double e = 0;
  for (float x : b) e += double(x) * x;
  return e;
}

std::vector<float> render(Session& s) {
  std::vector<float> b(2 * s.block_size());
  s.render_block(b);
  return b;
}

// Distance by exhaustive triangle scan.
double brute_distance(const geom::TriMesh& m, const geom::Vec3& q) {
  double best = 1e300;
  for (const auto& f : m.faces) {
    best = std::min(best, (geom::closest_point_on_triangle(q, m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]) - q).norm());
  }
  return best;
}

}  // namespace

TEST_CASE("scene config parse and serialize") {
  const auto c = load_config(kFixtures / "two_structures.json");
  CHECK(c.structures.size() == 2);
  CHECK(c.ground_truth_id == std::optional<std::string>("tumor"));
  CHECK(c.probe_radius == 0.03);
  const auto again = parse_config(to_json(c), c.base_dir);
  CHECK(to_json(again) == to_json(c));

  auto code = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::io_error;
  };
  CHECK(code("{") == Errc::bad_format);
  CHECK(code(R"({"structures": []})") == Errc::config_error);
  CHECK(code(R"({"structures": [{"id":"a","tissue":"glioma","mesh":"a.obj"},{"id":"a","tissue":"glioma","mesh":"b.obj"}]})") ==
        Errc::config_error);
  CHECK(code(R"({"ground_truth_id":"x","structures": [{"id":"a","tissue":"glioma","mesh":"a.obj"}]})") ==
        Errc::config_error);
  CHECK(code(R"({"structures": [{"id":"a","tissue":"glioma","mesh":{"primitive":"torus"}}]})") == Errc::config_error);
}

TEST_CASE("building a scene populates the model cache") {
  auto c = load_config(kFixtures / "two_structures.json");
  const auto dir = fresh_dir("cache");
  c.cache_dir = dir;
  const auto a = build_scene(c);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) files += e.path().extension() == ".modes";
  CHECK(files == 2);
  CHECK_FALSE(a->structures[0].from_cache);
  const auto b = build_scene(c);
  CHECK(b->structures[0].from_cache);
  CHECK(b->structures[0].model.frequencies == a->structures[0].model.frequencies);
  CHECK(a->structures[1].dynamic);
  CHECK_FALSE(a->structures[0].dynamic);
}

TEST_CASE("unknown tissue names the tissue") {
  auto c = load_config(kFixtures / "two_structures.json");
  c.structures[1].tissue = "cartilage";
  try {
    build_scene(c);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_tissue);
    CHECK(std::string(e.what()).find("cartilage") != std::string::npos);
  }
  auto missing = load_config(kFixtures / "two_structures.json");
  missing.structures[0].mesh.primitive.clear();
  missing.structures[0].mesh.path = "no_such_mesh.obj";
  CHECK_THROWS_AS(build_scene(missing), Error);
}

TEST_CASE("idle session is silent with empty proximity") {
  Session s(fixture_scene(), {});
  for (int i = 0; i < 40; ++i) {
    const auto b = render(s);
    CHECK(block_energy(b) == 0.0);
  }
  CHECK(s.proximity().empty());
  // Heart-paced artery is not in range either, so nothing is heard.
  CHECK(s.state_ready());
  const auto st = osc::decode_packet(*s.take_state());
  REQUIRE(st.size() == 3);  // state + two visual entries
  CHECK(st[0].address == osc::addr::state);
  CHECK(st[1].address == osc::addr::visual);
}

TEST_CASE("probe around the tumor lists exactly the tumor") {
  const auto scene = fixture_scene();
  Session s(scene, {});
  const geom::Vec3 p(0.0, 0.0, 0.025);
  CHECK(s.handle_message(osc::make_probe(0.0f, 0.0f, 0.025f, 0.03f)));
  for (int i = 0; i < 10; ++i) render(s);
  const auto st = osc::decode_packet(*s.take_state());
  std::vector<osc::Message> prox, cue;
  for (const auto& m : st) {
    if (m.address == osc::addr::prox) prox.push_back(m);
    if (m.address == osc::addr::cue) cue.push_back(m);
  }
  REQUIRE(prox.size() == 1);
  CHECK(std::get<std::string>(prox[0].args[0]) == "tumor");
  const double d = brute_distance(*scene->structures[0].mesh, p);
  CHECK(std::get<float>(prox[0].args[1]) == doctest::Approx(d).epsilon(1e-6));
  REQUIRE(cue.size() == 1);
  CHECK(std::get<float>(cue[0].args[1]) == doctest::Approx(1.0 - d / 0.03).epsilon(1e-6));
  CHECK(std::get<std::int32_t>(cue[0].args[2]) == 0);
  // The artery at 5 cm is outside the sphere.
  CHECK(d < 0.03);
  CHECK(brute_distance(*scene->structures[1].mesh, p) > 0.03);
}

TEST_CASE("click reaches the audio within two blocks") {
  Session s(fixture_scene(), {});
  s.handle_message(osc::make_probe(0.0f, 0.0f, 0.012f, 0.03f));
  for (int i = 0; i < 5; ++i) render(s);
  // Reference without a click, rendered in lockstep.
  Session ref(fixture_scene(), {});
  ref.handle_message(osc::make_probe(0.0f, 0.0f, 0.012f, 0.03f));
  for (int i = 0; i < 5; ++i) render(ref);

  CHECK(s.handle_message(osc::Message{std::string(osc::addr::click), {}}));
  CHECK(s.visual().scale(0) == interact::kClickScale);
  const auto a = render(s);
  const auto b = render(ref);
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
  CHECK(diff > 1e-3);
}

TEST_CASE("click out of range produces no audio event") {
  Session s(fixture_scene(), {});
  s.handle_message(osc::make_probe(0.3f, 0.3f, 0.3f, 0.03f));
  CHECK(s.handle_message(osc::Message{std::string(osc::addr::click), {}}));
  for (int i = 0; i < 20; ++i) CHECK(block_energy(render(s)) == 0.0);
  CHECK(s.visual().scale(0) == 1.0);

  CHECK_FALSE(s.handle_message(osc::make_click("tumor", 100000)));
  CHECK_FALSE(s.handle_message(osc::make_click("liver", 0)));
  for (int i = 0; i < 5; ++i) CHECK(block_energy(render(s)) == 0.0);
}

TEST_CASE("malformed messages are counted and the session stays live") {
  Session s(fixture_scene(), {});
  const std::vector<std::uint8_t> junk = {'/', 'x', 0, 0, 1, 2};
  CHECK(s.handle_packet(junk) == 0);
  CHECK_FALSE(s.handle_message({"/mmii/nope", {}}));
  CHECK_FALSE(s.handle_message({"/mmii/probe", {1.0f}}));
  CHECK_FALSE(s.handle_message(osc::make_prox("tumor", 0.1f)));  // outbound only
  CHECK(s.malformed() == 4);
  CHECK(s.take_errors().size() == 4);
  CHECK(s.handle_packet(osc::encode(osc::make_hr(72))) == 1);
  render(s);
  CHECK(s.accepted() == 1);
}

TEST_CASE("sessions are isolated") {
  Session a(fixture_scene(), {}), b(fixture_scene(), {});
  a.handle_message(osc::make_probe(0.0f, 0.0f, 0.012f, 0.03f));
  a.handle_message(osc::Message{std::string(osc::addr::click), {}});
  for (int i = 0; i < 50; ++i) {
    render(a);
    CHECK(block_energy(render(b)) == 0.0);
  }
  CHECK(b.proximity().empty());
  CHECK(b.visual().scale(0) == 1.0);
}

TEST_CASE("trial log is written per message and replays byte-identically") {
  const auto dir = fresh_dir("log");
  const auto log = dir / "s1.jsonl";
  std::vector<float> live;
  {
    SessionOptions o;
    o.log_path = log;
    o.seed = 42;
    Session s(fixture_scene(), o);
    std::vector<float> b(2 * s.block_size());
    for (int k = 0; k < 300; ++k) {
      if (k == 3) s.handle_message({std::string(osc::addr::trial), {std::string("t1"), std::string("audiovisual")}});
      if (k % 7 == 0) {
        const float z = 0.04f - 0.0001f * static_cast<float>(k);
        s.handle_message(osc::make_probe(0.01f, 0.0f, z, 0.03f));
      }
      if (k == 50 || k == 120) s.handle_message({std::string(osc::addr::click), {}});
      if (k == 60) s.handle_message(osc::make_hr(90));
      if (k == 70) s.handle_message(osc::make_marker(0.0f, 0.0f, 0.01f));
      if (k == 80) s.handle_message(osc::make_probe(0.05f, 0.0f, 0.0f, 0.03f));  // into the artery
      if (k == 90) s.handle_message(osc::make_probe(0.05f, 0.0f, 0.02f, 0.03f));
      s.render_block(b);
      live.insert(live.end(), b.begin(), b.end());
      if (k == 200) s.handle_message({std::string(osc::addr::trial_end), {}});
    }
    // Log exists and is complete before the session closes.
    const auto parsed = trial::read_log(log);
    CHECK(parsed.header.has_value());
    CHECK(parsed.entries.size() == s.accepted());
  }
  double energy = 0;
  for (float x : live) energy += double(x) * x;
  CHECK(energy > 0.0);

  const auto parsed = trial::read_log(log);
  CHECK(parsed.header->seed == 42);
  const auto replay = render_offline(fixture_scene(), parsed.entries, 42, static_cast<double>(live.size()) / 2 / 48000.0);
  REQUIRE(replay.size() == live.size());
  CHECK(std::memcmp(replay.data(), live.data(), live.size() * sizeof(float)) == 0);

  const auto trials = trial::extract_trials(parsed.entries);
  REQUIRE(trials.size() == 1);
  CHECK(trials[0].id == "t1");
  CHECK(trials[0].ended);
  CHECK(trials[0].markers.size() == 1);
  CHECK(trials[0].task_time() == doctest::Approx((201 - 3) * 128 / 48000.0));
}

TEST_CASE("offline render is deterministic and seed dependent") {
  std::vector<trial::LogEntry> ev = {
      {0.0, std::nullopt, osc::make_probe(0.05f, 0.0f, 0.0f, 0.03f)},
      {0.1, std::nullopt, osc::make_probe(0.0f, 0.0f, 0.012f, 0.03f)},
      {0.2, std::nullopt, osc::Message{std::string(osc::addr::click), {}}},
  };
  const auto a = render_offline(fixture_scene(), ev, 7, 1.0);
  const auto b = render_offline(fixture_scene(), ev, 7, 1.0);
  const auto c = render_offline(fixture_scene(), ev, 8, 1.0);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == 2 * 128 * 375);
}

TEST_CASE("TrialLog lines round-trip") {
  trial::LogEntry e{1.25, 9, {std::string("/mmii/x"), {std::int32_t{-3}, 0.1f, std::string("q\"z"), osc::Blob{0, 255}}}};
  std::istringstream in(trial::entry_line(e));
  const auto f = trial::parse_log(in);
  REQUIRE(f.entries.size() == 1);
  CHECK(f.entries[0].msg == e.msg);
  CHECK(f.entries[0].block == std::optional<std::uint64_t>(9));

  std::istringstream untyped(R"({"t":0,"address":"/mmii/probe","args":[0,0,0.4,0.03]})");
  CHECK(trial::parse_log(untyped).entries[0].msg == osc::make_probe(0, 0, 0.4f, 0.03f));
  std::istringstream arity(R"({"t":0,"address":"/mmii/probe","args":[0,0]})");
  CHECK_THROWS_AS(trial::parse_log(arity), Error);
  std::istringstream typed(R"({"t":0,"address":"/mmii/probe","tags":",ffff","args":[0,0,0.4,0.03]})");
  CHECK(trial::parse_log(typed).entries[0].msg == osc::make_probe(0, 0, 0.4f, 0.03f));
  std::istringstream backwards("{\"t\":1,\"address\":\"/a\"}\n{\"t\":0.5,\"address\":\"/a\"}\n");
  CHECK_THROWS_AS(trial::parse_log(backwards), Error);
}
