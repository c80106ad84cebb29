#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "doctest.h"
#include "mmii/error.hpp"
#include "mmii/server.hpp"
#include "mmii/trial_log.hpp"

using namespace mmii;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

const std::filesystem::path kFixtures = MMII_FIXTURE_DIR;

std::shared_ptr<const scene::Scene> fixture_scene() {
  static auto s = scene::build_scene(scene::load_config(kFixtures / "two_structures.json"));
  return s;
}

class Client {
 public:
  Client(std::uint16_t port, const std::string& target) : ws_(io_) {
    tcp::resolver r(io_);
    asio::connect(ws_.next_layer(), r.resolve("127.0.0.1", std::to_string(port)));
    ws_.binary(true);
    ws_.handshake("127.0.0.1", target);
  }

  void send(const osc::Message& m) { send_raw(wire::encode_frame(wire::FrameKind::osc, osc::encode(m))); }
  void send_raw(const osc::Bytes& b) { ws_.write(asio::buffer(b)); }

  wire::Frame next() {
    while (true) {
      if (auto f = dec_.next()) return *f;
      beast::flat_buffer buf;
      ws_.read(buf);
      const auto d = buf.cdata();
      dec_.feed(std::span(static_cast<const std::uint8_t*>(d.data()), d.size()));
    }
  }

  void close() { ws_.close(websocket::close_code::normal); }

 private:
  asio::io_context io_;
  websocket::stream<tcp::socket> ws_;
  wire::FrameDecoder dec_;
};

std::vector<osc::Message> prox_of(const wire::Frame& f) {
  std::vector<osc::Message> out;
  for (auto& m : osc::decode_packet(f.payload)) {
    if (m.address == osc::addr::prox) out.push_back(m);
  }
  return out;
}

}  // namespace

TEST_CASE("outbound queue drops old state, never audio") {
  server::OutboundQueue q(2, 4);
  for (int i = 0; i < 4; ++i) CHECK(q.push({wire::FrameKind::audio, {std::uint8_t(i)}}));
  for (int i = 0; i < 5; ++i) CHECK(q.push({wire::FrameKind::state, {std::uint8_t(10 + i)}}));
  CHECK(q.dropped_state() == 3);
  CHECK_FALSE(q.push({wire::FrameKind::audio, {9}}));  // stalled client
  std::vector<int> audio, state;
  while (auto f = q.pop()) (f->kind == wire::FrameKind::audio ? audio : state).push_back(f->payload[0]);
  CHECK(audio == std::vector<int>{0, 1, 2, 3});
  CHECK(state == std::vector<int>{13, 14});
}

TEST_CASE("websocket session streams audio and state") {
  const auto logs = std::filesystem::temp_directory_path() / "mmii_server_logs";
  std::filesystem::remove_all(logs);
  server::ServerOptions o;
  o.log_dir = logs;
  server::Server srv(fixture_scene(), o);
  srv.start();
  CHECK(srv.session_count() == 1);  // main

  std::string id;
  {
    Client c(srv.ws_port(), "/");
    const auto hello = c.next();
    REQUIRE(hello.kind == wire::FrameKind::osc);
    const auto hm = osc::decode(hello.payload);
    CHECK(hm.address == osc::addr::hello);
    id = std::get<std::string>(hm.args[0]);
    CHECK(std::get<std::int32_t>(hm.args[1]) == 48000);
    CHECK(srv.session_count() == 2);

    c.send(osc::make_probe(0.0f, 0.0f, 0.02f, 0.03f));
    c.send({std::string(osc::addr::click), {}});
    const osc::Bytes junk = {'/', 'x', 0, 0, 9};
    c.send_raw(wire::encode_frame(wire::FrameKind::osc, junk));

    std::int64_t last_block = -1;
    int audio = 0, gaps = 0;
    bool saw_tumor = false;
    double energy = 0;
    while (audio < 200) {
      const auto f = c.next();
      if (f.kind == wire::FrameKind::audio) {
        const auto a = wire::decode_audio(f.payload);
        CHECK(a.channels == 2);
        CHECK(a.samples.size() == 256);
        if (last_block >= 0 && static_cast<std::int64_t>(a.block) != last_block + 1) ++gaps;
        last_block = static_cast<std::int64_t>(a.block);
        for (float x : a.samples) energy += double(x) * x;
        ++audio;
      } else if (f.kind == wire::FrameKind::state) {
        const auto p = prox_of(f);
        if (p.size() == 1 && std::get<std::string>(p[0].args[0]) == "tumor") saw_tumor = true;
      }
    }
    CHECK(gaps == 0);
    CHECK(saw_tumor);
    CHECK(energy > 0.0);
    CHECK(srv.malformed(id) == 1);
    c.close();
  }
  // Session ends with its client; the log survives.
  for (int i = 0; i < 200 && srv.session_count() > 1; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  CHECK(srv.session_count() == 1);
  const auto log = trial::read_log(logs / (id + ".jsonl"));
  REQUIRE(log.entries.size() == 2);
  CHECK(log.entries[0].msg == osc::make_probe(0.0f, 0.0f, 0.02f, 0.03f));
  srv.stop();
}

TEST_CASE("udp ingest feeds the main session only") {
  server::ServerOptions o;
  o.log_dir.clear();
  server::Server srv(fixture_scene(), o);
  srv.start();

  Client main(srv.ws_port(), "/attach/main");
  Client other(srv.ws_port(), "/");
  CHECK(osc::decode(main.next().payload).address == osc::addr::hello);
  CHECK(osc::decode(other.next().payload).address == osc::addr::hello);

  asio::io_context io;
  asio::ip::udp::socket sock(io, asio::ip::udp::v4());
  const auto pkt = osc::encode(osc::make_probe(0.05f, 0.0f, 0.0f, 0.03f));
  sock.send_to(asio::buffer(pkt), {asio::ip::make_address("127.0.0.1"), srv.udp_port()});
  const std::vector<std::uint8_t> junk = {1, 2, 3};
  sock.send_to(asio::buffer(junk), {asio::ip::make_address("127.0.0.1"), srv.udp_port()});

  bool saw_artery = false;
  for (int states = 0; states < 20 && !saw_artery;) {
    const auto f = main.next();
    if (f.kind != wire::FrameKind::state) continue;
    ++states;
    for (const auto& m : prox_of(f)) saw_artery |= std::get<std::string>(m.args[0]) == "artery";
  }
  CHECK(saw_artery);
  CHECK(srv.malformed("main") == 1);

  for (int states = 0; states < 5;) {
    const auto f = other.next();
    if (f.kind != wire::FrameKind::state) continue;
    ++states;
    CHECK(prox_of(f).empty());
  }
  Client(srv.ws_port(), "/").close();
  CHECK_THROWS(Client(srv.ws_port(), "/attach/nope"));
  main.close();
  other.close();
  srv.stop();
}
