#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "mmii/frame.hpp"
#include "mmii/scene.hpp"

namespace mmii::server {

// Per-client outbound frames. Audio is never dropped; when more than
// `state_limit` state frames are pending the oldest is discarded.
class OutboundQueue {
 public:
  explicit OutboundQueue(std::size_t state_limit = 8, std::size_t audio_limit = 750);

  // False when the audio backlog exceeds audio_limit: the client is stalled.
  bool push(wire::Frame f);
  std::optional<wire::Frame> pop();
  std::optional<wire::Frame> wait_pop(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

  std::size_t size() const;
  std::uint64_t dropped_state() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<wire::Frame> q_;
  std::size_t state_limit_, audio_limit_;
  std::size_t states_ = 0, audio_ = 0;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

struct ServerOptions {
  std::uint16_t udp_port = 0;  // 0 = ephemeral
  std::uint16_t ws_port = 0;
  std::string address = "127.0.0.1";
  std::filesystem::path log_dir = "logs";
  std::uint64_t seed = 0;
  std::size_t inbound_limit = 4096;  // queued packets per session
};

// Hosts sessions for one scene. A WebSocket connection to "/" creates a new
// session; "/attach/<id>" joins an existing one. UDP datagrams (one OSC
// packet each) feed the "main" session. Every session renders in real time on
// its own thread and streams length-prefixed frames as binary WebSocket
// messages.
class Server {
 public:
  Server(std::shared_ptr<const scene::Scene> scene, ServerOptions opts);
  ~Server();

  void start();  // binds and spawns the control-loop thread
  void stop();   // stops every session (logs are flushed) and the control loop

  std::uint16_t udp_port() const;
  std::uint16_t ws_port() const;
  std::size_t session_count() const;
  std::uint64_t malformed(const std::string& session) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace mmii::server
