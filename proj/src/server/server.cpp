#include <chrono>
#include <map>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "mmii/error.hpp"
#include "mmii/server.hpp"
#include "mmii/session.hpp"

namespace mmii::server {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using udp = asio::ip::udp;

// --- OutboundQueue ----------------------------------------------------------

OutboundQueue::OutboundQueue(std::size_t state_limit, std::size_t audio_limit)
    : state_limit_(state_limit), audio_limit_(audio_limit) {}

bool OutboundQueue::push(wire::Frame f) {
  std::lock_guard lock(mu_);
  if (closed_) return false;
  if (f.kind == wire::FrameKind::state) {
    if (states_ >= state_limit_) {
      for (auto it = q_.begin(); it != q_.end(); ++it) {
        if (it->kind == wire::FrameKind::state) {
          q_.erase(it);
          --states_;
          ++dropped_;
          break;
        }
      }
    }
    ++states_;
  } else if (f.kind == wire::FrameKind::audio) {
    if (audio_ >= audio_limit_) return false;
    ++audio_;
  }
  q_.push_back(std::move(f));
  cv_.notify_one();
  return true;
}

std::optional<wire::Frame> OutboundQueue::pop() {
  std::lock_guard lock(mu_);
  if (q_.empty()) return std::nullopt;
  wire::Frame f = std::move(q_.front());
  q_.pop_front();
  if (f.kind == wire::FrameKind::state) --states_;
  if (f.kind == wire::FrameKind::audio) --audio_;
  return f;
}

std::optional<wire::Frame> OutboundQueue::wait_pop(std::chrono::milliseconds timeout) {
  {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !q_.empty() || closed_; });
  }
  return pop();
}

void OutboundQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

bool OutboundQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::size_t OutboundQueue::size() const {
  std::lock_guard lock(mu_);
  return q_.size();
}

std::uint64_t OutboundQueue::dropped_state() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

// --- session host -----------------------------------------------------------

namespace {

struct Subscriber {
  std::shared_ptr<OutboundQueue> queue;
  std::function<void()> notify;  // wakes the connection's writer on the control loop
};

wire::Frame osc_frame(const osc::Message& m) { return {wire::FrameKind::osc, osc::encode(m)}; }

// One session plus its real-time audio thread.
class Host {
 public:
  Host(std::string id, std::shared_ptr<const scene::Scene> scene, session::SessionOptions opts, std::size_t inbound_limit,
       bool persistent)
      : id_(std::move(id)), persistent_(persistent), limit_(inbound_limit),
        session_(std::make_unique<session::Session>(std::move(scene), std::move(opts))) {}

  ~Host() { stop(); }

  const std::string& id() const { return id_; }
  bool persistent() const { return persistent_; }
  std::uint64_t malformed() const { return malformed_.load(); }

  void start() {
    running_ = true;
    thread_ = std::thread([this] { run(); });
  }

  // Safe from any thread; the control loop and Server::stop may race here.
  void stop() {
    std::lock_guard stop_lock(stop_mu_);
    if (stopped_) return;
    stopped_ = true;
    running_ = false;
    if (thread_.joinable()) thread_.join();
    std::lock_guard lock(sub_mu_);
    for (auto& s : subs_) s.queue->close();
    subs_.clear();
    session_->close();
  }

  // Control loop side. Packets beyond the bound are dropped and counted.
  void post(osc::Bytes packet) {
    std::lock_guard lock(in_mu_);
    if (inbound_.size() >= limit_) {
      ++overflow_;
      return;
    }
    inbound_.push_back(std::move(packet));
  }

  void subscribe(Subscriber s) {
    const osc::Message hello{std::string(osc::addr::hello),
                             {id_, static_cast<std::int32_t>(session_->sample_rate()),
                              static_cast<std::int32_t>(session_->block_size()), std::int32_t{2}}};
    s.queue->push(osc_frame(hello));
    s.notify();
    std::lock_guard lock(sub_mu_);
    subs_.push_back(std::move(s));
  }

  std::size_t unsubscribe(const std::shared_ptr<OutboundQueue>& q) {
    std::lock_guard lock(sub_mu_);
    std::erase_if(subs_, [&](const Subscriber& s) { return s.queue == q; });
    return subs_.size();
  }

 private:
  void run() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(static_cast<double>(session_->block_size()) / session_->sample_rate()));
    std::vector<float> buf(2 * session_->block_size());
    std::deque<osc::Bytes> batch;
    auto next = clock::now();
    while (running_) {
      {
        std::lock_guard lock(in_mu_);
        batch.swap(inbound_);
      }
      for (const auto& p : batch) session_->handle_packet(p);
      batch.clear();
      malformed_ = session_->malformed() + overflow_;

      const auto block = static_cast<std::uint64_t>(session_->block_index());
      session_->render_block(buf);
      std::vector<wire::Frame> frames;
      frames.push_back({wire::FrameKind::audio, {}});
      {
        auto f = wire::encode_audio(block, 2, buf);
        frames.back().payload.assign(f.begin() + 5, f.end());
      }
      if (auto st = session_->take_state()) frames.push_back({wire::FrameKind::state, std::move(*st)});
      for (const auto& e : session_->take_errors()) frames.push_back(osc_frame(e));

      {
        std::lock_guard lock(sub_mu_);
        std::uint64_t dropped = 0;
        for (auto it = subs_.begin(); it != subs_.end();) {
          bool ok = true;
          for (const auto& f : frames) ok = ok && it->queue->push(f);
          dropped += it->queue->dropped_state();
          it->notify();
          if (!ok) {
            spdlog::warn("session {}: client stalled, disconnecting", id_);
            it->queue->close();
            it = subs_.erase(it);
          } else {
            ++it;
          }
        }
        if (dropped > reported_drops_) {
          session_->note_dropped_state(dropped - reported_drops_);
          reported_drops_ = dropped;
        }
      }

      next += period;
      const auto now = clock::now();
      if (now - next > std::chrono::milliseconds(100)) next = now;  // fell behind; resync
      std::this_thread::sleep_until(next);
    }
  }

  std::string id_;
  bool persistent_;
  std::size_t limit_;
  std::unique_ptr<session::Session> session_;
  std::thread thread_;
  std::atomic<bool> running_{false};
  std::mutex stop_mu_;
  bool stopped_ = false;
  std::mutex in_mu_;
  std::deque<osc::Bytes> inbound_;
  std::uint64_t overflow_ = 0;
  std::atomic<std::uint64_t> malformed_{0};
  std::mutex sub_mu_;
  std::vector<Subscriber> subs_;
  std::uint64_t reported_drops_ = 0;
};

}  // namespace

// --- server -----------------------------------------------------------------

struct Server::Impl {
  std::shared_ptr<const scene::Scene> scene;
  ServerOptions opts;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  udp::socket udp_socket{io};
  udp::endpoint udp_from;
  std::array<std::uint8_t, 65536> udp_buf{};
  std::thread thread;
  mutable std::mutex mu;
  std::map<std::string, std::shared_ptr<Host>> hosts;
  std::uint64_t next_id = 1;

  std::shared_ptr<Host> create_host(const std::string& id, bool persistent) {
    session::SessionOptions so;
    so.id = id;
    so.seed = opts.seed;
    if (!opts.log_dir.empty()) {
      std::filesystem::create_directories(opts.log_dir);
      so.log_path = opts.log_dir / (id + ".jsonl");
    }
    auto h = std::make_shared<Host>(id, scene, so, opts.inbound_limit, persistent);
    h->start();
    std::lock_guard lock(mu);
    hosts[id] = h;
    spdlog::info("session {} created", id);
    return h;
  }

  std::shared_ptr<Host> find(const std::string& id) const {
    std::lock_guard lock(mu);
    auto it = hosts.find(id);
    return it == hosts.end() ? nullptr : it->second;
  }

  void release(const std::shared_ptr<Host>& h, const std::shared_ptr<OutboundQueue>& q) {
    if (h->unsubscribe(q) == 0 && !h->persistent()) {
      {
        std::lock_guard lock(mu);
        hosts.erase(h->id());
      }
      h->stop();
      spdlog::info("session {} closed; log flushed", h->id());
    }
  }

  void do_accept();
  void do_udp();
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket sock, Server::Impl& srv) : ws_(std::move(sock)), srv_(srv) {}

  void start() {
    http::async_read(ws_.next_layer(), buf_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

 private:
  void on_request(beast::error_code ec) {
    if (ec) return;
    const std::string target(req_.target());
    if (target == "/" || target.empty()) {
      std::string id;
      {
        std::lock_guard lock(srv_.mu);
        id = "s" + std::to_string(srv_.next_id++);
      }
      host_ = srv_.create_host(id, false);
    } else if (target.rfind("/attach/", 0) == 0) {
      host_ = srv_.find(target.substr(8));
    }
    if (host_ && !websocket::is_upgrade(req_)) {
      srv_.release(host_, queue_);
      host_.reset();
    }
    if (!host_) {
      http::response<http::string_body> res{http::status::not_found, req_.version()};
      res.body() = "no such session\n";
      res.prepare_payload();
      beast::error_code ignore;
      http::write(ws_.next_layer(), res, ignore);
      return;
    }
    ws_.binary(true);
    ws_.async_accept(req_, [self = shared_from_this()](beast::error_code ec2) { self->on_accept(ec2); });
  }

  void on_accept(beast::error_code ec) {
    if (ec) {
      srv_.release(host_, queue_);
      return;
    }
    std::weak_ptr<Connection> weak = shared_from_this();
    auto& io = srv_.io;
    host_->subscribe({queue_, [weak, &io] {
                        asio::post(io, [weak] {
                          if (auto c = weak.lock()) c->pump();
                        });
                      }});
    read();
  }

  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) return finish();
    const auto data = in_.cdata();
    dec_.feed(std::span(static_cast<const std::uint8_t*>(data.data()), data.size()));
    in_.consume(in_.size());
    try {
      while (auto f = dec_.next()) {
        if (f->kind == wire::FrameKind::osc) host_->post(std::move(f->payload));
      }
    } catch (const Error& e) {
      spdlog::warn("session {}: bad frame from client: {}", host_->id(), e.what());
      return finish();
    }
    read();
  }

  void pump() {
    if (writing_ || done_) return;
    auto f = queue_->pop();
    if (!f) {
      if (queue_->closed()) finish();
      return;
    }
    out_ = wire::encode_frame(f->kind, f->payload);
    writing_ = true;
    ws_.async_write(asio::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->finish();
      self->pump();
    });
  }

  void finish() {
    if (done_) return;
    done_ = true;
    queue_->close();
    if (host_) srv_.release(host_, queue_);
    beast::error_code ignore;
    ws_.next_layer().socket().close(ignore);
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& srv_;
  beast::flat_buffer buf_;
  beast::flat_buffer in_;
  http::request<http::string_body> req_;
  std::shared_ptr<Host> host_;
  std::shared_ptr<OutboundQueue> queue_ = std::make_shared<OutboundQueue>();
  wire::FrameDecoder dec_;
  osc::Bytes out_;
  bool writing_ = false;
  bool done_ = false;
};

}  // namespace

void Server::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket sock) {
    if (ec) return;
    std::make_shared<Connection>(std::move(sock), *this)->start();
    do_accept();
  });
}

void Server::Impl::do_udp() {
  udp_socket.async_receive_from(asio::buffer(udp_buf), udp_from, [this](beast::error_code ec, std::size_t n) {
    if (ec == asio::error::operation_aborted) return;
    if (!ec) {
      if (auto h = find("main")) h->post(osc::Bytes(udp_buf.begin(), udp_buf.begin() + static_cast<std::ptrdiff_t>(n)));
    }
    do_udp();
  });
}

Server::Server(std::shared_ptr<const scene::Scene> scene, ServerOptions opts) : impl_(std::make_unique<Impl>()) {
  impl_->scene = std::move(scene);
  impl_->opts = std::move(opts);
}

Server::~Server() { stop(); }

void Server::start() {
  auto& i = *impl_;
  const auto addr = asio::ip::make_address(i.opts.address);
  try {
    i.acceptor.open(addr.is_v6() ? tcp::v6() : tcp::v4());
    i.acceptor.set_option(asio::socket_base::reuse_address(true));
    i.acceptor.bind({addr, i.opts.ws_port});
    i.acceptor.listen();
    i.udp_socket.open(addr.is_v6() ? udp::v6() : udp::v4());
    i.udp_socket.bind({addr, i.opts.udp_port});
  } catch (const boost::system::system_error& e) {
    throw Error(Errc::io_error, std::string("cannot bind: ") + e.what());
  }
  i.create_host("main", true);
  i.do_accept();
  i.do_udp();
  i.thread = std::thread([&i] { i.io.run(); });
  spdlog::info("serving on ws://{}:{} and udp {}", i.opts.address, ws_port(), udp_port());
}

void Server::stop() {
  auto& i = *impl_;
  if (!i.thread.joinable()) return;
  asio::post(i.io, [&i] {
    beast::error_code ignore;
    i.acceptor.close(ignore);
    i.udp_socket.close(ignore);
  });
  std::map<std::string, std::shared_ptr<Host>> hosts;
  {
    std::lock_guard lock(i.mu);
    hosts.swap(i.hosts);
  }
  for (auto& [id, h] : hosts) h->stop();
  i.io.stop();
  i.thread.join();
}

std::uint16_t Server::udp_port() const { return impl_->udp_socket.local_endpoint().port(); }
std::uint16_t Server::ws_port() const { return impl_->acceptor.local_endpoint().port(); }

std::size_t Server::session_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->hosts.size();
}

std::uint64_t Server::malformed(const std::string& session) const {
  auto h = impl_->find(session);
  return h ? h->malformed() : 0;
}

}  // namespace mmii::server
