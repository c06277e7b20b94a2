#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/crypto.hpp"
#include "dnsmorph/errors.hpp"
#include "dnsmorph/framing.hpp"
#include "dnsmorph/session.hpp"

namespace dnsmorph::runtime {

inline constexpr std::size_t kUdpBuffer = 64 * 1024;

struct Endpoint {
  sockaddr_in addr{};
};

inline Endpoint make_endpoint(const std::string& host, std::uint16_t port) {
  Endpoint e;
  e.addr.sin_family = AF_INET;
  e.addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &e.addr.sin_addr) != 1) {
    throw ConfigError("not an IPv4 address: '" + host + "'");
  }
  return e;
}

inline Endpoint parse_hostport(const std::string& hostport) {
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos || colon + 1 >= hostport.size()) {
    throw ConfigError("expected host:port, got '" + hostport + "'");
  }
  int port = 0;
  try {
    port = std::stoi(hostport.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("port is not a number in '" + hostport + "'");
  }
  if (port < 1 || port > 65535) throw ConfigError("port out of range in '" + hostport + "'");
  return make_endpoint(hostport.substr(0, colon), static_cast<std::uint16_t>(port));
}

class UdpSocket {
 public:
  explicit UdpSocket(std::uint16_t port, const std::string& host = "127.0.0.1") {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw BindFailure("udp socket creation failed");
    const Endpoint local = make_endpoint(host, port);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&local.addr), sizeof(local.addr)) != 0) {
      ::close(fd_);
      throw BindFailure("udp bind to port " + std::to_string(port) + " failed: " +
                        std::strerror(errno));
    }
  }

  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;
  ~UdpSocket() {
    if (fd_ >= 0) ::close(fd_);
  }

  std::uint16_t port() const {
    sockaddr_in a{};
    socklen_t len = sizeof(a);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len) != 0) {
      throw BindFailure("getsockname failed");
    }
    return ntohs(a.sin_port);
  }

  void send_to(const Endpoint& dest, ByteView bytes) const {
    ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&dest.addr),
             sizeof(dest.addr));
  }

  struct Datagram {
    Bytes bytes;
    Endpoint from;
  };

  std::optional<Datagram> recv(double timeout_s) const {
    pollfd p{fd_, POLLIN, 0};
    const int ms = timeout_s <= 0 ? 0 : static_cast<int>(timeout_s * 1000) + 1;
    if (::poll(&p, 1, ms) <= 0 || (p.revents & POLLIN) == 0) return std::nullopt;
    Datagram d;
    d.bytes.resize(kUdpBuffer);
    socklen_t len = sizeof(d.from.addr);
    const ssize_t n = ::recvfrom(fd_, d.bytes.data(), d.bytes.size(), 0,
                                 reinterpret_cast<sockaddr*>(&d.from.addr), &len);
    if (n < 0) return std::nullopt;
    d.bytes.resize(static_cast<std::size_t>(n));
    return d;
  }

  int fd() const { return fd_; }

 private:
  int fd_ = -1;
};

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// One query relayed to `dest` on a throwaway socket; nullopt on deadline.
inline std::optional<Bytes> forward_udp(const Endpoint& dest, ByteView query, double timeout_s) {
  try {
    UdpSocket s(0);
    s.send_to(dest, query);
    const auto start = std::chrono::steady_clock::now();
    while (seconds_since(start) < timeout_s) {
      if (auto d = s.recv(timeout_s - seconds_since(start))) return std::move(d->bytes);
    }
  } catch (const Error&) {
  }
  return std::nullopt;
}

inline const std::vector<std::string>& default_quotes() {
  static const std::vector<std::string> quotes = {
      "The best way out is always through.",
      "A ship in harbor is safe, but that is not what ships are built for.",
      "Simplicity is the ultimate sophistication.",
      "What we know is a drop; what we don't know is an ocean.",
      "The obstacle is the path.",
      "Well begun is half done.",
      "No wind favors one who has no destined port.",
      "Patience is bitter, but its fruit is sweet.",
  };
  return quotes;
}

struct BridgeConfig {
  session::ServerConfig server;
  std::string host = "127.0.0.1";
  std::uint16_t udp_port = 0;        // 0 picks an ephemeral port
  std::uint16_t tcp_port = 0;        // post-handshake listener
  bool decoy_http = false;           // fortune responder on its own port
  bool forward_unrelated = false;    // proxy names outside the domain upstream
  std::string resolver;              // host:port, required when forwarding
  std::string upstream;              // host:port data-phase target; empty = echo
  double forward_timeout_s = 2.0;
  std::uint64_t seed = 1;
};

// Server process in a box: DNS persona on UDP, handover listener on TCP, and
// an optional decoy HTTP responder, each on its own thread.
class Bridge {
 public:
  explicit Bridge(BridgeConfig cfg)
      : cfg_(std::move(cfg)),
        engine_(cfg_.server, cfg_.seed),
        udp_(cfg_.udp_port, cfg_.host),
        start_(std::chrono::steady_clock::now()) {
    if (cfg_.forward_unrelated && cfg_.resolver.empty()) {
      throw ConfigError("forwarding requires a resolver address");
    }
    tcp_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (tcp_fd_ < 0) throw BindFailure("tcp socket creation failed");
    const int one = 1;
    ::setsockopt(tcp_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    const Endpoint local = make_endpoint(cfg_.host, cfg_.tcp_port);
    if (::bind(tcp_fd_, reinterpret_cast<const sockaddr*>(&local.addr), sizeof(local.addr)) != 0 ||
        ::listen(tcp_fd_, 16) != 0) {
      ::close(tcp_fd_);
      throw BindFailure("tcp bind/listen failed: " + std::string(std::strerror(errno)));
    }
    sockaddr_in bound{};
    socklen_t blen = sizeof(bound);
    ::getsockname(tcp_fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
    tcp_port_ = ntohs(bound.sin_port);

    if (cfg_.decoy_http) start_decoy();
    udp_thread_ = std::thread([this] { udp_loop(); });
    tcp_thread_ = std::thread([this] { tcp_loop(); });
  }

  Bridge(const Bridge&) = delete;
  Bridge& operator=(const Bridge&) = delete;
  ~Bridge() { stop(); }

  void stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) return;
    if (decoy_server_) decoy_server_->stop();
    if (udp_thread_.joinable()) udp_thread_.join();
    if (tcp_thread_.joinable()) tcp_thread_.join();
    if (decoy_thread_.joinable()) decoy_thread_.join();
    {
      std::lock_guard<std::mutex> lk(conn_mutex_);
      for (auto& t : conn_threads_) {
        if (t.joinable()) t.join();
      }
      conn_threads_.clear();
    }
    if (tcp_fd_ >= 0) {
      ::close(tcp_fd_);
      tcp_fd_ = -1;
    }
  }

  std::uint16_t udp_port() const { return udp_.port(); }
  std::uint16_t tcp_port() const { return tcp_port_; }
  std::uint16_t decoy_port() const { return decoy_port_; }

  std::size_t accepts() const {
    std::lock_guard<std::mutex> lk(engine_mutex_);
    return engine_.accepts();
  }
  std::size_t rejects() const {
    std::lock_guard<std::mutex> lk(engine_mutex_);
    return engine_.rejects();
  }
  std::size_t session_count() const {
    std::lock_guard<std::mutex> lk(engine_mutex_);
    return engine_.session_count();
  }
  std::size_t handovers() const { return handovers_.load(); }

 private:
  void udp_loop() {
    while (!stopping_.load()) {
      const auto d = udp_.recv(0.1);
      const double now = seconds_since(start_);
      if (!d) {
        std::lock_guard<std::mutex> lk(engine_mutex_);
        engine_.on_tick(now);
        continue;
      }
      session::EngineReply reply;
      {
        std::lock_guard<std::mutex> lk(engine_mutex_);
        reply = engine_.on_datagram(now, view(d->bytes));
        engine_.on_tick(now);
      }
      if (!reply.under_domain && cfg_.forward_unrelated) {
        if (auto relayed = forward_udp(parse_hostport(cfg_.resolver), view(d->bytes),
                                       cfg_.forward_timeout_s)) {
          udp_.send_to(d->from, view(*relayed));
          continue;
        }
      }
      if (!reply.bytes.empty()) udp_.send_to(d->from, view(reply.bytes));
    }
  }

  void tcp_loop() {
    while (!stopping_.load()) {
      pollfd p{tcp_fd_, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0 || (p.revents & POLLIN) == 0) continue;
      const int conn = ::accept(tcp_fd_, nullptr, nullptr);
      if (conn < 0) continue;
      std::lock_guard<std::mutex> lk(conn_mutex_);
      conn_threads_.emplace_back([this, conn] {
        handle_connection(conn);
        ::close(conn);
      });
    }
  }

  bool read_exact(int fd, std::uint8_t* out, std::size_t n, double timeout_s) const {
    std::size_t got = 0;
    const auto start = std::chrono::steady_clock::now();
    while (got < n && !stopping_.load()) {
      if (seconds_since(start) > timeout_s) return false;
      pollfd p{fd, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0 || (p.revents & POLLIN) == 0) continue;
      const ssize_t r = ::read(fd, out + got, n - got);
      if (r <= 0) return false;
      got += static_cast<std::size_t>(r);
    }
    return got == n;
  }

  static bool write_all(int fd, ByteView bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t r = ::write(fd, bytes.data() + sent, bytes.size() - sent);
      if (r <= 0) return false;
      sent += static_cast<std::size_t>(r);
    }
    return true;
  }

  // Reads the opening frame and tries it against every session that finished
  // the handshake; the first key that authenticates it claims the connection.
  // Nothing is ever written on a connection that fails to authenticate.
  void handle_connection(int conn) {
    std::uint8_t hdr[2];
    if (!read_exact(conn, hdr, 2, 5.0)) return;
    const std::size_t n = (static_cast<std::size_t>(hdr[0]) << 8) | hdr[1];
    if (n < framing::kTagLen || n > framing::kMaxPlaintext + framing::kTagLen) return;
    Bytes first(2 + n);
    first[0] = hdr[0];
    first[1] = hdr[1];
    if (!read_exact(conn, first.data() + 2, n, 5.0)) return;

    std::vector<session::ServerEngine::HandoverCandidate> candidates;
    {
      std::lock_guard<std::mutex> lk(engine_mutex_);
      candidates = engine_.handover_candidates();
    }
    std::optional<inner::SessionKeys> keys;
    for (const auto& c : candidates) {
      const auto r = framing::open_frame(c.keys.c2s, 0, view(first));
      if (r.status == framing::FrameStatus::ok) {
        keys = c.keys;
        {
          std::lock_guard<std::mutex> lk(engine_mutex_);
          engine_.note_handover(c.session_id);
        }
        ++handovers_;
        framing::Opener opener(c.keys.c2s);
        opener.feed(view(first));
        const auto hello = opener.next();
        framing::Sealer sealer(c.keys.s2c);
        if (!write_all(conn, view(sealer.seal(view(hello.plain))))) return;
        serve_stream(conn, c.keys, std::move(opener), std::move(sealer));
        return;
      }
    }
  }

  void serve_stream(int conn, const inner::SessionKeys&, framing::Opener opener,
                    framing::Sealer sealer) {
    if (!cfg_.upstream.empty()) {
      pipe_upstream(conn, std::move(opener), std::move(sealer));
      return;
    }
    // Built-in service: echo each frame back under the other direction's key.
    Bytes chunk(16 * 1024);
    while (!stopping_.load()) {
      for (;;) {
        const auto r = opener.next();
        if (r.status == framing::FrameStatus::bad) return;
        if (r.status == framing::FrameStatus::need_more) break;
        if (!write_all(conn, view(sealer.seal(view(r.plain))))) return;
      }
      pollfd p{conn, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0 || (p.revents & POLLIN) == 0) continue;
      const ssize_t n = ::read(conn, chunk.data(), chunk.size());
      if (n <= 0) return;
      opener.feed(ByteView(chunk.data(), static_cast<std::size_t>(n)));
    }
  }

  void pipe_upstream(int conn, framing::Opener opener, framing::Sealer sealer) {
    const Endpoint up = parse_hostport(cfg_.upstream);
    const int us = ::socket(AF_INET, SOCK_STREAM, 0);
    if (us < 0) return;
    if (::connect(us, reinterpret_cast<const sockaddr*>(&up.addr), sizeof(up.addr)) != 0) {
      ::close(us);
      return;
    }
    Bytes chunk(16 * 1024);
    bool open = true;
    while (open && !stopping_.load()) {
      pollfd fds[2] = {{conn, POLLIN, 0}, {us, POLLIN, 0}};
      if (::poll(fds, 2, 100) <= 0) continue;
      if (fds[0].revents & (POLLIN | POLLHUP)) {
        const ssize_t n = ::read(conn, chunk.data(), chunk.size());
        if (n <= 0) break;
        opener.feed(ByteView(chunk.data(), static_cast<std::size_t>(n)));
        for (;;) {
          const auto r = opener.next();
          if (r.status == framing::FrameStatus::bad) {
            open = false;
            break;
          }
          if (r.status == framing::FrameStatus::need_more) break;
          if (!write_all(us, view(r.plain))) {
            open = false;
            break;
          }
        }
      }
      if (fds[1].revents & (POLLIN | POLLHUP)) {
        const ssize_t n = ::read(us, chunk.data(), chunk.size());
        if (n <= 0) break;
        std::size_t off = 0;
        while (off < static_cast<std::size_t>(n)) {
          const std::size_t take =
              std::min(framing::kMaxPlaintext, static_cast<std::size_t>(n) - off);
          if (!write_all(conn, view(sealer.seal(ByteView(chunk.data() + off, take))))) {
            open = false;
            break;
          }
          off += take;
        }
      }
    }
    ::close(us);
  }

  void start_decoy() {
    decoy_server_ = std::make_unique<httplib::Server>();
    decoy_server_->Get(".*", [this](const httplib::Request&, httplib::Response& res) {
      std::string quote;
      {
        std::lock_guard<std::mutex> lk(quote_mutex_);
        quote = default_quotes()[quote_rng_.uniform(
            0, static_cast<std::uint32_t>(default_quotes().size() - 1))];
      }
      res.set_content("<html><body><p>" + quote + "</p></body></html>", "text/html");
    });
    const int port = decoy_server_->bind_to_any_port(cfg_.host);
    if (port <= 0) throw BindFailure("decoy http bind failed");
    decoy_port_ = static_cast<std::uint16_t>(port);
    decoy_thread_ = std::thread([this] { decoy_server_->listen_after_bind(); });
    decoy_server_->wait_until_ready();
  }

  BridgeConfig cfg_;
  mutable std::mutex engine_mutex_;
  session::ServerEngine engine_;
  UdpSocket udp_;
  std::chrono::steady_clock::time_point start_;
  int tcp_fd_ = -1;
  std::uint16_t tcp_port_ = 0;
  std::uint16_t decoy_port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> handovers_{0};
  std::thread udp_thread_;
  std::thread tcp_thread_;
  std::thread decoy_thread_;
  std::unique_ptr<httplib::Server> decoy_server_;
  std::mutex conn_mutex_;
  std::vector<std::thread> conn_threads_;
  std::mutex quote_mutex_;
  Rng quote_rng_{0xDEC0F};
};

// Minimal recursive-resolver stand-in: queries under `forward_domain` are
// proxied to the bridge (addresses remembered by query ID), everything else is
// answered locally with a fixed address.
class StubResolver {
 public:
  struct Config {
    std::string forward_domain;
    std::string bridge;  // host:port; empty disables proxying
    std::uint32_t answer_ip = 0x01020304;
    std::uint32_t ttl = 300;
  };

  explicit StubResolver(Config cfg, std::uint16_t port = 0)
      : cfg_(std::move(cfg)), client_side_(port), bridge_side_(0) {
    thread_ = std::thread([this] { loop(); });
  }

  StubResolver(const StubResolver&) = delete;
  StubResolver& operator=(const StubResolver&) = delete;
  ~StubResolver() { stop(); }

  void stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) return;
    if (thread_.joinable()) thread_.join();
  }

  std::uint16_t port() const { return client_side_.port(); }
  std::size_t forwarded() const { return forwarded_.load(); }

 private:
  bool under_forward_domain(const dnswire::QueryView& q) const {
    const auto domain = dnswire::detail::split_name(dnswire::lower_name(cfg_.forward_domain));
    if (q.labels.size() < domain.size()) return false;
    const std::size_t off = q.labels.size() - domain.size();
    for (std::size_t i = 0; i < domain.size(); ++i) {
      if (dnswire::lower_name(q.labels[off + i]) != domain[i]) return false;
    }
    return true;
  }

  void loop() {
    std::optional<Endpoint> bridge;
    if (!cfg_.bridge.empty()) bridge = parse_hostport(cfg_.bridge);
    while (!stopping_.load()) {
      pollfd fds[2] = {{client_side_.fd(), POLLIN, 0}, {bridge_side_.fd(), POLLIN, 0}};
      if (::poll(fds, 2, 100) <= 0) continue;
      if (fds[0].revents & POLLIN) {
        if (const auto d = client_side_.recv(0)) {
          dnswire::QueryView q;
          bool parsed = true;
          try {
            q = dnswire::parse_query(view(d->bytes));
          } catch (const Error&) {
            parsed = false;
          }
          if (parsed && q.well_formed && bridge && under_forward_domain(q)) {
            pending_[q.qid] = d->from;
            bridge_side_.send_to(*bridge, view(d->bytes));
            ++forwarded_;
          } else if (parsed && q.well_formed) {
            const Bytes answer =
                q.qtype == dnswire::kTypeA
                    ? dnswire::build_ack_response(q, cfg_.answer_ip, cfg_.ttl)
                    : dnswire::build_empty_response(q, dnswire::kRcodeNoError);
            client_side_.send_to(d->from, view(answer));
          } else if (parsed) {
            client_side_.send_to(d->from,
                                 view(dnswire::build_error_response(q.qid, dnswire::kRcodeFormErr)));
          }
        }
      }
      if (fds[1].revents & POLLIN) {
        if (const auto d = bridge_side_.recv(0)) {
          if (d->bytes.size() >= 2) {
            const auto qid = static_cast<std::uint16_t>((d->bytes[0] << 8) | d->bytes[1]);
            const auto it = pending_.find(qid);
            if (it != pending_.end()) {
              client_side_.send_to(it->second, view(d->bytes));
              pending_.erase(it);
            }
          }
        }
      }
    }
  }

  Config cfg_;
  UdpSocket client_side_;
  UdpSocket bridge_side_;
  std::map<std::uint16_t, Endpoint> pending_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> forwarded_{0};
  std::thread thread_;
};

struct HandshakeOutcome {
  bool success = false;
  std::string failure;
  inner::SessionKeys keys{};
  std::uint8_t session_id = 0;
  session::ClientStats stats;
  double elapsed_s = 0;
};

// Drives one client handshake over a real UDP socket against `dest`.
inline HandshakeOutcome run_client_handshake(const session::ClientConfig& cfg,
                                             const Endpoint& dest, std::uint64_t seed,
                                             double give_up_s = 30.0) {
  HandshakeOutcome out;
  UdpSocket sock(0);
  session::ClientSession client(cfg, seed);
  const auto start = std::chrono::steady_clock::now();
  client.start(0);
  for (auto& wire : client.take_outputs()) sock.send_to(dest, view(wire));
  while (!client.finished()) {
    const double now = seconds_since(start);
    if (now > give_up_s) {
      out.failure = "gave up after " + std::to_string(give_up_s) + " s";
      break;
    }
    double wait = 0.1;
    if (const auto dl = client.next_deadline()) wait = std::max(0.0, *dl - now);
    if (const auto d = sock.recv(std::min(wait, 0.25))) {
      client.on_datagram(seconds_since(start), view(d->bytes));
    } else {
      client.on_tick(seconds_since(start));
    }
    for (auto& wire : client.take_outputs()) sock.send_to(dest, view(wire));
  }
  out.elapsed_s = seconds_since(start);
  out.stats = client.stats();
  out.session_id = client.session_id();
  if (client.phase() == session::ClientSession::Phase::done) {
    out.success = true;
    out.keys = client.keys();
  } else if (out.failure.empty()) {
    out.failure = client.failure();
  }
  return out;
}

// Client end of the post-handshake TCP stream. The constructor performs the
// binding round trip: first frame out under the client key, echo back under
// the server key.
class TcpTunnel {
 public:
  TcpTunnel(const Endpoint& dest, const inner::SessionKeys& keys, double timeout_s = 5.0)
      : sealer_(keys.c2s), opener_(keys.s2c) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw BindFailure("tcp socket creation failed");
    if (::connect(fd_, reinterpret_cast<const sockaddr*>(&dest.addr), sizeof(dest.addr)) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw HandoverTimeout("connect failed: " + std::string(std::strerror(errno)));
    }
    const Bytes hello = crypto::os_random(16);
    send(view(hello));
    const auto echoed = recv(timeout_s);
    if (!echoed || *echoed != hello) {
      close();
      throw HandoverTimeout("server did not confirm the session key");
    }
  }

  TcpTunnel(const TcpTunnel&) = delete;
  TcpTunnel& operator=(const TcpTunnel&) = delete;
  ~TcpTunnel() { close(); }

  void send(ByteView plain) {
    const Bytes frame = sealer_.seal(plain);
    std::size_t sent = 0;
    while (sent < frame.size()) {
      const ssize_t r = ::write(fd_, frame.data() + sent, frame.size() - sent);
      if (r <= 0) throw HandoverTimeout("tcp write failed");
      sent += static_cast<std::size_t>(r);
    }
  }

  std::optional<Bytes> recv(double timeout_s) {
    const auto start = std::chrono::steady_clock::now();
    Bytes chunk(16 * 1024);
    for (;;) {
      const auto r = opener_.next();
      if (r.status == framing::FrameStatus::ok) return r.plain;
      if (r.status == framing::FrameStatus::bad) return std::nullopt;
      if (seconds_since(start) > timeout_s) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0 || (p.revents & POLLIN) == 0) continue;
      const ssize_t n = ::read(fd_, chunk.data(), chunk.size());
      if (n <= 0) return std::nullopt;
      opener_.feed(ByteView(chunk.data(), static_cast<std::size_t>(n)));
    }
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

  int fd() const { return fd_; }

 private:
  int fd_ = -1;
  framing::Sealer sealer_;
  framing::Opener opener_;
};

}  // namespace dnsmorph::runtime
