#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <set>
#include <string>

#include <httplib.h>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/dns_wire.hpp"
#include "dnsmorph/errors.hpp"
#include "dnsmorph/runtime.hpp"
#include "dnsmorph/session.hpp"

using dnsmorph::Bytes;
using dnsmorph::Rng;
using dnsmorph::view;
namespace dnswire = dnsmorph::dnswire;
namespace rt = dnsmorph::runtime;
namespace sess = dnsmorph::session;

namespace {

constexpr const char* kPassword = "loopback secret";
constexpr const char* kDomain = "bridge.example";
constexpr std::uint32_t kDecoyIp = 0xCB007107;

sess::ClientConfig client_cfg() {
  sess::ClientConfig cfg;
  cfg.password = kPassword;
  cfg.domain = kDomain;
  return cfg;
}

rt::BridgeConfig bridge_cfg() {
  rt::BridgeConfig cfg;
  cfg.server.password = kPassword;
  cfg.server.domain = kDomain;
  return cfg;
}

rt::Endpoint loopback(std::uint16_t port) { return rt::make_endpoint("127.0.0.1", port); }

// One blocking query/response exchange against a UDP responder.
std::optional<Bytes> ask(const rt::Endpoint& dest, const Bytes& query, double timeout_s = 2.0) {
  rt::UdpSocket sock(0);
  sock.send_to(dest, view(query));
  const auto start = std::chrono::steady_clock::now();
  while (rt::seconds_since(start) < timeout_s) {
    if (auto d = sock.recv(timeout_s - rt::seconds_since(start))) return std::move(d->bytes);
  }
  return std::nullopt;
}

dnsmorph::inner::SessionKeys garbage_keys(std::uint64_t seed) {
  Rng rng(seed);
  dnsmorph::inner::SessionKeys keys;
  for (auto& b : keys.c2s) b = static_cast<std::uint8_t>(rng.uniform(0, 255));
  for (auto& b : keys.s2c) b = static_cast<std::uint8_t>(rng.uniform(0, 255));
  return keys;
}

Bytes random_payload(Rng& rng, std::size_t n) {
  Bytes out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.uniform(0, 255));
  return out;
}

}  // namespace

TEST_CASE("endpoint helpers parse and validate addresses") {
  const auto e = rt::parse_hostport("127.0.0.1:5353");
  CHECK(ntohs(e.addr.sin_port) == 5353);
  CHECK(e.addr.sin_family == AF_INET);

  CHECK_THROWS_AS(rt::parse_hostport("127.0.0.1"), dnsmorph::ConfigError);
  CHECK_THROWS_AS(rt::parse_hostport("127.0.0.1:"), dnsmorph::ConfigError);
  CHECK_THROWS_AS(rt::parse_hostport("127.0.0.1:port"), dnsmorph::ConfigError);
  CHECK_THROWS_AS(rt::parse_hostport("127.0.0.1:0"), dnsmorph::ConfigError);
  CHECK_THROWS_AS(rt::parse_hostport("127.0.0.1:70000"), dnsmorph::ConfigError);
  CHECK_THROWS_AS(rt::make_endpoint("not-an-ip", 53), dnsmorph::ConfigError);
  CHECK_THROWS_AS(rt::make_endpoint("256.0.0.1", 53), dnsmorph::ConfigError);
}

TEST_CASE("bridge answers plain lookups with the decoy address") {
  rt::Bridge bridge(bridge_cfg());

  SECTION("name outside the served domain") {
    const Bytes q = dnswire::build_query(0x4242, "www", "example.com");
    const auto reply = ask(loopback(bridge.udp_port()), q);
    REQUIRE(reply.has_value());
    const auto r = dnswire::parse_response(view(*reply));
    CHECK(r.qid == 0x4242);
    CHECK(r.kind == dnswire::ResponseKind::ack);
    CHECK(r.a_addr == kDecoyIp);
    CHECK(r.qname_lower == "www.example.com");
  }

  SECTION("short label under the served domain") {
    const Bytes q = dnswire::build_query(0x0703, "www", kDomain);
    const auto reply = ask(loopback(bridge.udp_port()), q);
    REQUIRE(reply.has_value());
    const auto r = dnswire::parse_response(view(*reply));
    CHECK(r.qid == 0x0703);
    CHECK(r.kind == dnswire::ResponseKind::ack);
    CHECK(r.a_addr == kDecoyIp);
  }

  CHECK(bridge.accepts() == 0);
  CHECK(bridge.handovers() == 0);
}

TEST_CASE("client handshake over loopback sockets") {
  rt::Bridge bridge(bridge_cfg());
  const auto out = rt::run_client_handshake(client_cfg(), loopback(bridge.udp_port()), 901);

  REQUIRE(out.success);
  CHECK(out.failure.empty());
  CHECK(bridge.accepts() == 1);
  CHECK(bridge.rejects() == 0);
  CHECK(bridge.session_count() == 1);
  CHECK(bridge.handovers() == 0);
  CHECK(out.stats.datagrams_sent > 0);
  CHECK(out.stats.bytes_sent > 0);
  CHECK(out.stats.datagrams_received == out.stats.datagrams_sent);
  CHECK(out.elapsed_s > 0.0);
  CHECK(out.keys.c2s != out.keys.s2c);
}

TEST_CASE("tcp handover echoes framed data") {
  rt::Bridge bridge(bridge_cfg());
  const auto out = rt::run_client_handshake(client_cfg(), loopback(bridge.udp_port()), 902);
  REQUIRE(out.success);

  // A connection that cannot authenticate gets nothing back, and the
  // session stays available for the real owner.
  CHECK_THROWS_AS(rt::TcpTunnel(loopback(bridge.tcp_port()), garbage_keys(77), 1.5),
                  dnsmorph::HandoverTimeout);
  CHECK(bridge.handovers() == 0);
  CHECK(bridge.session_count() == 1);

  {
    rt::TcpTunnel tunnel(loopback(bridge.tcp_port()), out.keys);
    CHECK(bridge.handovers() == 1);
    CHECK(bridge.session_count() == 0);

    Rng rng(903);
    for (int round = 0; round < 3; ++round) {
      const Bytes payload = random_payload(rng, 1024);
      tunnel.send(view(payload));
      const auto echoed = tunnel.recv(5.0);
      REQUIRE(echoed.has_value());
      CHECK(*echoed == payload);
    }
  }

  // The handover consumed the session, so the same keys cannot claim a
  // second connection.
  CHECK_THROWS_AS(rt::TcpTunnel(loopback(bridge.tcp_port()), out.keys, 1.5),
                  dnsmorph::HandoverTimeout);
  CHECK(bridge.handovers() == 1);
}

TEST_CASE("two sessions hand over independently") {
  rt::Bridge bridge(bridge_cfg());
  const auto first = rt::run_client_handshake(client_cfg(), loopback(bridge.udp_port()), 910);
  const auto second = rt::run_client_handshake(client_cfg(), loopback(bridge.udp_port()), 911);
  REQUIRE(first.success);
  REQUIRE(second.success);
  CHECK(bridge.accepts() == 2);
  CHECK(bridge.session_count() == 2);
  CHECK(first.keys != second.keys);

  Rng rng(912);
  for (const auto* out : {&second, &first}) {
    rt::TcpTunnel tunnel(loopback(bridge.tcp_port()), out->keys);
    const Bytes payload = random_payload(rng, 512);
    tunnel.send(view(payload));
    const auto echoed = tunnel.recv(5.0);
    REQUIRE(echoed.has_value());
    CHECK(*echoed == payload);
  }
  CHECK(bridge.handovers() == 2);
  CHECK(bridge.session_count() == 0);
}

TEST_CASE("decoy http serves rotating quotes") {
  auto cfg = bridge_cfg();
  cfg.decoy_http = true;
  rt::Bridge bridge(cfg);
  REQUIRE(bridge.decoy_port() != 0);

  httplib::Client http("127.0.0.1", bridge.decoy_port());
  std::set<std::string> bodies;
  for (int i = 0; i < 16; ++i) {
    const auto res = http.Get(i % 2 == 0 ? "/" : "/status/page");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body.find("<p>") != std::string::npos);
    bool known = false;
    for (const auto& quote : rt::default_quotes()) {
      if (res->body.find(quote) != std::string::npos) known = true;
    }
    CHECK(known);
    bodies.insert(res->body);
  }
  CHECK(bodies.size() >= 2);
}

TEST_CASE("unrelated names ride upstream when forwarding") {
  rt::StubResolver upstream({.forward_domain = kDomain, .bridge = "", .answer_ip = 0x01020304});
  auto cfg = bridge_cfg();
  cfg.forward_unrelated = true;
  cfg.resolver = "127.0.0.1:" + std::to_string(upstream.port());
  rt::Bridge bridge(cfg);

  const Bytes unrelated = dnswire::build_query(0x1111, "cdn", "example.net");
  const auto forwarded = ask(loopback(bridge.udp_port()), unrelated, 3.0);
  REQUIRE(forwarded.has_value());
  const auto fr = dnswire::parse_response(view(*forwarded));
  CHECK(fr.qid == 0x1111);
  CHECK(fr.kind == dnswire::ResponseKind::ack);
  CHECK(fr.a_addr == 0x01020304);

  // Names under the served domain never leave the bridge.
  const Bytes local = dnswire::build_query(0x2222, "www", kDomain);
  const auto answered = ask(loopback(bridge.udp_port()), local);
  REQUIRE(answered.has_value());
  const auto lr = dnswire::parse_response(view(*answered));
  CHECK(lr.qid == 0x2222);
  CHECK(lr.a_addr == kDecoyIp);
}

TEST_CASE("dead resolver falls back to the decoy answer") {
  std::uint16_t dead_port = 0;
  {
    rt::UdpSocket placeholder(0);
    dead_port = placeholder.port();
  }
  auto cfg = bridge_cfg();
  cfg.forward_unrelated = true;
  cfg.resolver = "127.0.0.1:" + std::to_string(dead_port);
  cfg.forward_timeout_s = 0.3;
  rt::Bridge bridge(cfg);

  const Bytes q = dnswire::build_query(0x3333, "api", "example.org");
  const auto start = std::chrono::steady_clock::now();
  const auto reply = ask(loopback(bridge.udp_port()), q, 3.0);
  REQUIRE(reply.has_value());
  CHECK(rt::seconds_since(start) >= 0.25);
  const auto r = dnswire::parse_response(view(*reply));
  CHECK(r.qid == 0x3333);
  CHECK(r.a_addr == kDecoyIp);
}

TEST_CASE("indirect handshake through a stub resolver") {
  rt::Bridge bridge(bridge_cfg());
  rt::StubResolver resolver(
      {.forward_domain = kDomain,
       .bridge = "127.0.0.1:" + std::to_string(bridge.udp_port())});

  const auto out = rt::run_client_handshake(client_cfg(), loopback(resolver.port()), 920);
  REQUIRE(out.success);
  CHECK(resolver.forwarded() > 0);
  CHECK(bridge.accepts() == 1);

  // The keys traveled client -> resolver -> bridge, so a direct tunnel
  // proves both ends derived the same secrets.
  rt::TcpTunnel tunnel(loopback(bridge.tcp_port()), out.keys);
  Rng rng(921);
  const Bytes payload = random_payload(rng, 2048);
  tunnel.send(view(payload));
  const auto echoed = tunnel.recv(5.0);
  REQUIRE(echoed.has_value());
  CHECK(*echoed == payload);

  // Unrelated lookups stay at the resolver and never reach the bridge.
  const Bytes other = dnswire::build_query(0x0DDD, "mail", "example.com");
  const auto local = ask(loopback(resolver.port()), other);
  REQUIRE(local.has_value());
  const auto lr = dnswire::parse_response(view(*local));
  CHECK(lr.a_addr == 0x01020304);
  CHECK(resolver.forwarded() == out.stats.datagrams_sent);
}

TEST_CASE("bind failures surface as errors") {
  rt::UdpSocket taken(0);
  CHECK_THROWS_AS(rt::UdpSocket(taken.port()), dnsmorph::BindFailure);

  auto cfg = bridge_cfg();
  cfg.udp_port = taken.port();
  CHECK_THROWS_AS(rt::Bridge(cfg), dnsmorph::BindFailure);

  auto bad = bridge_cfg();
  bad.forward_unrelated = true;
  CHECK_THROWS_AS(rt::Bridge(bad), dnsmorph::ConfigError);
}

TEST_CASE("forwarding to silence reports nothing") {
  std::uint16_t dead_port = 0;
  {
    rt::UdpSocket placeholder(0);
    dead_port = placeholder.port();
  }
  const Bytes q = dnswire::build_query(0x0001, "a", "example.com");
  CHECK_FALSE(rt::forward_udp(loopback(dead_port), view(q), 0.2).has_value());
}
