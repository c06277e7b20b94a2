#include <catch2/catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/crypto.hpp"
#include "dnsmorph/dns_wire.hpp"
#include "dnsmorph/session.hpp"
#include "dnsmorph/simnet.hpp"

using dnsmorph::Bytes;
using dnsmorph::from_hex;
using dnsmorph::view;
namespace dnswire = dnsmorph::dnswire;
namespace sess = dnsmorph::session;
namespace simnet = dnsmorph::simnet;

namespace {

constexpr const char* kPassword = "simulated secret";
constexpr const char* kDomain = "bridge.example";

sess::ClientConfig client_cfg() {
  sess::ClientConfig cfg;
  cfg.password = kPassword;
  cfg.domain = kDomain;
  return cfg;
}

sess::ServerConfig server_cfg() {
  sess::ServerConfig cfg;
  cfg.password = kPassword;
  cfg.domain = kDomain;
  return cfg;
}

}  // namespace

TEST_CASE("identical seeds reproduce identical transcripts") {
  const auto a = simnet::run_scenario(client_cfg(), server_cfg(), simnet::NetProfile{}, 42);
  const auto b = simnet::run_scenario(client_cfg(), server_cfg(), simnet::NetProfile{}, 42);
  const auto c = simnet::run_scenario(client_cfg(), server_cfg(), simnet::NetProfile{}, 43);
  REQUIRE(a.success);
  REQUIRE(b.success);
  REQUIRE(c.success);
  CHECK(simnet::transcript_hash(a.transcript) == simnet::transcript_hash(b.transcript));
  CHECK(simnet::transcript_hash(a.transcript) != simnet::transcript_hash(c.transcript));
}

TEST_CASE("a loss-free network completes in one attempt") {
  const auto res = simnet::run_scenario(client_cfg(), server_cfg(), simnet::NetProfile{}, 7);
  CHECK(res.success);
  CHECK(res.keys_match);
  CHECK(res.attempts_used == 1);
  CHECK(res.failure.empty());
  CHECK(res.transcript_problems.empty());
  CHECK(res.client_stats.retransmissions == 0);
  // Every query gets exactly one answer when nothing is lost or injected.
  CHECK(res.client_datagrams == res.server_datagrams);
  CHECK(res.total_datagrams == res.client_datagrams + res.server_datagrams);
  CHECK(res.total_bytes == res.client_bytes + res.server_bytes);
  CHECK(res.total_bytes > 0);
  CHECK(res.duration_s > 0);
}

TEST_CASE("round-trip time equals twice the one-way latency when jitter is off") {
  simnet::NetProfile profile;
  profile.latency_s = 0.05;
  profile.jitter_s = 0;
  const auto res = simnet::run_scenario(client_cfg(), server_cfg(), profile, 11);
  REQUIRE(res.success);
  REQUIRE(!res.client_stats.rtt_samples.empty());
  for (const double s : res.client_stats.rtt_samples) {
    CHECK(s == Catch::Approx(0.1).margin(1e-9));
  }
  CHECK(res.client_stats.final_rtt == Catch::Approx(0.1).margin(1e-9));
}

TEST_CASE("packet loss is survived by retrying") {
  simnet::NetProfile profile;
  profile.drop_p = 0.15;
  int with_retries = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto res = simnet::run_scenario(client_cfg(), server_cfg(), profile, seed, 4);
    REQUIRE(res.success);
    REQUIRE(res.keys_match);
    CHECK(res.transcript_problems.empty());
    if (res.attempts_used > 1 || res.client_stats.retransmissions > 0) ++with_retries;
  }
  // Fifteen percent loss cannot go unnoticed across thirty runs.
  CHECK(with_retries > 0);
}

TEST_CASE("full duplication changes nothing about the outcome") {
  simnet::NetProfile profile;
  profile.dup_p = 1.0;
  const auto res = simnet::run_scenario(client_cfg(), server_cfg(), profile, 13);
  CHECK(res.success);
  CHECK(res.keys_match);
  CHECK(res.transcript_problems.empty());
  // Duplicates arrive on top of the originals.
  CHECK(res.client_stats.datagrams_received > res.client_stats.datagrams_sent);
}

TEST_CASE("reordering spikes are survived") {
  simnet::NetProfile profile;
  profile.reorder_p = 0.5;
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto res = simnet::run_scenario(client_cfg(), server_cfg(), profile, seed, 3);
    CHECK(res.success);
    CHECK(res.keys_match);
  }
}

TEST_CASE("case-flipping resolvers cannot break the handshake") {
  simnet::NetProfile profile;
  profile.case_flip = true;
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    const auto res = simnet::run_scenario(client_cfg(), server_cfg(), profile, seed);
    REQUIRE(res.success);
    REQUIRE(res.keys_match);
    REQUIRE(res.transcript_problems.empty());
  }
}

TEST_CASE("injection and replay adversaries never corrupt a handshake") {
  simnet::NetProfile profile;
  profile.inject_random = true;
  profile.replay_capture = true;
  sess::ServerEngine engine(server_cfg(), 0xADBE);
  std::size_t injected = 0, replayed = 0, successes = 0;
  for (std::uint64_t seed = 200; seed < 250; ++seed) {
    const auto res = simnet::run_scenario(client_cfg(), engine, profile, seed, 3);
    REQUIRE(res.success);
    REQUIRE(res.keys_match);
    REQUIRE(res.transcript_problems.empty());
    ++successes;
    for (const auto& e : res.transcript) {
      if (e.dir == 'I') ++injected;
      if (e.dir == 'R') ++replayed;
    }
    // The session moves off the DNS path once established; idle junk from the
    // adversary ages out between runs.
    engine.note_handover(res.session_id);
    engine.on_tick(1e9 * static_cast<double>(seed));
  }
  CHECK(injected > 0);
  CHECK(replayed > 0);
  // Nothing the adversary sent ever produced a second accepted session.
  CHECK(engine.accepts() == successes);
}

TEST_CASE("transcripts serialize to one json object per line") {
  const auto res = simnet::run_scenario(client_cfg(), server_cfg(), simnet::NetProfile{}, 31);
  REQUIRE(res.success);
  const std::string nd = simnet::transcript_ndjson(res.transcript);

  std::istringstream in(nd);
  std::string line;
  std::size_t count = 0;
  double prev_t = -1;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    REQUIRE(j.contains("t"));
    REQUIRE(j.contains("dir"));
    REQUIRE(j.contains("bytes_hex"));
    const double t = j["t"].get<double>();
    CHECK(t >= prev_t);
    prev_t = t;
    const std::string dir = j["dir"].get<std::string>();
    CHECK((dir == "C" || dir == "S"));
    CHECK(from_hex(j["bytes_hex"].get<std::string>()) == res.transcript[count].bytes);
    ++count;
  }
  CHECK(count == res.transcript.size());

  const auto digest = dnsmorph::crypto::sha256(view(dnsmorph::to_bytes(nd)));
  CHECK(simnet::transcript_hash(res.transcript) ==
        dnsmorph::hex(dnsmorph::ByteView(digest.data(), digest.size())));
}

TEST_CASE("transcript verification flags structural violations") {
  using simnet::TranscriptEntry;

  SECTION("unparseable client datagram") {
    const std::vector<TranscriptEntry> t = {{0, 'C', 1, Bytes{0x01}}};
    const auto p = simnet::verify_transcript(t);
    REQUIRE(p.size() == 1);
    CHECK(p[0].find("unparseable") != std::string::npos);
  }
  SECTION("client datagram that is a response") {
    Bytes q = dnswire::build_query(1, "okpayload", kDomain);
    q[2] |= 0x80;
    const auto p = simnet::verify_transcript({{0, 'C', 1, q}});
    REQUIRE(p.size() == 1);
    CHECK(p[0].find("not a plain query") != std::string::npos);
  }
  SECTION("client label too short or too long") {
    const auto short_p =
        simnet::verify_transcript({{0, 'C', 1, dnswire::build_query(1, "abcd", kDomain)}});
    REQUIRE(short_p.size() == 1);
    CHECK(short_p[0].find("out of range") != std::string::npos);
    const auto long_p = simnet::verify_transcript(
        {{0, 'C', 1, dnswire::build_query(1, std::string(56, 'a'), kDomain)}});
    REQUIRE(long_p.size() == 1);
    CHECK(long_p[0].find("out of range") != std::string::npos);
  }
  SECTION("server response with no preceding query") {
    const auto p = simnet::verify_transcript(
        {{0, 'S', 1, dnswire::build_error_response(0x9999, dnswire::kRcodeNoError)}});
    REQUIRE(p.size() == 1);
    CHECK(p[0].find("precedes any matching query") != std::string::npos);
  }
  SECTION("server datagram that is a query") {
    const auto p =
        simnet::verify_transcript({{0, 'S', 1, dnswire::build_query(2, "labelpayload", kDomain)}});
    REQUIRE(p.size() == 1);
    CHECK(p[0].find("not a response") != std::string::npos);
  }
  SECTION("adversary entries register their query ids") {
    const Bytes inj = dnswire::build_query(0x4343, "injectedlabel", kDomain);
    const Bytes resp = dnswire::build_error_response(0x4343, dnswire::kRcodeNoError);
    CHECK(simnet::verify_transcript({{0, 'I', 1, inj}, {0.1, 'S', 1, resp}}).empty());
  }
}

TEST_CASE("random probes learn nothing and block nothing") {
  const auto report = simnet::probe_driver(server_cfg(), simnet::ProbeKind::random, 100, 1);
  CHECK(report.probes == 100);
  CHECK(report.well_formed_answers == 100);
  CHECK_FALSE(report.handshake_completed);
  CHECK(report.password_independent);
  CHECK(report.responsive_after);
}

TEST_CASE("plain resolver-style probes learn nothing") {
  const auto report = simnet::probe_driver(server_cfg(), simnet::ProbeKind::dig, 100, 2);
  CHECK(report.probes == 100);
  CHECK(report.well_formed_answers == 100);
  CHECK_FALSE(report.handshake_completed);
  CHECK(report.password_independent);
  CHECK(report.responsive_after);
}

TEST_CASE("replayed captures complete no second handshake") {
  const auto report = simnet::probe_driver(server_cfg(), simnet::ProbeKind::replay, 60, 3);
  CHECK(report.probes == 60);
  CHECK(report.well_formed_answers == 60);
  CHECK_FALSE(report.handshake_completed);
  CHECK(report.password_independent);
  CHECK(report.responsive_after);
}

TEST_CASE("several clients share one server engine") {
  sess::ServerEngine engine(server_cfg(), 500);
  sess::ClientSession c1(client_cfg(), 501);
  sess::ClientSession c2(client_cfg(), 502);
  sess::ClientSession c3(client_cfg(), 503);

  simnet::Simulator sim(engine, simnet::NetProfile{}, 504);
  sim.run_clients({&c1, &c2, &c3});

  std::set<std::uint8_t> sids;
  for (auto* c : {&c1, &c2, &c3}) {
    REQUIRE(c->phase() == sess::ClientSession::Phase::done);
    sids.insert(c->session_id());
    const auto keys = engine.session_keys(c->session_id());
    REQUIRE(keys.has_value());
    CHECK(*keys == c->keys());
  }
  // Distinct session ids: three concurrent handshakes, three sessions.
  CHECK(sids.size() == 3);
  CHECK(engine.accepts() == 3);
  CHECK(simnet::verify_transcript(sim.transcript()).empty());
}
