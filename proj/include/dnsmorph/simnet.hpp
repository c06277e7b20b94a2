#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/crypto.hpp"
#include "dnsmorph/dns_wire.hpp"
#include "dnsmorph/errors.hpp"
#include "dnsmorph/session.hpp"

namespace dnsmorph::simnet {

// Network impairments and middlebox behaviors applied between the endpoints.
// The same seed and profile always reproduce the same transcript.
struct NetProfile {
  double latency_s = 0.02;
  double jitter_s = 0.01;
  double drop_p = 0;
  double dup_p = 0;
  double reorder_p = 0;  // chance of an extra delay spike, overtaking later datagrams
  bool case_flip = false;
  double flip_char_p = 0.5;
  bool inject_random = false;
  double inject_p = 0.25;
  bool replay_capture = false;
  double replay_p = 0.25;
};

// One emitted datagram. C = client, S = server, I = adversary injection,
// R = adversary replay.
struct TranscriptEntry {
  double t = 0;
  char dir = '?';
  int attempt = 1;
  Bytes bytes;
};

inline std::string transcript_ndjson(const std::vector<TranscriptEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::json j;
    j["t"] = e.t;
    j["dir"] = std::string(1, e.dir);
    j["bytes_hex"] = hex(view(e.bytes));
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

inline std::string transcript_hash(const std::vector<TranscriptEntry>& entries) {
  const std::string nd = transcript_ndjson(entries);
  const auto digest = crypto::sha256(view(to_bytes(nd)));
  return hex(ByteView(digest.data(), digest.size()));
}

// Structural sanity of a finished run: client datagrams must be queries with
// protocol-sized labels under some domain, and every server datagram must be a
// response whose query ID was seen in an earlier query. Returns human-readable
// problems, empty when clean.
inline std::vector<std::string> verify_transcript(const std::vector<TranscriptEntry>& entries) {
  std::vector<std::string> problems;
  std::vector<bool> qid_seen(65536, false);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string at = " (entry " + std::to_string(i) + ")";
    if (e.dir == 'C') {
      try {
        const auto q = dnswire::parse_query(view(e.bytes));
        if (!q.well_formed) {
          problems.push_back("client datagram is not a plain query" + at);
          continue;
        }
        const std::size_t n = q.first_label().size();
        if (n < session::kMinPayloadLabel || n > session::kMaxPayloadLabel) {
          problems.push_back("client label length " + std::to_string(n) + " out of range" + at);
        }
        qid_seen[q.qid] = true;
      } catch (const Error& err) {
        problems.push_back(std::string("client datagram unparseable: ") + err.what() + at);
      }
    } else if (e.dir == 'S') {
      if (e.bytes.size() < 12 || (e.bytes[2] & 0x80) == 0) {
        problems.push_back("server datagram is not a response" + at);
        continue;
      }
      const auto qid = static_cast<std::uint16_t>((e.bytes[0] << 8) | e.bytes[1]);
      if (!qid_seen[qid]) {
        problems.push_back("server response qid " + std::to_string(qid) +
                           " precedes any matching query" + at);
      }
    } else if (e.dir == 'I' || e.dir == 'R') {
      if (e.bytes.size() >= 2) {
        qid_seen[static_cast<std::uint16_t>((e.bytes[0] << 8) | e.bytes[1])] = true;
      }
    }
  }
  return problems;
}

// Deterministic event-driven network joining client sessions to one server
// engine. Virtual time; every emission is recorded before impairment.
class Simulator {
 public:
  Simulator(session::ServerEngine& engine, NetProfile profile, std::uint64_t seed,
            double start_time = 0, int attempt_tag = 1)
      : engine_(engine), profile_(profile), rng_(seed), now_(start_time), attempt_(attempt_tag) {}

  void run_clients(const std::vector<session::ClientSession*>& clients) {
    clients_ = clients;
    client_capture_.assign(clients_.size(), {});
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      clients_[i]->start(now_);
      drain(i);
    }
    while (!all_finished()) {
      double next = std::numeric_limits<double>::infinity();
      if (!queue_.empty()) next = queue_.top().t;
      for (const auto* c : clients_) {
        if (c->finished()) continue;
        if (const auto dl = c->next_deadline()) next = std::min(next, *dl);
      }
      if (next == std::numeric_limits<double>::infinity()) break;  // nothing left to happen
      now_ = std::max(now_, next);
      while (!queue_.empty() && queue_.top().t <= now_ + 1e-12) {
        const Delivery d = queue_.top();
        queue_.pop();
        deliver(d);
      }
      for (std::size_t i = 0; i < clients_.size(); ++i) {
        if (clients_[i]->finished()) continue;
        if (const auto dl = clients_[i]->next_deadline(); dl && *dl <= now_ + 1e-12) {
          clients_[i]->on_tick(now_);
          drain(i);
        }
      }
      engine_.on_tick(now_);
    }
  }

  void run_client(session::ClientSession& client) { run_clients({&client}); }

  double now() const { return now_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  std::vector<TranscriptEntry> take_transcript() { return std::exchange(transcript_, {}); }

 private:
  struct Delivery {
    double t = 0;
    std::uint64_t seq = 0;
    int dest = -1;    // -1 = server, otherwise client index
    int origin = -1;  // client whose address the datagram claims to come from
    Bytes bytes;
    bool operator>(const Delivery& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
  };

  bool all_finished() const {
    for (const auto* c : clients_) {
      if (!c->finished()) return false;
    }
    return true;
  }

  void drain(std::size_t i) {
    for (auto& wire : clients_[i]->take_outputs()) {
      transcript_.push_back({now_, 'C', attempt_, wire});
      impair_and_schedule(-1, static_cast<int>(i), std::move(wire));
    }
  }

  void impair_and_schedule(int dest, int origin, Bytes bytes) {
    if (rng_.unit() < profile_.drop_p) return;
    if (profile_.case_flip) flip_case(bytes);
    schedule(dest, origin, bytes, delay());
    if (rng_.unit() < profile_.dup_p) schedule(dest, origin, bytes, delay() + 0.001);
  }

  double delay() {
    double d = profile_.latency_s + profile_.jitter_s * rng_.unit();
    if (profile_.reorder_p > 0 && rng_.unit() < profile_.reorder_p) d += 3 * profile_.latency_s;
    return d;
  }

  void schedule(int dest, int origin, Bytes bytes, double after) {
    queue_.push(Delivery{now_ + after, seq_++, dest, origin, std::move(bytes)});
  }

  void flip_case(Bytes& msg) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    try {
      ranges = dnswire::label_byte_ranges(view(msg));
    } catch (const Error&) {
      return;  // not DNS-shaped; nothing a case-flipping resolver would touch
    }
    for (const auto& [begin, end] : ranges) {
      for (std::size_t i = begin; i < end; ++i) {
        const char c = static_cast<char>(msg[i]);
        const bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        if (alpha && rng_.unit() < profile_.flip_char_p) {
          msg[i] = static_cast<std::uint8_t>(c ^ 0x20);
        }
      }
    }
  }

  void deliver(const Delivery& d) {
    if (d.dest < 0) {
      server_capture_.push_back(d.bytes);
      const auto reply = engine_.on_datagram(now_, view(d.bytes));
      if (!reply.bytes.empty()) {
        transcript_.push_back({now_, 'S', attempt_, reply.bytes});
        if (d.origin >= 0) impair_and_schedule(d.origin, d.origin, reply.bytes);
      }
    } else {
      const auto i = static_cast<std::size_t>(d.dest);
      client_capture_[i].push_back(d.bytes);
      clients_[i]->on_datagram(now_, view(d.bytes));
      drain(i);
    }
    adversary_turn();
  }

  void adversary_turn() {
    if (profile_.inject_random && rng_.unit() < profile_.inject_p) inject_once();
    if (profile_.replay_capture && rng_.unit() < profile_.replay_p) replay_once();
  }

  void inject_once() {
    const int victim = clients_.empty() ? -1 : static_cast<int>(rng_.uniform(
                                                  0, static_cast<std::uint32_t>(clients_.size() - 1)));
    Bytes forged;
    switch (rng_.uniform(0, 3)) {
      case 0:  // arbitrary bytes at the server
        forged = rng_.bytes(rng_.uniform(4, 96));
        break;
      case 1: {  // protocol-shaped query with a made-up label
        std::string label(5 + rng_.uniform(1, 50), '\0');
        for (char& c : label) c = codec::kAlphabet[rng_.uniform(0, 31)];
        forged = dnswire::build_query(static_cast<std::uint16_t>(rng_.uniform(0, 0xFFFF)), label,
                                      domain_guess());
        break;
      }
      case 2: {  // forged response to the victim under a random query ID
        if (victim < 0) return;
        std::string label(5 + rng_.uniform(1, 50), '\0');
        for (char& c : label) c = codec::kAlphabet[rng_.uniform(0, 31)];
        const Bytes q = dnswire::build_query(static_cast<std::uint16_t>(rng_.uniform(0, 0xFFFF)),
                                             label, domain_guess());
        forged = dnswire::build_ack_response(dnswire::parse_query(view(q)), rng_.uniform(1, 0xFFFFFFFF),
                                             60);
        transcript_.push_back({now_, 'I', attempt_, forged});
        schedule(victim, victim, forged, delay());
        return;
      }
      case 3: {  // replayed query shell with a fresh random label, old query ID
        if (server_capture_.empty()) return;
        const Bytes& past = server_capture_[rng_.uniform(
            0, static_cast<std::uint32_t>(server_capture_.size() - 1))];
        forged = past;
        if (forged.size() >= 2) {
          forged[0] = static_cast<std::uint8_t>(rng_.uniform(0, 255));
        }
        break;
      }
    }
    transcript_.push_back({now_, 'I', attempt_, forged});
    schedule(-1, victim, forged, delay());
  }

  void replay_once() {
    const bool to_server = !server_capture_.empty() &&
                           (client_capture_.empty() || clients_.empty() || rng_.unit() < 0.5);
    if (to_server) {
      const Bytes& past =
          server_capture_[rng_.uniform(0, static_cast<std::uint32_t>(server_capture_.size() - 1))];
      transcript_.push_back({now_, 'R', attempt_, past});
      const int victim = clients_.empty() ? -1 : static_cast<int>(rng_.uniform(
                                                    0, static_cast<std::uint32_t>(clients_.size() - 1)));
      schedule(-1, victim, past, delay());
      return;
    }
    for (std::size_t i = 0; i < client_capture_.size(); ++i) {
      const auto idx = (i + rng_.uniform(0, static_cast<std::uint32_t>(client_capture_.size() - 1))) %
                       client_capture_.size();
      if (client_capture_[idx].empty()) continue;
      const Bytes& past = client_capture_[idx][rng_.uniform(
          0, static_cast<std::uint32_t>(client_capture_[idx].size() - 1))];
      transcript_.push_back({now_, 'R', attempt_, past});
      schedule(static_cast<int>(idx), static_cast<int>(idx), past, delay());
      return;
    }
  }

  std::string domain_guess() const { return engine_.config().domain; }

  session::ServerEngine& engine_;
  NetProfile profile_;
  Rng rng_;
  double now_;
  int attempt_;
  std::uint64_t seq_ = 0;
  std::vector<session::ClientSession*> clients_;
  std::priority_queue<Delivery, std::vector<Delivery>, std::greater<>> queue_;
  std::vector<TranscriptEntry> transcript_;
  std::vector<Bytes> server_capture_;
  std::vector<std::vector<Bytes>> client_capture_;
};

struct ScenarioResult {
  bool success = false;
  bool keys_match = false;
  int attempts_used = 0;
  std::string failure;
  std::uint8_t session_id = 0;
  session::ClientStats client_stats;
  std::size_t client_datagrams = 0;
  std::size_t server_datagrams = 0;
  std::size_t total_datagrams = 0;
  std::size_t client_bytes = 0;
  std::size_t server_bytes = 0;
  std::size_t total_bytes = 0;
  double duration_s = 0;
  std::vector<TranscriptEntry> transcript;
  std::vector<std::string> transcript_problems;
};

inline bool keys_equal(const inner::SessionKeys& a, const inner::SessionKeys& b) {
  return a.c2s == b.c2s && a.s2c == b.s2c;
}

// Runs up to `attempts` handshakes against the shared engine, each with a
// fresh client session, until one succeeds. The engine keeps its state across
// attempts, the way a long-running bridge would.
inline ScenarioResult run_scenario(const session::ClientConfig& client_cfg,
                                   session::ServerEngine& engine, const NetProfile& profile,
                                   std::uint64_t seed, int attempts = 1) {
  ScenarioResult res;
  double start = 0;
  for (int a = 1; a <= attempts; ++a) {
    session::ClientSession client(client_cfg, mix_seed(seed, static_cast<std::uint64_t>(a)));
    Simulator sim(engine, profile, mix_seed(seed, 1000 + static_cast<std::uint64_t>(a)), start, a);
    sim.run_client(client);
    res.attempts_used = a;
    auto part = sim.take_transcript();
    res.transcript.insert(res.transcript.end(), part.begin(), part.end());
    res.client_stats = client.stats();
    res.session_id = client.session_id();
    res.failure = client.failure();
    res.duration_s = sim.now();
    if (client.phase() == session::ClientSession::Phase::done) {
      res.success = true;
      if (const auto server_keys = engine.session_keys(client.session_id())) {
        res.keys_match = keys_equal(*server_keys, client.keys());
      }
      break;
    }
    start = sim.now() + 0.5;
  }
  for (const auto& e : res.transcript) {
    if (e.dir == 'C') {
      ++res.client_datagrams;
      res.client_bytes += e.bytes.size();
    } else if (e.dir == 'S') {
      ++res.server_datagrams;
      res.server_bytes += e.bytes.size();
    }
  }
  res.total_datagrams = res.client_datagrams + res.server_datagrams;
  res.total_bytes = res.client_bytes + res.server_bytes;
  res.transcript_problems = verify_transcript(res.transcript);
  return res;
}

inline ScenarioResult run_scenario(const session::ClientConfig& client_cfg,
                                   const session::ServerConfig& server_cfg,
                                   const NetProfile& profile, std::uint64_t seed,
                                   int attempts = 1) {
  session::ServerEngine engine(server_cfg, mix_seed(seed, 0x5eed));
  return run_scenario(client_cfg, engine, profile, seed, attempts);
}

enum class ProbeKind { random, replay, dig };

struct ProbeReport {
  std::size_t probes = 0;
  std::size_t well_formed_answers = 0;
  bool handshake_completed = false;
  bool password_independent = true;
  bool responsive_after = false;
};

namespace detail {

inline bool well_formed_answer(ByteView resp, std::uint16_t expect_qid) {
  if (resp.size() < 12) return false;
  const auto qid = static_cast<std::uint16_t>((resp[0] << 8) | resp[1]);
  return qid == expect_qid && (resp[2] & 0x80) != 0;
}

inline std::uint16_t leading_qid(ByteView dgram) {
  if (dgram.size() >= 2) return static_cast<std::uint16_t>((dgram[0] << 8) | dgram[1]);
  if (dgram.size() == 1) return static_cast<std::uint16_t>(dgram[0] << 8);
  return 0;
}

}  // namespace detail

// Feeds password-less probes to a fresh server and to a twin configured with a
// different password, checking that both answer every probe identically, that
// no probe completes the inner handshake, and that an honest client still gets
// through afterwards.
inline ProbeReport probe_driver(const session::ServerConfig& server_cfg, ProbeKind kind,
                                std::size_t n, std::uint64_t seed) {
  ProbeReport report;
  session::ServerEngine real_engine(server_cfg, mix_seed(seed, 1));
  session::ServerConfig twin_cfg = server_cfg;
  twin_cfg.password += "-different-secret";
  session::ServerEngine twin_engine(twin_cfg, mix_seed(seed, 1));
  Rng rng(mix_seed(seed, 2));

  std::vector<Bytes> probes;
  probes.reserve(n);
  if (kind == ProbeKind::random) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 2 == 0) {
        probes.push_back(rng.bytes(rng.uniform(1, 128)));
      } else {
        std::string label(5 + rng.uniform(1, 50), '\0');
        for (char& c : label) c = codec::kAlphabet[rng.uniform(0, 31)];
        probes.push_back(dnswire::build_query(static_cast<std::uint16_t>(rng.uniform(0, 0xFFFF)),
                                              label, server_cfg.domain));
      }
    }
  } else if (kind == ProbeKind::dig) {
    const std::vector<std::string> names = {"www.example.com", "mail.example.org",
                                            "cdn.images.example.net"};
    for (std::size_t i = 0; i < n; ++i) {
      const auto qid = static_cast<std::uint16_t>(rng.uniform(0, 0xFFFF));
      if (i % 4 == 3) {
        Bytes q = dnswire::build_query(qid, "www", server_cfg.domain);
        q[q.size() - 3] = 16;  // qtype low byte: TXT instead of A
        probes.push_back(std::move(q));
      } else {
        const auto& name = names[i % names.size()];
        const auto dot = name.find('.');
        probes.push_back(dnswire::build_query(qid, name.substr(0, dot), name.substr(dot + 1)));
      }
    }
  } else {
    // Capture an honest handshake against the real server, then replay every
    // client datagram from it.
    session::ClientConfig ccfg;
    ccfg.password = server_cfg.password;
    ccfg.domain = server_cfg.domain;
    ccfg.pad_max = server_cfg.pad_max;
    const auto honest = run_scenario(ccfg, real_engine, NetProfile{}, mix_seed(seed, 3), 1);
    std::vector<Bytes> captured;
    for (const auto& e : honest.transcript) {
      if (e.dir == 'C') captured.push_back(e.bytes);
    }
    for (std::size_t i = 0; i < n && !captured.empty(); ++i) {
      probes.push_back(captured[i % captured.size()]);
    }
  }

  const std::size_t accepted_before = real_engine.accepts();
  double now = 1000.0;
  for (const auto& probe : probes) {
    const auto real_reply = real_engine.on_datagram(now, view(probe));
    const auto twin_reply = twin_engine.on_datagram(now, view(probe));
    ++report.probes;
    if (detail::well_formed_answer(view(real_reply.bytes), detail::leading_qid(view(probe)))) {
      ++report.well_formed_answers;
    }
    // Replaying a served dummy legitimately re-yields the cached answer (loss
    // recovery), which only the engine holding that session can produce, so
    // byte-for-byte twin equality applies to fabricated probes only.
    if (kind != ProbeKind::replay) {
      if (real_reply.bytes != twin_reply.bytes) report.password_independent = false;
    } else if (!detail::well_formed_answer(view(twin_reply.bytes),
                                           detail::leading_qid(view(probe)))) {
      report.password_independent = false;
    }
    now += 0.01;
  }
  report.handshake_completed = real_engine.accepts() > accepted_before;

  session::ClientConfig after;
  after.password = server_cfg.password;
  after.domain = server_cfg.domain;
  after.pad_max = server_cfg.pad_max;
  const auto post = run_scenario(after, real_engine, NetProfile{}, mix_seed(seed, 4), 1);
  report.responsive_after = post.success && post.keys_match;
  return report;
}

}  // namespace dnsmorph::simnet
