#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/codec.hpp"
#include "dnsmorph/dns_wire.hpp"
#include "dnsmorph/errors.hpp"
#include "dnsmorph/ident.hpp"
#include "dnsmorph/inner.hpp"
#include "dnsmorph/reliability.hpp"

namespace dnsmorph::session {

inline constexpr std::size_t kMinPayloadLabel = 6;   // 5-char prefix + at least 1 char
inline constexpr std::size_t kMaxPayloadLabel = 55;  // 5-char prefix + 50-char fragment
// How far an identity may stray from the already-buffered ones before the
// receiver refuses to buffer it. The send window is four deep, so honest
// identities can never be further than that apart; the slack absorbs nothing
// legitimate beyond it and keeps forged packets out of the buffer.
inline constexpr std::uint16_t kIdentityBand = 8;
// Room reserved between the identity counter's start value and 2^16 so data
// packets and dummies never wrap.
inline constexpr std::uint16_t kIdentityHeadroom = 4096;

inline void validate_domain(std::string_view domain) {
  if (domain.empty()) throw ConfigError("bridge domain must not be empty");
  const auto labels = dnswire::detail::split_name(domain);
  std::size_t wire = 1;
  for (const auto& l : labels) {
    if (l.empty() || l.size() > dnswire::kMaxLabel) {
      throw ConfigError("bridge domain label length invalid: '" + l + "'");
    }
    if (l.front() == '-' || l.back() == '-') {
      throw ConfigError("bridge domain label may not start or end with '-': '" + l + "'");
    }
    for (char c : l) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '-';
      if (!ok) throw ConfigError("bridge domain contains invalid character");
    }
    wire += l.size() + 1;
  }
  if (1 + kMaxPayloadLabel + wire > dnswire::kMaxName) {
    throw ConfigError("bridge domain too long for a 55-octet payload label");
  }
}

struct ClientConfig {
  std::string password;
  std::string domain;
  std::size_t pad_max = 100;
  double timeout_k = 2.0;
  double initial_timeout_s = 1.0;
  inner::MockConfig inner_cfg;  // pad_max is taken from `pad_max`
};

struct ClientStats {
  std::size_t datagrams_sent = 0;
  std::size_t datagrams_received = 0;
  std::size_t bytes_sent = 0;
  std::size_t bytes_received = 0;
  std::size_t retransmissions = 0;
  std::size_t data_packets = 0;
  std::size_t dummy_packets = 0;
  int dummy_max_transmissions = 0;
  std::size_t max_window_outstanding = 0;
  std::vector<double> rtt_samples;
  double final_rtt = 0;
};

// Client half of the handshake, driven entirely by injected datagrams and
// clock readings; emitted datagrams accumulate until taken. One instance is
// one attempt: a failed handshake is retried with a fresh instance.
class ClientSession {
 public:
  enum class Phase { idle, client_send, client_receive, done, failed };

  ClientSession(ClientConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        rng_(seed),
        inner_(cfg_.password, make_inner_cfg(cfg_), rng_) {
    validate_domain(cfg_.domain);
    domain_lower_ =
        dnswire::lower_name(dnswire::detail::join_labels(dnswire::detail::split_name(cfg_.domain)));
  }

  void start(double now) {
    const Bytes first = inner_.client_first();
    const std::string encoded = codec::encode_b32(view(first));
    if (encoded.size() + kIdentityHeadroom > 0xFFFF) {
      throw ConfigError("handshake message too long for the identity space");
    }
    total_chars_ = static_cast<std::uint16_t>(encoded.size());
    fragments_ = codec::fragment(encoded, rng_);
    session_id_ = static_cast<std::uint8_t>(rng_.uniform(0, 255));
    phase_ = Phase::client_send;
    fill_window(now);
  }

  void on_datagram(double now, ByteView dgram) {
    if (phase_ != Phase::client_send && phase_ != Phase::client_receive) return;
    ++stats_.datagrams_received;
    stats_.bytes_received += dgram.size();
    dnswire::ResponseView r;
    try {
      r = dnswire::parse_response(dgram);
    } catch (const Error&) {
      return;
    }
    if (phase_ == Phase::client_send) {
      on_send_phase_response(now, r);
    } else {
      on_receive_phase_response(now, r);
    }
  }

  void on_tick(double now) {
    if (phase_ == Phase::client_send) {
      process_window_timers(now);
    } else if (phase_ == Phase::client_receive) {
      if (auto dl = stopwait_.deadline(); dl && now >= *dl) {
        if (stopwait_.on_timeout(now, timeout()) == reliability::StopWait::Action::resend) {
          emit(stopwait_.wire());
          ++stats_.retransmissions;
          stats_.dummy_max_transmissions =
              std::max(stats_.dummy_max_transmissions, stopwait_.transmissions());
        } else {
          fail("server stayed silent through three transmissions");
        }
      }
    }
  }

  std::optional<double> next_deadline() const {
    if (phase_ == Phase::client_send) return window_.next_deadline();
    if (phase_ == Phase::client_receive) return stopwait_.deadline();
    return std::nullopt;
  }

  std::vector<Bytes> take_outputs() { return std::exchange(outputs_, {}); }

  Phase phase() const { return phase_; }
  bool finished() const { return phase_ == Phase::done || phase_ == Phase::failed; }
  const inner::SessionKeys& keys() const { return keys_; }
  const ClientStats& stats() const { return stats_; }
  std::uint8_t session_id() const { return session_id_; }
  const std::string& failure() const { return failure_; }
  std::uint16_t total_chars() const { return total_chars_; }

 private:
  static inner::MockConfig make_inner_cfg(const ClientConfig& cfg) {
    inner::MockConfig ic = cfg.inner_cfg;
    ic.pad_max = cfg.pad_max;
    return ic;
  }

  double timeout() const { return rtt_.timeout(cfg_.timeout_k, cfg_.initial_timeout_s); }

  void emit(const Bytes& wire) {
    outputs_.push_back(wire);
    ++stats_.datagrams_sent;
    stats_.bytes_sent += wire.size();
  }

  std::uint16_t fresh_qid() {
    for (;;) {
      const auto qid = static_cast<std::uint16_t>(rng_.uniform(0, 0xFFFF));
      bool taken = stopwait_.armed() && stopwait_.qid() == qid;
      for (const auto& e : window_.entries()) {
        taken = taken || std::find(e.qids.begin(), e.qids.end(), qid) != e.qids.end();
      }
      if (!taken) return qid;
    }
  }

  void fill_window(double now) {
    while (window_.can_push() && next_fragment_ < fragments_.size()) {
      const std::string& frag = fragments_[next_fragment_];
      const auto identity = static_cast<std::uint16_t>(total_chars_ + next_fragment_);
      const std::string prefix = ident::seal_prefix(cfg_.password, ident::DirectionTag::client,
                                                    frag, {identity, session_id_});
      const std::uint16_t qid = fresh_qid();
      reliability::SendEntry e;
      e.identity = identity;
      e.fragment = prefix + frag;
      e.wire = dnswire::build_query(qid, e.fragment, cfg_.domain);
      e.qids.push_back(qid);
      e.sent_at = now;
      e.retx_at = now + timeout();
      e.transmissions = 1;
      emit(window_.push(std::move(e)).wire);
      ++next_fragment_;
      ++stats_.data_packets;
    }
    stats_.max_window_outstanding =
        std::max(stats_.max_window_outstanding, window_.max_outstanding_seen());
  }

  void process_window_timers(double now) {
    for (reliability::SendEntry* e : window_.due(now)) {
      if (e->transmissions >= reliability::SendWindow::kMaxTransmissions) {
        fail("no acknowledgment after five transmissions");
        return;
      }
      const std::uint16_t qid = fresh_qid();
      e->qids.push_back(qid);
      e->wire[0] = static_cast<std::uint8_t>(qid >> 8);
      e->wire[1] = static_cast<std::uint8_t>(qid & 0xFF);
      ++e->transmissions;
      e->sent_at = now;
      e->retx_at = now + timeout();
      emit(e->wire);
      ++stats_.retransmissions;
    }
  }

  void on_send_phase_response(double now, const dnswire::ResponseView& r) {
    const reliability::SendEntry* match = nullptr;
    for (const auto& e : window_.entries()) {
      if (std::find(e.qids.begin(), e.qids.end(), r.qid) != e.qids.end()) {
        match = &e;
        break;
      }
    }
    if (match == nullptr) return;
    // The answer must be about the name we asked for; a forged qid hit on a
    // different name is discarded.
    const std::string expected = match->fragment + "." + domain_lower_;
    if (!r.qname_lower.empty() && r.qname_lower != expected) return;
    const auto ack = window_.on_ack(r.qid, now);
    if (!ack.matched) return;
    if (ack.rtt_sample) {
      rtt_.add_sample(*ack.rtt_sample);
      stats_.rtt_samples.push_back(*ack.rtt_sample);
      stats_.final_rtt = rtt_.rtt();
    }
    // A triggered head retransmission goes out immediately, not on a timer.
    if (window_.resend_pending()) process_window_timers(now);
    fill_window(now);
    if (window_.empty() && next_fragment_ == fragments_.size()) begin_receive(now);
  }

  void begin_receive(double now) {
    phase_ = Phase::client_receive;
    next_dummy_identity_ = static_cast<std::uint16_t>(total_chars_ + fragments_.size());
    send_next_dummy(now);
  }

  void send_next_dummy(double now) {
    std::string filler(rng_.uniform(codec::kFragMin, codec::kFragMax), '\0');
    for (char& c : filler) c = codec::kAlphabet[rng_.uniform(0, 31)];
    const std::string prefix = ident::seal_prefix(cfg_.password, ident::DirectionTag::client,
                                                  filler, {next_dummy_identity_, session_id_});
    ++next_dummy_identity_;
    const std::uint16_t qid = fresh_qid();
    const Bytes wire = dnswire::build_query(qid, prefix + filler, cfg_.domain);
    stopwait_.arm(wire, now, timeout());
    dummy_sent_at_ = now;
    emit(wire);
    ++stats_.dummy_packets;
    stats_.dummy_max_transmissions = std::max(stats_.dummy_max_transmissions, 1);
  }

  void on_receive_phase_response(double now, const dnswire::ResponseView& r) {
    if (!stopwait_.armed() || r.qid != stopwait_.qid()) return;
    if (r.kind == dnswire::ResponseKind::data) {
      const std::string label = dnswire::lower_name(r.data_label);
      if (label.size() < kMinPayloadLabel || label.size() > kMaxPayloadLabel) return;
      ident::PacketPrefix p;
      try {
        p = ident::open_prefix(cfg_.password, ident::DirectionTag::server, label.substr(5),
                               label.substr(0, 5));
      } catch (const Error&) {
        return;
      }
      if (p.session != session_id_) return;
      if (stopwait_.transmissions() == 1) {
        const double sample = now - dummy_sent_at_;
        rtt_.add_sample(sample);
        stats_.rtt_samples.push_back(sample);
        stats_.final_rtt = rtt_.rtt();
      }
      stopwait_.delivered();
      dataless_responses_ = 0;
      if (reliability::dedupe_on_receive(recv_buffer_, p.identity) ==
          reliability::RecvAction::buffer_it) {
        recv_buffer_[p.identity] = label.substr(5);
      }
      if (reliability::receive_complete(recv_buffer_)) {
        finish(now);
      } else {
        send_next_dummy(now);
      }
    } else if (r.kind == dnswire::ResponseKind::ack) {
      // The server answered the dummy like a plain DNS query: it has nothing
      // for this session. A few of these in a row means it never will.
      stopwait_.delivered();
      if (++dataless_responses_ >= 3) {
        fail("server answers but carries no handshake data");
      } else {
        send_next_dummy(now);
      }
    }
  }

  void finish(double) {
    Bytes reply;
    try {
      reply = codec::decode_b32(reliability::reassemble_buffer(recv_buffer_));
    } catch (const Error&) {
      fail("server data failed transport decoding");
      return;
    }
    if (auto keys = inner_.client_finish(view(reply))) {
      keys_ = *keys;
      phase_ = Phase::done;
    } else {
      fail("inner handshake rejected the server reply");
    }
  }

  void fail(std::string reason) {
    phase_ = Phase::failed;
    failure_ = std::move(reason);
  }

  ClientConfig cfg_;
  Rng rng_;
  std::string domain_lower_;
  inner::MockScrambleSuit inner_;
  Phase phase_ = Phase::idle;
  std::uint8_t session_id_ = 0;
  std::uint16_t total_chars_ = 0;
  std::vector<std::string> fragments_;
  std::size_t next_fragment_ = 0;
  reliability::SendWindow window_;
  reliability::StopWait stopwait_;
  reliability::RttEstimator rtt_;
  std::map<std::uint16_t, std::string> recv_buffer_;
  std::uint16_t next_dummy_identity_ = 0;
  double dummy_sent_at_ = 0;
  int dataless_responses_ = 0;
  inner::SessionKeys keys_{};
  ClientStats stats_;
  std::string failure_;
  std::vector<Bytes> outputs_;
};

struct ServerConfig {
  std::string password;
  std::string domain;
  std::uint32_t decoy_ip = 0xCB007107;  // 203.0.113.7, a documentation address
  std::uint32_t ttl = 60;
  std::size_t pad_max = 100;
  std::size_t max_sessions = 256;
  double idle_eviction_s = 60.0;
  // Answer A queries for names outside the bridge domain with the decoy
  // address too, like a resolver that knows every name. When false such
  // queries are refused; a fronting runtime may forward them upstream instead.
  bool open_wildcard = true;
  inner::MockConfig inner_cfg;  // pad_max is taken from `pad_max`
};

struct EngineReply {
  Bytes bytes;
  bool under_domain = false;  // name falls under the bridge domain
  bool protocol = false;      // carried a protocol-shaped payload label
};

// Server half: a handful of per-session state machines behind one DNS-server
// persona. Every datagram gets exactly one reply, and nothing about the reply
// shape depends on whether the sender knows the password. Not synchronized;
// callers serialize access.
class ServerEngine {
 public:
  ServerEngine(ServerConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), rng_(seed), domain_labels_(make_domain_labels(cfg_.domain)) {
    validate_domain(cfg_.domain);
  }

  EngineReply on_datagram(double now, ByteView dgram) {
    EngineReply reply;
    dnswire::QueryView q;
    try {
      q = dnswire::parse_query(dgram);
    } catch (const Error&) {
      std::uint16_t qid = 0;
      if (dgram.size() >= 2) qid = static_cast<std::uint16_t>((dgram[0] << 8) | dgram[1]);
      else if (dgram.size() == 1) qid = static_cast<std::uint16_t>(dgram[0] << 8);
      reply.bytes = dnswire::build_error_response(qid, dnswire::kRcodeFormErr);
      return reply;
    }
    if (!q.well_formed) {
      reply.bytes = dnswire::build_error_response(q.qid, dnswire::kRcodeFormErr);
      return reply;
    }
    if (!under_domain(q)) {
      reply.bytes = cfg_.open_wildcard
                        ? decoy_answer(q)
                        : dnswire::build_empty_response(q, dnswire::kRcodeRefused);
      return reply;
    }
    reply.under_domain = true;
    if (auto payload = protocol_payload(q)) {
      reply.protocol = true;
      reply.bytes = handle_protocol(now, q, payload->first, payload->second);
      return reply;
    }
    reply.bytes = decoy_answer(q);
    return reply;
  }

  void on_tick(double now) {
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (now - it->second.last_seen > cfg_.idle_eviction_s) {
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }

  struct HandoverCandidate {
    std::uint8_t session_id = 0;
    inner::SessionKeys keys;
  };

  std::vector<HandoverCandidate> handover_candidates() const {
    std::vector<HandoverCandidate> out;
    for (const auto& [sid, s] : sessions_) {
      if (s.state == Sess::State::serving) out.push_back({sid, s.keys});
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
    return out;
  }

  void note_handover(std::uint8_t session_id) { sessions_.erase(session_id); }

  std::size_t session_count() const { return sessions_.size(); }
  std::size_t accepts() const { return accepts_; }
  std::size_t rejects() const { return rejects_; }
  std::size_t replay_rejects() const { return replay_rejects_; }
  const ServerConfig& config() const { return cfg_; }

  std::optional<inner::SessionKeys> session_keys(std::uint8_t sid) const {
    const auto it = sessions_.find(sid);
    if (it == sessions_.end() || it->second.state != Sess::State::serving) return std::nullopt;
    return it->second.keys;
  }

 private:
  struct Sess {
    enum class State { collecting, serving, rejected };
    State state = State::collecting;
    double last_seen = 0;
    std::map<std::uint16_t, std::string> buf;
    // Serving side:
    std::vector<std::string> out_fragments;
    std::uint16_t out_first_identity = 0;
    std::size_t served = 0;
    std::uint16_t first_dummy = 0;
    std::uint16_t next_dummy = 0;
    std::map<std::uint16_t, Bytes> response_cache;
    inner::SessionKeys keys{};
  };

  static std::vector<std::string> make_domain_labels(std::string_view domain) {
    auto labels = dnswire::detail::split_name(domain);
    for (auto& l : labels) l = dnswire::lower_name(l);
    return labels;
  }

  bool under_domain(const dnswire::QueryView& q) const {
    if (q.labels.size() < domain_labels_.size()) return false;
    const std::size_t off = q.labels.size() - domain_labels_.size();
    for (std::size_t i = 0; i < domain_labels_.size(); ++i) {
      if (dnswire::lower_name(q.labels[off + i]) != domain_labels_[i]) return false;
    }
    return true;
  }

  // Protocol queries are type-A, class-IN, exactly one label above the bridge
  // domain, sized for prefix+fragment, every character from the codec
  // alphabet. Returns the lowercased (prefix, fragment) split.
  std::optional<std::pair<std::string, std::string>> protocol_payload(
      const dnswire::QueryView& q) const {
    if (q.qtype != dnswire::kTypeA || q.qclass != dnswire::kClassIn) return std::nullopt;
    if (q.labels.size() != domain_labels_.size() + 1) return std::nullopt;
    const std::string& label = q.first_label();
    if (label.size() < kMinPayloadLabel || label.size() > kMaxPayloadLabel) return std::nullopt;
    std::string lower = dnswire::lower_name(label);
    for (char c : lower) {
      if (codec::detail::symbol_value(c) < 0) return std::nullopt;
    }
    return std::make_pair(lower.substr(0, 5), lower.substr(5));
  }

  Bytes decoy_answer(const dnswire::QueryView& q) const {
    if (q.qtype == dnswire::kTypeA && q.qclass == dnswire::kClassIn) {
      return dnswire::build_ack_response(q, cfg_.decoy_ip, cfg_.ttl);
    }
    return dnswire::build_empty_response(q, dnswire::kRcodeNoError);
  }

  Bytes handle_protocol(double now, const dnswire::QueryView& q, const std::string& prefix,
                        const std::string& fragment) {
    ident::PacketPrefix p;
    try {
      p = ident::open_prefix(cfg_.password, ident::DirectionTag::client, fragment, prefix);
    } catch (const Error&) {
      return decoy_answer(q);
    }
    auto it = sessions_.find(p.session);
    if (it == sessions_.end()) {
      admit_session(now, p, fragment);
      return decoy_answer(q);
    }
    Sess& s = it->second;
    switch (s.state) {
      case Sess::State::collecting:
        handle_collecting(now, s, p, fragment);
        return decoy_answer(q);
      case Sess::State::serving:
        return handle_serving(now, s, p, q);
      case Sess::State::rejected:
        s.last_seen = now;
        return decoy_answer(q);
    }
    return decoy_answer(q);
  }

  void admit_session(double now, const ident::PacketPrefix& p, const std::string& fragment) {
    if (sessions_.size() >= cfg_.max_sessions) evict_oldest();
    Sess s;
    s.last_seen = now;
    s.buf[p.identity] = fragment;
    auto [it, inserted] = sessions_.emplace(p.session, std::move(s));
    (void)inserted;
    maybe_complete(it->second);
  }

  void evict_oldest() {
    auto oldest = sessions_.end();
    for (auto it = sessions_.begin(); it != sessions_.end(); ++it) {
      if (oldest == sessions_.end() || it->second.last_seen < oldest->second.last_seen ||
          (it->second.last_seen == oldest->second.last_seen && it->first < oldest->first)) {
        oldest = it;
      }
    }
    if (oldest != sessions_.end()) sessions_.erase(oldest);
  }

  void handle_collecting(double now, Sess& s, const ident::PacketPrefix& p,
                         const std::string& fragment) {
    if (reliability::dedupe_on_receive(s.buf, p.identity) == reliability::RecvAction::ack_only) {
      s.last_seen = now;
      return;
    }
    // A colliding session ID with an identity far outside the window band is
    // someone else's first packet or a forgery; the session ignores it.
    const std::uint16_t lo = s.buf.begin()->first;
    const std::uint16_t hi = s.buf.rbegin()->first;
    const bool plausible =
        p.identity + kIdentityBand >= lo && p.identity <= static_cast<std::uint32_t>(hi) + kIdentityBand;
    if (!plausible) return;
    s.buf[p.identity] = fragment;
    s.last_seen = now;
    maybe_complete(s);
  }

  void maybe_complete(Sess& s) {
    if (!reliability::receive_complete(s.buf)) return;
    // The message is the contiguous run whose lengths sum to the first
    // identity; anything buffered beyond it was never part of the message.
    const std::uint16_t first = s.buf.begin()->first;
    std::string text;
    std::size_t run = 0;
    while (text.size() < first) {
      text += s.buf.at(static_cast<std::uint16_t>(first + run));
      ++run;
    }
    for (auto it = s.buf.upper_bound(static_cast<std::uint16_t>(first + run - 1));
         it != s.buf.end();) {
      it = s.buf.erase(it);
    }
    s.first_dummy = s.next_dummy = static_cast<std::uint16_t>(first + run);
    Bytes msg;
    try {
      msg = codec::decode_b32(text);
    } catch (const Error&) {
      s.state = Sess::State::rejected;
      ++rejects_;
      return;
    }
    if (replays_.seen_or_insert(view(msg))) {
      s.state = Sess::State::rejected;
      ++replay_rejects_;
      ++rejects_;
      return;
    }
    inner::MockScrambleSuit srv(cfg_.password, server_inner_cfg(), rng_);
    auto acc = srv.server_respond(view(msg));
    if (!acc) {
      s.state = Sess::State::rejected;
      ++rejects_;
      return;
    }
    const std::string encoded = codec::encode_b32(view(acc->reply));
    if (encoded.size() + kIdentityHeadroom > 0xFFFF) {
      s.state = Sess::State::rejected;
      ++rejects_;
      return;
    }
    s.out_fragments = codec::fragment(encoded, rng_);
    s.out_first_identity = static_cast<std::uint16_t>(encoded.size());
    s.served = 0;
    s.keys = acc->keys;
    s.state = Sess::State::serving;
    ++accepts_;
  }

  Bytes handle_serving(double now, Sess& s, const ident::PacketPrefix& p,
                       const dnswire::QueryView& q) {
    if (s.buf.contains(p.identity)) {
      // Late retransmission of a data packet whose ack was lost.
      s.last_seen = now;
      return decoy_answer(q);
    }
    if (p.identity == s.next_dummy && s.served < s.out_fragments.size()) {
      const std::string& frag = s.out_fragments[s.served];
      const auto out_id = static_cast<std::uint16_t>(s.out_first_identity + s.served);
      const std::string prefix = ident::seal_prefix(cfg_.password, ident::DirectionTag::server,
                                                    frag, {out_id, p.session});
      Bytes resp = dnswire::build_data_response(q, prefix + frag, cfg_.decoy_ip, cfg_.ttl);
      s.response_cache[p.identity] = resp;
      ++s.served;
      ++s.next_dummy;
      s.last_seen = now;
      return resp;
    }
    if (p.identity >= s.first_dummy && p.identity < s.next_dummy) {
      // The dummy was re-asked because its response was lost in transit; the
      // reply must be byte-identical, query ID included.
      s.last_seen = now;
      const auto it = s.response_cache.find(p.identity);
      if (it != s.response_cache.end()) return it->second;
    }
    return decoy_answer(q);
  }

  inner::MockConfig server_inner_cfg() const {
    inner::MockConfig ic = cfg_.inner_cfg;
    ic.pad_max = cfg_.pad_max;
    return ic;
  }

  ServerConfig cfg_;
  Rng rng_;
  std::vector<std::string> domain_labels_;
  std::map<std::uint8_t, Sess> sessions_;
  inner::ReplayCache replays_;
  std::size_t accepts_ = 0;
  std::size_t rejects_ = 0;
  std::size_t replay_rejects_ = 0;
};

}  // namespace dnsmorph::session
