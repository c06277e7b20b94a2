#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/crypto.hpp"
#include "dnsmorph/errors.hpp"

namespace dnsmorph::inner {

struct SessionKeys {
  std::array<std::uint8_t, 32> c2s{};
  std::array<std::uint8_t, 32> s2c{};

  bool operator==(const SessionKeys&) const = default;
};

// Pluggable handshake carried inside the DNS transport. Reject is a value,
// never an observable wire behavior.
class InnerHandshake {
 public:
  virtual ~InnerHandshake() = default;

  virtual Bytes client_first() = 0;

  struct ServerAccept {
    Bytes reply;
    SessionKeys keys;
  };
  virtual std::optional<ServerAccept> server_respond(ByteView msg) = 0;

  virtual std::optional<SessionKeys> client_finish(ByteView reply) = 0;
};

struct MockConfig {
  std::size_t pad_max = 100;     // shortened default; 1308 for the original envelope
  std::size_t pubkey_len = 192;  // uniform-DH group element stand-in
  std::size_t mark_len = 16;
  std::size_t mac_len = 32;
  std::size_t ticket_len = 112;
};

// Password-authenticated mock of a ScrambleSuit-style first handshake. Every
// message is one or two "padded units": payload, random pad, a mark locating
// the MAC, and an HMAC over everything before it. The client sends one unit
// (its public value X); the server replies with two (its public value Y, then
// a session ticket).
class MockScrambleSuit final : public InnerHandshake {
 public:
  MockScrambleSuit(std::string password, MockConfig cfg, Rng& rng)
      : password_(std::move(password)), cfg_(cfg), rng_(&rng) {}

  static Bytes make_unit(std::string_view password, ByteView payload, const MockConfig& cfg,
                         Rng& rng) {
    Bytes out(payload.begin(), payload.end());
    const std::size_t pad_len = rng.uniform(0, static_cast<std::uint32_t>(cfg.pad_max));
    const Bytes pad = rng.bytes(pad_len);
    out.insert(out.end(), pad.begin(), pad.end());
    const auto mark = crypto::hmac_sha256(to_bytes(password), payload);
    out.insert(out.end(), mark.begin(), mark.begin() + static_cast<std::ptrdiff_t>(cfg.mark_len));
    const auto mac = crypto::hmac_sha256(to_bytes(password), view(out));
    out.insert(out.end(), mac.begin(), mac.begin() + static_cast<std::ptrdiff_t>(cfg.mac_len));
    return out;
  }

  struct Unit {
    Bytes payload;
    std::size_t consumed = 0;
  };

  // Recovers one unit whose payload length is known. The mark is recomputed
  // from the leading payload bytes and scanned for; every occurrence is
  // checked against the trailing MAC, so mark bytes that happen to appear
  // inside the pad cannot break an honest message.
  static std::optional<Unit> parse_unit(std::string_view password, ByteView buf,
                                        std::size_t payload_len, const MockConfig& cfg) {
    if (buf.size() < payload_len + cfg.mark_len + cfg.mac_len) return std::nullopt;
    const ByteView payload = buf.subspan(0, payload_len);
    const auto mark_full = crypto::hmac_sha256(to_bytes(password), payload);
    const ByteView mark(mark_full.data(), cfg.mark_len);
    const std::size_t last_start = buf.size() - cfg.mark_len - cfg.mac_len;
    for (std::size_t off = payload_len; off <= last_start; ++off) {
      if (!crypto::equal_constant_time(buf.subspan(off, cfg.mark_len), mark)) continue;
      const auto mac = crypto::hmac_sha256(to_bytes(password), buf.subspan(0, off + cfg.mark_len));
      if (crypto::equal_constant_time(buf.subspan(off + cfg.mark_len, cfg.mac_len),
                                      ByteView(mac.data(), cfg.mac_len))) {
        Unit u;
        u.payload.assign(payload.begin(), payload.end());
        u.consumed = off + cfg.mark_len + cfg.mac_len;
        return u;
      }
    }
    return std::nullopt;
  }

  static SessionKeys derive_session_keys(std::string_view password, ByteView x, ByteView y) {
    Bytes xy(x.begin(), x.end());
    xy.insert(xy.end(), y.begin(), y.end());
    const auto secret = crypto::hmac_sha256(to_bytes(password), view(xy));
    SessionKeys keys;
    keys.c2s = crypto::hmac_sha256(ByteView(secret.data(), secret.size()),
                                   to_bytes(std::string_view("data key client to server")));
    keys.s2c = crypto::hmac_sha256(ByteView(secret.data(), secret.size()),
                                   to_bytes(std::string_view("data key server to client")));
    return keys;
  }

  Bytes client_first() override {
    x_ = rng_->bytes(cfg_.pubkey_len);
    return make_unit(password_, view(x_), cfg_, *rng_);
  }

  std::optional<ServerAccept> server_respond(ByteView msg) override {
    auto unit = parse_unit(password_, msg, cfg_.pubkey_len, cfg_);
    if (!unit || unit->consumed != msg.size()) return std::nullopt;
    const Bytes y = rng_->bytes(cfg_.pubkey_len);
    const Bytes ticket = rng_->bytes(cfg_.ticket_len);
    ServerAccept acc;
    acc.reply = make_unit(password_, view(y), cfg_, *rng_);
    const Bytes ticket_unit = make_unit(password_, view(ticket), cfg_, *rng_);
    acc.reply.insert(acc.reply.end(), ticket_unit.begin(), ticket_unit.end());
    acc.keys = derive_session_keys(password_, view(unit->payload), view(y));
    return acc;
  }

  std::optional<SessionKeys> client_finish(ByteView reply) override {
    auto y_unit = parse_unit(password_, reply, cfg_.pubkey_len, cfg_);
    if (!y_unit) return std::nullopt;
    auto ticket_unit =
        parse_unit(password_, reply.subspan(y_unit->consumed), cfg_.ticket_len, cfg_);
    if (!ticket_unit) return std::nullopt;
    if (y_unit->consumed + ticket_unit->consumed != reply.size()) return std::nullopt;
    return derive_session_keys(password_, view(x_), view(y_unit->payload));
  }

 private:
  std::string password_;
  MockConfig cfg_;
  Rng* rng_;
  Bytes x_;
};

// Bounded first-seen filter over whole reassembled client messages; a replayed
// handshake is dropped here before the inner protocol ever sees it.
class ReplayCache {
 public:
  explicit ReplayCache(std::size_t capacity = 4096) : capacity_(capacity) {}

  // True if the message was already seen; otherwise records it.
  bool seen_or_insert(ByteView msg) {
    const auto digest = crypto::sha256(msg);
    std::string key(digest.begin(), digest.end());
    if (seen_.contains(key)) return true;
    order_.push_back(key);
    seen_.insert(std::move(key));
    if (order_.size() > capacity_) {
      seen_.erase(order_.front());
      order_.pop_front();
    }
    return false;
  }

  std::size_t size() const { return seen_.size(); }

 private:
  std::size_t capacity_;
  std::unordered_set<std::string> seen_;
  std::deque<std::string> order_;
};

}  // namespace dnsmorph::inner
