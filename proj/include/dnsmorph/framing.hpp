#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/crypto.hpp"
#include "dnsmorph/errors.hpp"

namespace dnsmorph::framing {

// Stream framing used after the handover to TCP. Each frame is a two-byte
// big-endian ciphertext length followed by AES-256-GCM ciphertext and tag; the
// length header is authenticated as associated data. Nonces are the frame
// counter, so both ends must consume frames in order and a key must never be
// reused across connections.
inline constexpr std::size_t kMaxPlaintext = 16 * 1024;
inline constexpr std::size_t kTagLen = 16;
inline constexpr std::size_t kHeaderLen = 2;

inline std::array<std::uint8_t, 12> nonce_for(std::uint64_t counter) {
  std::array<std::uint8_t, 12> n{};
  for (int i = 0; i < 8; ++i) {
    n[4 + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
  }
  return n;
}

class Sealer {
 public:
  explicit Sealer(const std::array<std::uint8_t, 32>& key) : key_(key) {}

  Bytes seal(ByteView plain) {
    if (plain.size() > kMaxPlaintext) throw ConfigError("frame payload larger than 16 KiB");
    const std::size_t n = plain.size() + kTagLen;
    Bytes out = {static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n & 0xFF)};
    const auto nonce = nonce_for(counter_++);
    const Bytes sealed = crypto::aes256_gcm_seal(key_.data(), nonce.data(), view(out), plain);
    out.insert(out.end(), sealed.begin(), sealed.end());
    return out;
  }

  std::uint64_t frames() const { return counter_; }

 private:
  std::array<std::uint8_t, 32> key_;
  std::uint64_t counter_ = 0;
};

enum class FrameStatus { need_more, ok, bad };

struct FrameResult {
  FrameStatus status = FrameStatus::need_more;
  Bytes plain;
  std::size_t consumed = 0;
};

// Attempts to open the frame at the head of `buf` with the given key and
// expected frame counter. `bad` covers both a malformed length and a failed
// authentication; the connection is unusable either way.
inline FrameResult open_frame(const std::array<std::uint8_t, 32>& key, std::uint64_t counter,
                              ByteView buf) {
  FrameResult r;
  if (buf.size() < kHeaderLen) return r;
  const std::size_t n = (static_cast<std::size_t>(buf[0]) << 8) | buf[1];
  if (n < kTagLen || n > kMaxPlaintext + kTagLen) {
    r.status = FrameStatus::bad;
    return r;
  }
  if (buf.size() < kHeaderLen + n) return r;
  const auto nonce = nonce_for(counter);
  auto plain = crypto::aes256_gcm_open(key.data(), nonce.data(), buf.subspan(0, kHeaderLen),
                                       buf.subspan(kHeaderLen, n));
  if (!plain) {
    r.status = FrameStatus::bad;
    return r;
  }
  r.status = FrameStatus::ok;
  r.plain = std::move(*plain);
  r.consumed = kHeaderLen + n;
  return r;
}

class Opener {
 public:
  explicit Opener(const std::array<std::uint8_t, 32>& key) : key_(key) {}

  void feed(ByteView data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

  FrameResult next() {
    FrameResult r = open_frame(key_, counter_, view(buf_));
    if (r.status == FrameStatus::ok) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
      ++counter_;
    }
    return r;
  }

  const Bytes& pending() const { return buf_; }
  std::uint64_t frames() const { return counter_; }

 private:
  std::array<std::uint8_t, 32> key_;
  Bytes buf_;
  std::uint64_t counter_ = 0;
};

}  // namespace dnsmorph::framing
