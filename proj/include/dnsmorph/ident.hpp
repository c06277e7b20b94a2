#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/codec.hpp"
#include "dnsmorph/crypto.hpp"
#include "dnsmorph/errors.hpp"

namespace dnsmorph::ident {

// 24-bit sealed packet header: 16-bit identity followed by the 8-bit session.
// The first packet of a direction carries identity = total encoded length of
// that direction's data; every later packet carries the previous identity + 1
// (retransmissions keep their identity).
struct PacketPrefix {
  std::uint16_t identity = 0;
  std::uint8_t session = 0;

  bool operator==(const PacketPrefix&) const = default;
};

enum class DirectionTag : std::uint8_t { client = 0, server = 1 };

inline constexpr std::size_t kPrefixChars = 5;

namespace detail {

inline std::string lower_copy(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace detail

// Key material is bound to the exact fragment text that follows the prefix in
// the label. The fragment is folded to lowercase first, so a sender and a
// receiver separated by a case-mangling resolver still derive the same key.
inline std::pair<std::array<std::uint8_t, 16>, std::array<std::uint8_t, 16>> derive_key_iv(
    std::string_view password, DirectionTag x, std::string_view fragment) {
  std::string msg;
  msg.reserve(1 + fragment.size());
  msg.push_back(x == DirectionTag::client ? '0' : '1');
  msg += detail::lower_copy(fragment);
  const auto mat = crypto::hmac_sha256(to_bytes(password), to_bytes(msg));
  std::array<std::uint8_t, 16> key{}, iv{};
  std::copy(mat.begin(), mat.begin() + 16, key.begin());
  std::copy(mat.begin() + 16, mat.end(), iv.begin());
  return {key, iv};
}

namespace detail {

inline std::array<std::uint8_t, 3> crypt3(std::string_view password, DirectionTag x,
                                          std::string_view fragment,
                                          const std::array<std::uint8_t, 3>& in) {
  const auto [key, iv] = derive_key_iv(password, x, fragment);
  std::array<std::uint8_t, 3> out{};
  crypto::aes128_ctr(key.data(), iv.data(), ByteView(in.data(), in.size()), out.data());
  return out;
}

}  // namespace detail

// Encrypts (identity, session) and packs the 3 ciphertext bytes into exactly
// 5 alphabet characters; 24 bits fill the 25 carried bits with a zero bit at
// the tail, so no padding character ever appears.
inline std::string seal_prefix(std::string_view password, DirectionTag x,
                               std::string_view fragment, PacketPrefix prefix) {
  const std::array<std::uint8_t, 3> plain = {
      static_cast<std::uint8_t>(prefix.identity >> 8),
      static_cast<std::uint8_t>(prefix.identity & 0xFF),
      prefix.session,
  };
  const auto ct = detail::crypt3(password, x, fragment, plain);
  std::string out(kPrefixChars, '\0');
  out[0] = codec::kAlphabet[ct[0] >> 3];
  out[1] = codec::kAlphabet[((ct[0] & 0x07) << 2) | (ct[1] >> 6)];
  out[2] = codec::kAlphabet[(ct[1] >> 1) & 0x1F];
  out[3] = codec::kAlphabet[((ct[1] & 0x01) << 4) | (ct[2] >> 4)];
  out[4] = codec::kAlphabet[(ct[2] & 0x0F) << 1];
  return out;
}

// Inverse of seal_prefix. Always yields some 24-bit value; whether that value
// is plausible for a live session is the session layer's judgement.
inline PacketPrefix open_prefix(std::string_view password, DirectionTag x,
                                std::string_view fragment, std::string_view prefix5) {
  if (prefix5.size() != kPrefixChars) {
    throw CharacterOutOfAlphabet("prefix must be exactly 5 characters");
  }
  std::array<std::uint8_t, 5> v{};
  for (std::size_t i = 0; i < kPrefixChars; ++i) {
    const int val = codec::detail::symbol_value(prefix5[i]);
    if (val < 0 || val == 32) {
      throw CharacterOutOfAlphabet(std::string("prefix character '") + prefix5[i] +
                                   "' outside the data alphabet");
    }
    v[i] = static_cast<std::uint8_t>(val);
  }
  const std::array<std::uint8_t, 3> ct = {
      static_cast<std::uint8_t>((v[0] << 3) | (v[1] >> 2)),
      static_cast<std::uint8_t>((v[1] << 6) | (v[2] << 1) | (v[3] >> 4)),
      static_cast<std::uint8_t>((v[3] << 4) | (v[4] >> 1)),
  };
  const auto plain = detail::crypt3(password, x, fragment, ct);
  return PacketPrefix{
      static_cast<std::uint16_t>((plain[0] << 8) | plain[1]),
      plain[2],
  };
}

}  // namespace dnsmorph::ident
