#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/errors.hpp"

namespace dnsmorph::codec {

// DNS-label-safe Base32 variant: RFC 4648 data alphabet forced to lowercase,
// padding '=' replaced by '1'. '1' never appears except as padding.
inline constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz234567";
inline constexpr char kPad = '1';

inline constexpr std::size_t kFragMin = 20;
inline constexpr std::size_t kFragMax = 50;

namespace detail {

// Maps a character to its 5-bit value, 32 for padding, -1 for out of alphabet.
// Case folding happens here so decoding never depends on received case.
inline int symbol_value(char c) {
  if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  if (c >= 'a' && c <= 'z') return c - 'a';
  if (c >= '2' && c <= '7') return c - '2' + 26;
  if (c == kPad) return 32;
  return -1;
}

// Padding count for the final 8-char block by remainder bytes (1..4), index 0 unused.
inline constexpr std::array<int, 5> kPadForRemainder = {0, 6, 4, 3, 1};
// Decoded byte count of a final block carrying `pads` padding chars.
inline int bytes_for_pads(int pads) {
  switch (pads) {
    case 0: return 5;
    case 1: return 4;
    case 3: return 3;
    case 4: return 2;
    case 6: return 1;
    default: return -1;
  }
}

}  // namespace detail

inline std::string encode_b32(ByteView data) {
  std::string out;
  out.reserve(((data.size() + 4) / 5) * 8);
  std::size_t i = 0;
  for (; i + 5 <= data.size(); i += 5) {
    const std::uint8_t* b = data.data() + i;
    out.push_back(kAlphabet[b[0] >> 3]);
    out.push_back(kAlphabet[((b[0] & 0x07) << 2) | (b[1] >> 6)]);
    out.push_back(kAlphabet[(b[1] >> 1) & 0x1F]);
    out.push_back(kAlphabet[((b[1] & 0x01) << 4) | (b[2] >> 4)]);
    out.push_back(kAlphabet[((b[2] & 0x0F) << 1) | (b[3] >> 7)]);
    out.push_back(kAlphabet[(b[3] >> 2) & 0x1F]);
    out.push_back(kAlphabet[((b[3] & 0x03) << 3) | (b[4] >> 5)]);
    out.push_back(kAlphabet[b[4] & 0x1F]);
  }
  const std::size_t rem = data.size() - i;
  if (rem > 0) {
    std::array<std::uint8_t, 5> b{};
    for (std::size_t k = 0; k < rem; ++k) b[k] = data[i + k];
    std::array<char, 8> block = {
        kAlphabet[b[0] >> 3],
        kAlphabet[((b[0] & 0x07) << 2) | (b[1] >> 6)],
        kAlphabet[(b[1] >> 1) & 0x1F],
        kAlphabet[((b[1] & 0x01) << 4) | (b[2] >> 4)],
        kAlphabet[((b[2] & 0x0F) << 1) | (b[3] >> 7)],
        kAlphabet[(b[3] >> 2) & 0x1F],
        kAlphabet[((b[3] & 0x03) << 3) | (b[4] >> 5)],
        kAlphabet[b[4] & 0x1F],
    };
    const int pads = detail::kPadForRemainder[rem];
    for (int k = 0; k < 8; ++k) {
      out.push_back(k < 8 - pads ? block[static_cast<std::size_t>(k)] : kPad);
    }
  }
  return out;
}

inline Bytes decode_b32(std::string_view text) {
  // Character validity is checked before structure so that an out-of-alphabet
  // byte is always reported as such, whatever the input length.
  std::vector<int> vals(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const int v = detail::symbol_value(text[i]);
    if (v < 0) {
      throw CharacterOutOfAlphabet(std::string("character '") + text[i] + "' at position " +
                                   std::to_string(i));
    }
    vals[i] = v;
  }
  if (text.size() % 8 != 0) {
    throw BadPaddingStructure("length " + std::to_string(text.size()) + " not a multiple of 8");
  }
  Bytes out;
  out.reserve(text.size() / 8 * 5);
  for (std::size_t blk = 0; blk < text.size(); blk += 8) {
    int pads = 0;
    for (int k = 0; k < 8; ++k) {
      const bool is_pad = vals[blk + static_cast<std::size_t>(k)] == 32;
      if (is_pad) {
        ++pads;
      } else if (pads > 0) {
        throw BadPaddingStructure("padding before data at position " +
                                  std::to_string(blk + static_cast<std::size_t>(k)));
      }
    }
    if (pads > 0 && blk + 8 != text.size()) {
      throw BadPaddingStructure("padding in non-final block");
    }
    const int nbytes = detail::bytes_for_pads(pads);
    if (nbytes < 0) {
      throw BadPaddingStructure("invalid padding count " + std::to_string(pads));
    }
    std::array<std::uint8_t, 8> v{};
    for (int k = 0; k < 8 - pads; ++k) {
      v[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(vals[blk + static_cast<std::size_t>(k)]);
    }
    std::array<std::uint8_t, 5> b = {
        static_cast<std::uint8_t>((v[0] << 3) | (v[1] >> 2)),
        static_cast<std::uint8_t>((v[1] << 6) | (v[2] << 1) | (v[3] >> 4)),
        static_cast<std::uint8_t>((v[3] << 4) | (v[4] >> 1)),
        static_cast<std::uint8_t>((v[4] << 7) | (v[5] << 2) | (v[6] >> 3)),
        static_cast<std::uint8_t>((v[6] << 5) | v[7]),
    };
    for (int k = 0; k < nbytes; ++k) out.push_back(b[static_cast<std::size_t>(k)]);
  }
  return out;
}

// Splits encoded text into fragments of uniformly random length 20..50; the
// final fragment takes the remainder and may be as short as one character.
inline std::vector<std::string> fragment(std::string_view text, Rng& rng) {
  if (text.empty()) throw EmptyInput("cannot fragment empty text");
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (text.size() - pos > kFragMax) {
    const std::size_t len = rng.uniform(kFragMin, kFragMax);
    out.emplace_back(text.substr(pos, len));
    pos += len;
  }
  out.emplace_back(text.substr(pos));
  return out;
}

inline std::string reassemble(const std::vector<std::string>& fragments) {
  std::string out;
  std::size_t total = 0;
  for (const auto& f : fragments) total += f.size();
  out.reserve(total);
  for (const auto& f : fragments) out += f;
  return out;
}

}  // namespace dnsmorph::codec
