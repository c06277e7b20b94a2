#include <catch2/catch_amalgamated.hpp>

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <string>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/codec.hpp"
#include "dnsmorph/crypto.hpp"
#include "dnsmorph/errors.hpp"
#include "dnsmorph/ident.hpp"

using dnsmorph::ByteView;
using dnsmorph::Bytes;
using dnsmorph::Rng;
using dnsmorph::to_bytes;
using dnsmorph::view;
namespace ident = dnsmorph::ident;
using ident::DirectionTag;
using ident::PacketPrefix;

namespace {

// HMAC-SHA-256 rebuilt from the ipad/opad definition, using only the digest
// primitive, as an independent cross-check of the library's derivation.
std::array<std::uint8_t, 32> manual_hmac(ByteView key, ByteView msg) {
  Bytes k(key.begin(), key.end());
  if (k.size() > 64) {
    const auto h = dnsmorph::crypto::sha256(view(k));
    k.assign(h.begin(), h.end());
  }
  k.resize(64, 0);
  Bytes inner(64), outer(64);
  for (int i = 0; i < 64; ++i) {
    inner[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(k[static_cast<std::size_t>(i)] ^ 0x36);
    outer[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(k[static_cast<std::size_t>(i)] ^ 0x5c);
  }
  inner.insert(inner.end(), msg.begin(), msg.end());
  const auto ih = dnsmorph::crypto::sha256(view(inner));
  outer.insert(outer.end(), ih.begin(), ih.end());
  return dnsmorph::crypto::sha256(view(outer));
}

// First keystream block of AES-128-CTR is the ECB encryption of the initial
// counter block, which is the IV itself.
std::array<std::uint8_t, 16> ecb_block(const std::array<std::uint8_t, 16>& key,
                                       const std::array<std::uint8_t, 16>& block) {
  std::array<std::uint8_t, 16> out{};
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  REQUIRE(ctx != nullptr);
  REQUIRE(EVP_EncryptInit_ex(ctx, EVP_aes_128_ecb(), nullptr, key.data(), nullptr) == 1);
  EVP_CIPHER_CTX_set_padding(ctx, 0);
  int len = 0;
  REQUIRE(EVP_EncryptUpdate(ctx, out.data(), &len, block.data(), 16) == 1);
  EVP_CIPHER_CTX_free(ctx);
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

// Recomputes a sealed prefix from primitives only: HMAC key split, one ECB
// keystream block, XOR, then 25-bit big-endian repacking with a zero tail bit.
std::string manual_seal(std::string_view password, char x, std::string_view fragment,
                        std::uint16_t identity, std::uint8_t session) {
  std::string msg;
  msg.push_back(x);
  msg += lower(std::string(fragment));
  const auto mat = manual_hmac(view(to_bytes(password)), view(to_bytes(msg)));
  std::array<std::uint8_t, 16> key{}, iv{};
  std::copy(mat.begin(), mat.begin() + 16, key.begin());
  std::copy(mat.begin() + 16, mat.end(), iv.begin());
  const auto ks = ecb_block(key, iv);
  const std::array<std::uint8_t, 3> plain = {static_cast<std::uint8_t>(identity >> 8),
                                             static_cast<std::uint8_t>(identity & 0xFF), session};
  std::uint32_t v = 0;
  for (int i = 0; i < 3; ++i) {
    v = (v << 8) | static_cast<std::uint32_t>(plain[static_cast<std::size_t>(i)] ^
                                              ks[static_cast<std::size_t>(i)]);
  }
  v <<= 1;
  std::string out;
  for (int shift = 20; shift >= 0; shift -= 5) {
    out.push_back(dnsmorph::codec::kAlphabet[(v >> shift) & 0x1F]);
  }
  return out;
}

}  // namespace

TEST_CASE("sealed prefixes match fixed vectors") {
  CHECK(ident::seal_prefix("correct horse", DirectionTag::client, "ti3zuto4jrz5r22wsu4ar",
                           {450, 95}) == "j3jha");
  CHECK(ident::seal_prefix("correct horse", DirectionTag::server, "ti3zuto4jrz5r22wsu4ar",
                           {450, 95}) == "azzuo");
  CHECK(ident::seal_prefix("hunter2", DirectionTag::client, "abcdefghijklmnopqrst", {0, 0}) ==
        "tn3vi");
  CHECK(ident::seal_prefix("hunter2", DirectionTag::server, "abcdefghijklmnopqrst",
                           {65535, 255}) == "7tl6y");
  CHECK(ident::seal_prefix("p@ss w0rd!", DirectionTag::client, std::string(50, 'z'), {1, 17}) ==
        "ygyqk");
  CHECK(ident::seal_prefix("", DirectionTag::client, "ti3zu", {12345, 200}) == "45c4a");
}

TEST_CASE("fragment case does not change the seal") {
  const std::string upper = "TI3ZUTO4JRZ5R22WSU4AR";
  CHECK(ident::seal_prefix("correct horse", DirectionTag::client, upper, {450, 95}) == "j3jha");
  const auto p = ident::open_prefix("correct horse", DirectionTag::client, upper, "J3JHA");
  CHECK(p.identity == 450);
  CHECK(p.session == 95);
}

TEST_CASE("seal agrees with a primitive-level recomputation") {
  Rng rng(0x1DE57);
  for (int i = 0; i < 200; ++i) {
    std::string password;
    for (int k = rng.uniform(0, 80); k > 0; --k) {
      password.push_back(static_cast<char>(rng.uniform(32, 126)));
    }
    std::string fragment;
    for (int k = static_cast<int>(rng.uniform(1, 50)); k > 0; --k) {
      fragment.push_back(dnsmorph::codec::kAlphabet[rng.uniform(0, 31)]);
    }
    const auto identity = static_cast<std::uint16_t>(rng.uniform(0, 0xFFFF));
    const auto session = static_cast<std::uint8_t>(rng.uniform(0, 0xFF));
    const bool client = rng.unit() < 0.5;
    const auto tag = client ? DirectionTag::client : DirectionTag::server;
    REQUIRE(ident::seal_prefix(password, tag, fragment, {identity, session}) ==
            manual_seal(password, client ? '0' : '1', fragment, identity, session));
  }
}

TEST_CASE("open inverts seal") {
  Rng rng(0x0BE3);
  for (int i = 0; i < 2000; ++i) {
    std::string password;
    for (int k = rng.uniform(1, 24); k > 0; --k) {
      password.push_back(static_cast<char>(rng.uniform(33, 126)));
    }
    std::string fragment;
    for (int k = static_cast<int>(rng.uniform(1, 55)); k > 0; --k) {
      fragment.push_back(dnsmorph::codec::kAlphabet[rng.uniform(0, 31)]);
    }
    const PacketPrefix in{static_cast<std::uint16_t>(rng.uniform(0, 0xFFFF)),
                          static_cast<std::uint8_t>(rng.uniform(0, 0xFF))};
    const auto tag = rng.unit() < 0.5 ? DirectionTag::client : DirectionTag::server;
    const std::string sealed = ident::seal_prefix(password, tag, fragment, in);
    REQUIRE(sealed.size() == ident::kPrefixChars);
    REQUIRE(ident::open_prefix(password, tag, fragment, sealed) == in);
  }
}

TEST_CASE("prefix characters stay inside the data alphabet") {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    std::string fragment;
    for (int k = 0; k < 20; ++k) fragment.push_back(dnsmorph::codec::kAlphabet[rng.uniform(0, 31)]);
    const std::string sealed =
        ident::seal_prefix("pw", DirectionTag::client, fragment,
                           {static_cast<std::uint16_t>(i), static_cast<std::uint8_t>(i & 0xFF)});
    for (char c : sealed) {
      const int v = dnsmorph::codec::detail::symbol_value(c);
      CHECK(v >= 0);
      CHECK(v < 32);
    }
    // The 25th carried bit is zero, so the final character's value is even.
    CHECK(dnsmorph::codec::detail::symbol_value(sealed[4]) % 2 == 0);
  }
}

TEST_CASE("direction and password both change the seal") {
  Rng rng(0xD1FF);
  int cross_direction = 0;
  int cross_password = 0;
  for (int i = 0; i < 100; ++i) {
    std::string fragment;
    for (int k = 0; k < 30; ++k) fragment.push_back(dnsmorph::codec::kAlphabet[rng.uniform(0, 31)]);
    const PacketPrefix in{static_cast<std::uint16_t>(rng.uniform(0, 0xFFFF)),
                          static_cast<std::uint8_t>(rng.uniform(0, 0xFF))};
    const auto a = ident::seal_prefix("alpha", DirectionTag::client, fragment, in);
    if (a == ident::seal_prefix("alpha", DirectionTag::server, fragment, in)) ++cross_direction;
    if (a == ident::seal_prefix("bravo", DirectionTag::client, fragment, in)) ++cross_password;
  }
  CHECK(cross_direction <= 1);
  CHECK(cross_password <= 1);
}

TEST_CASE("sequential identities leave no visible increment pattern") {
  // Each packet carries a different fragment, so the sealed values of a run of
  // consecutive identities must not themselves form consecutive runs.
  Rng rng(0x5EA1);
  std::uint32_t prev = 0;
  int run = 0, longest = 0;
  for (int i = 0; i < 100; ++i) {
    std::string fragment;
    for (int k = 0; k < 25; ++k) fragment.push_back(dnsmorph::codec::kAlphabet[rng.uniform(0, 31)]);
    const std::string sealed =
        ident::seal_prefix("pw", DirectionTag::client, fragment,
                           {static_cast<std::uint16_t>(400 + i), 7});
    std::uint32_t raw = 0;
    for (char c : sealed) {
      raw = (raw << 5) | static_cast<std::uint32_t>(dnsmorph::codec::detail::symbol_value(c));
    }
    raw >>= 1;
    if (i > 0 && raw == prev + 1) {
      longest = std::max(longest, ++run);
    } else {
      run = 0;
    }
    prev = raw;
  }
  CHECK(longest < 4);
}

TEST_CASE("malformed prefixes are rejected") {
  CHECK_THROWS_AS(ident::open_prefix("pw", DirectionTag::client, "frag", "abcd"),
                  dnsmorph::CharacterOutOfAlphabet);
  CHECK_THROWS_AS(ident::open_prefix("pw", DirectionTag::client, "frag", "abcdef"),
                  dnsmorph::CharacterOutOfAlphabet);
  CHECK_THROWS_AS(ident::open_prefix("pw", DirectionTag::client, "frag", "ab1de"),
                  dnsmorph::CharacterOutOfAlphabet);
  CHECK_THROWS_AS(ident::open_prefix("pw", DirectionTag::client, "frag", "ab0de"),
                  dnsmorph::CharacterOutOfAlphabet);
  CHECK_THROWS_AS(ident::open_prefix("pw", DirectionTag::client, "frag", "ab-de"),
                  dnsmorph::CharacterOutOfAlphabet);
}
