#pragma once

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <array>
#include <cstring>
#include <memory>
#include <optional>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/errors.hpp"

namespace dnsmorph::crypto {

inline std::array<std::uint8_t, 32> sha256(ByteView data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw CryptoFailure("sha256 failed");
  }
  return out;
}

inline std::array<std::uint8_t, 32> hmac_sha256(ByteView key, ByteView msg) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), msg.data(), msg.size(),
           out.data(), &len) == nullptr ||
      len != out.size()) {
    throw CryptoFailure("hmac-sha256 failed");
  }
  return out;
}

inline void aes128_ctr(const std::uint8_t key[16], const std::uint8_t iv[16], ByteView in,
                       std::uint8_t* out) {
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(),
                                                                      EVP_CIPHER_CTX_free);
  if (!ctx) throw CryptoFailure("cipher ctx alloc failed");
  int len = 0;
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, key, iv) != 1 ||
      EVP_EncryptUpdate(ctx.get(), out, &len, in.data(), static_cast<int>(in.size())) != 1) {
    throw CryptoFailure("aes-128-ctr failed");
  }
}

// Returns ciphertext || 16-byte tag.
inline Bytes aes256_gcm_seal(const std::uint8_t key[32], const std::uint8_t nonce[12],
                             ByteView aad, ByteView plain) {
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(),
                                                                      EVP_CIPHER_CTX_free);
  if (!ctx) throw CryptoFailure("cipher ctx alloc failed");
  Bytes out(plain.size() + 16);
  int len = 0;
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key, nonce) != 1) {
    throw CryptoFailure("gcm init failed");
  }
  if (!aad.empty() &&
      EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    throw CryptoFailure("gcm aad failed");
  }
  if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, plain.data(),
                        static_cast<int>(plain.size())) != 1) {
    throw CryptoFailure("gcm encrypt failed");
  }
  int fin = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1) {
    throw CryptoFailure("gcm final failed");
  }
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16, out.data() + plain.size()) != 1) {
    throw CryptoFailure("gcm tag failed");
  }
  return out;
}

// Input is ciphertext || 16-byte tag; nullopt on authentication failure.
inline std::optional<Bytes> aes256_gcm_open(const std::uint8_t key[32],
                                            const std::uint8_t nonce[12], ByteView aad,
                                            ByteView sealed) {
  if (sealed.size() < 16) return std::nullopt;
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(),
                                                                      EVP_CIPHER_CTX_free);
  if (!ctx) throw CryptoFailure("cipher ctx alloc failed");
  const std::size_t ct_len = sealed.size() - 16;
  Bytes out(ct_len);
  int len = 0;
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key, nonce) != 1) {
    throw CryptoFailure("gcm init failed");
  }
  if (!aad.empty() &&
      EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    throw CryptoFailure("gcm aad failed");
  }
  if (ct_len > 0 &&
      EVP_DecryptUpdate(ctx.get(), out.data(), &len, sealed.data(), static_cast<int>(ct_len)) != 1) {
    return std::nullopt;
  }
  Bytes tag(sealed.begin() + static_cast<std::ptrdiff_t>(ct_len), sealed.end());
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16, tag.data()) != 1) {
    throw CryptoFailure("gcm tag set failed");
  }
  int fin = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1) return std::nullopt;
  return out;
}

inline bool equal_constant_time(ByteView a, ByteView b) {
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

inline Bytes os_random(std::size_t n) {
  Bytes out(n);
  if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1) {
    throw CryptoFailure("RAND_bytes failed");
  }
  return out;
}

}  // namespace dnsmorph::crypto
