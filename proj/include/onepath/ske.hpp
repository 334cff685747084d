#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <string>

#include "onepath/common.hpp"
#include "onepath/rng.hpp"

namespace onepath {

enum class KeyRole : std::uint8_t { Sk1 = 1, Sk2 = 2, Sk3 = 3 };

inline const char* role_name(KeyRole r) {
  switch (r) {
    case KeyRole::Sk1: return "sk1";
    case KeyRole::Sk2: return "sk2";
    case KeyRole::Sk3: return "sk3";
  }
  return "?";
}

// XChaCha20-Poly1305 key with an immutable role tag.
class SymmetricKey {
 public:
  static constexpr std::size_t kKeyBytes = crypto_aead_xchacha20poly1305_ietf_KEYBYTES;
  static constexpr std::size_t kNonceBytes = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  static constexpr std::size_t kTagBytes = crypto_aead_xchacha20poly1305_ietf_ABYTES;
  static constexpr std::size_t kOverhead = kNonceBytes + kTagBytes;

  SymmetricKey(KeyRole role, const std::array<std::uint8_t, kKeyBytes>& key) : role_(role), key_(key) {}

  static SymmetricKey generate(KeyRole role, Rng& rng) {
    std::array<std::uint8_t, kKeyBytes> k{};
    rng.fill(k);
    return SymmetricKey(role, k);
  }

  KeyRole role() const { return role_; }
  const std::array<std::uint8_t, kKeyBytes>& bytes() const { return key_; }

  friend bool operator==(const SymmetricKey&, const SymmetricKey&) = default;

 private:
  KeyRole role_;
  std::array<std::uint8_t, kKeyBytes> key_;
};

namespace detail {
inline constexpr std::string_view kSkeAd = "onepath-ske-v1";
}

// nonce || ciphertext || tag. Nonces come from the caller's stream so
// seeded runs are reproducible.
inline Bytes ske_encrypt(const SymmetricKey& key, ByteSpan plaintext, Rng& rng) {
  ensure_sodium();
  Bytes out(SymmetricKey::kNonceBytes + plaintext.size() + SymmetricKey::kTagBytes);
  rng.fill(std::span(out.data(), SymmetricKey::kNonceBytes));
  unsigned long long clen = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(
      out.data() + SymmetricKey::kNonceBytes, &clen, plaintext.data(), plaintext.size(),
      reinterpret_cast<const unsigned char*>(detail::kSkeAd.data()), detail::kSkeAd.size(), nullptr,
      out.data(), key.bytes().data());
  return out;
}

inline Bytes ske_decrypt(const SymmetricKey& key, ByteSpan ciphertext) {
  ensure_sodium();
  if (ciphertext.size() < SymmetricKey::kOverhead)
    throw AuthError(std::string("ciphertext too short for ") + role_name(key.role()));
  Bytes out(ciphertext.size() - SymmetricKey::kOverhead);
  unsigned long long mlen = 0;
  const int rc = crypto_aead_xchacha20poly1305_ietf_decrypt(
      out.data(), &mlen, nullptr, ciphertext.data() + SymmetricKey::kNonceBytes,
      ciphertext.size() - SymmetricKey::kNonceBytes,
      reinterpret_cast<const unsigned char*>(detail::kSkeAd.data()), detail::kSkeAd.size(),
      ciphertext.data(), key.bytes().data());
  if (rc != 0) throw AuthError(std::string("authentication failed under ") + role_name(key.role()));
  return out;
}

// Node indexes are fixed 4-byte big-endian so ciphertext length is constant.
inline Bytes encode_index(std::uint32_t index) {
  ByteWriter w;
  w.u32be(index);
  return std::move(w).take();
}

inline std::uint32_t decode_index(ByteSpan b) {
  if (b.size() != 4) throw FormatError("node index must be 4 bytes");
  ByteReader r(b);
  return r.u32be();
}

}  // namespace onepath
