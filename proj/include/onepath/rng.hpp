#pragma once

#include <sodium.h>

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "onepath/common.hpp"

namespace onepath {

inline void ensure_sodium() {
  static const bool ok = [] { return sodium_init() >= 0; }();
  if (!ok) throw Error("libsodium initialization failed");
}

// BLAKE2b-256 over the concatenation of the given parts.
inline std::array<std::uint8_t, 32> hash256(std::initializer_list<ByteSpan> parts) {
  ensure_sodium();
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, 32);
  for (auto p : parts) crypto_generichash_update(&st, p.data(), p.size());
  std::array<std::uint8_t, 32> out{};
  crypto_generichash_final(&st, out.data(), out.size());
  return out;
}

inline ByteSpan str_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// ChaCha20 keystream generator. Seeded instances are fully deterministic;
// child streams are derived by label so that independent components never
// share a stream.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(const std::array<std::uint8_t, 32>& key) : key_(key) { ensure_sodium(); }

  static Rng from_seed(std::string_view seed) {
    return Rng(hash256({str_bytes("onepath-rng-v1"), str_bytes(seed)}));
  }

  static Rng from_os() {
    ensure_sodium();
    std::array<std::uint8_t, 32> k{};
    randombytes_buf(k.data(), k.size());
    return Rng(k);
  }

  // Deterministic child stream; does not consume output of this stream.
  Rng derive(std::string_view label) const {
    return Rng(hash256({str_bytes("onepath-rng-derive"), key_, str_bytes(label)}));
  }

  void fill(std::span<std::uint8_t> out) {
    for (auto& b : out) {
      if (pos_ == buf_.size()) refill();
      b = buf_[pos_++];
    }
  }

  Bytes bytes(std::size_t n) {
    Bytes b(n);
    fill(b);
    return b;
  }

  std::uint64_t next_u64() {
    std::array<std::uint8_t, 8> b{};
    fill(b);
    std::uint64_t v = 0;
    for (auto x : b) v = (v << 8) | x;
    return v;
  }

  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  // Uniform in [0, bound), rejection sampling.
  std::uint64_t uniform(std::uint64_t bound) {
    if (bound == 0) throw Error("uniform: empty range");
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  // Uniform in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform in [0, bound) for arbitrary-precision bounds.
  mpz_class uniform_mpz(const mpz_class& bound) {
    const std::size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
    const std::size_t nbytes = (bits + 7) / 8;
    Bytes b(nbytes);
    mpz_class v;
    do {
      fill(b);
      if (bits % 8) b[0] &= static_cast<std::uint8_t>((1u << (bits % 8)) - 1);
      mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
    } while (v >= bound);
    return v;
  }

 private:
  void refill() {
    static constexpr std::array<std::uint8_t, 8> kNonce{};
    static constexpr std::array<std::uint8_t, 64> kZero{};
    crypto_stream_chacha20_xor_ic(buf_.data(), kZero.data(), kZero.size(), kNonce.data(), block_++,
                                  key_.data());
    pos_ = 0;
  }

  std::array<std::uint8_t, 32> key_;
  std::array<std::uint8_t, 64> buf_{};
  std::size_t pos_ = 64;
  std::uint64_t block_ = 0;
};

// ONEPATH_SEED fixes all randomness when set.
inline std::optional<std::string> env_seed() {
  const char* s = std::getenv("ONEPATH_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  return std::string(s);
}

inline Rng root_rng() {
  if (auto s = env_seed()) return Rng::from_seed(*s);
  return Rng::from_os();
}

}  // namespace onepath
