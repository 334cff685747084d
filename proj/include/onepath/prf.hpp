#pragma once

#include <sodium.h>

#include <cstdint>
#include <vector>

#include "onepath/common.hpp"
#include "onepath/rng.hpp"

namespace onepath {

// Seed of the feature-mask PRF: gamma bits, rounded up to whole bytes, with
// unused high bits of the first byte cleared.
struct PrfSeed {
  Bytes bytes;
  std::uint32_t gamma = 0;

  static std::size_t byte_length(std::uint32_t gamma) { return (gamma + 7) / 8; }

  static PrfSeed sample(std::uint32_t gamma, Rng& rng) {
    if (gamma == 0) throw ParameterError("PRF seed needs gamma >= 1");
    PrfSeed s{rng.bytes(byte_length(gamma)), gamma};
    if (gamma % 8) s.bytes[0] &= static_cast<std::uint8_t>((1u << (gamma % 8)) - 1);
    return s;
  }

  static PrfSeed from_bytes(ByteSpan b, std::uint32_t gamma) {
    if (gamma == 0 || b.size() != byte_length(gamma))
      throw FormatError("PRF seed length does not match gamma = " + std::to_string(gamma));
    if (gamma % 8 && (b[0] >> (gamma % 8)) != 0) throw FormatError("PRF seed has bits beyond gamma");
    return PrfSeed{Bytes(b.begin(), b.end()), gamma};
  }

  friend bool operator==(const PrfSeed&, const PrfSeed&) = default;
};

// F(seed, node_index) in Z_{2^l}^n. BLAKE2b-512 in counter mode over
// (domain, |seed|, seed, node_index, counter); each 64-byte block yields
// eight little-endian 64-bit words reduced mod 2^l.
inline std::vector<std::uint64_t> prf_eval(const PrfSeed& seed, std::uint32_t node_index,
                                           std::size_t n, unsigned ring_bits) {
  if (node_index < 1 || node_index > seed.gamma)
    throw ParameterError("PRF node index " + std::to_string(node_index) + " outside [1, " +
                         std::to_string(seed.gamma) + "]");
  if (n == 0) throw ParameterError("PRF output length must be >= 1");
  if (ring_bits == 0 || ring_bits > 64) throw ParameterError("PRF ring width out of range");
  ensure_sodium();
  const std::uint64_t mask = ring_bits == 64 ? ~0ull : (1ull << ring_bits) - 1;

  std::vector<std::uint64_t> out;
  out.reserve(n);
  ByteWriter in;
  in.raw(std::string_view("onepath-prf-v1"));
  in.u32be(static_cast<std::uint32_t>(seed.bytes.size()));
  in.raw(seed.bytes);
  in.u32be(node_index);
  const std::size_t ctr_pos = in.size();
  in.u32be(0);
  Bytes msg = std::move(in).take();

  std::array<std::uint8_t, 64> block{};
  for (std::uint32_t ctr = 0; out.size() < n; ++ctr) {
    for (int i = 0; i < 4; ++i) msg[ctr_pos + i] = static_cast<std::uint8_t>(ctr >> (24 - 8 * i));
    crypto_generichash(block.data(), block.size(), msg.data(), msg.size(), nullptr, 0);
    for (std::size_t w = 0; w < 8 && out.size() < n; ++w) {
      std::uint64_t v = 0;
      for (std::size_t b = 8; b-- > 0;) v = (v << 8) | block[8 * w + b];
      out.push_back(v & mask);
    }
  }
  return out;
}

}  // namespace onepath
