#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "onepath/common.hpp"
#include "onepath/rng.hpp"

namespace onepath {

// Z_{2^l}. Arithmetic is done in uint64_t and masked; 2^l divides 2^64 so
// wraparound is exact.
class RingParams {
 public:
  explicit RingParams(unsigned bits) : bits_(bits) {
    if (bits < 1 || bits > 63) throw ParameterError("ring width l must be in [1, 63]");
  }

  unsigned bits() const { return bits_; }
  std::uint64_t modulus() const { return std::uint64_t{1} << bits_; }
  std::uint64_t mask() const { return modulus() - 1; }
  std::uint64_t half() const { return std::uint64_t{1} << (bits_ - 1); }
  std::size_t entry_bytes() const { return (bits_ + 7) / 8; }

  std::uint64_t reduce(std::uint64_t v) const { return v & mask(); }
  std::uint64_t add(std::uint64_t a, std::uint64_t b) const { return (a + b) & mask(); }
  std::uint64_t sub(std::uint64_t a, std::uint64_t b) const { return (a - b) & mask(); }
  std::uint64_t neg(std::uint64_t a) const { return (0 - a) & mask(); }
  std::uint64_t mul(std::uint64_t a, std::uint64_t b) const { return (a * b) & mask(); }
  bool contains(std::uint64_t v) const { return v <= mask(); }

  friend bool operator==(const RingParams&, const RingParams&) = default;

 private:
  unsigned bits_;
};

enum class Party : std::uint8_t { One = 1, Two = 2 };

struct Share {
  std::uint64_t value = 0;
  Party party = Party::One;
};

// share1 = value - r, share2 = r.
inline std::pair<Share, Share> split_with_mask(const RingParams& ring, std::uint64_t value, std::uint64_t r) {
  if (!ring.contains(value) || !ring.contains(r)) throw ParameterError("value outside Z_{2^l}");
  return {Share{ring.sub(value, r), Party::One}, Share{r, Party::Two}};
}

inline std::pair<Share, Share> split(const RingParams& ring, std::uint64_t value, Rng& rng) {
  if (!ring.contains(value)) throw ParameterError("value outside Z_{2^l}");
  return split_with_mask(ring, value, rng.uniform(ring.modulus()));
}

inline std::uint64_t reconstruct(const RingParams& ring, Share a, Share b) {
  if (a.party == b.party) throw ProtocolError("reconstruct needs one share from each party");
  return ring.add(a.value, b.value);
}

inline std::int64_t signed_decode(const RingParams& ring, std::uint64_t v) {
  v = ring.reduce(v);
  if (v < ring.half()) return static_cast<std::int64_t>(v);
  return static_cast<std::int64_t>(v) - static_cast<std::int64_t>(ring.modulus());
}

inline std::uint64_t signed_encode(const RingParams& ring, std::int64_t v) {
  return ring.reduce(static_cast<std::uint64_t>(v));
}

inline std::uint64_t dot_mod(const RingParams& ring, std::span<const std::uint64_t> a,
                             std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw ParameterError("dot_mod length mismatch");
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return ring.reduce(acc);
}

// One party's query material: feature shares <x>^p, the gamma offset
// shares <x_j>^p, and (for files kept by the user) the unit share <1>^p.
struct ShareVector {
  Party party = Party::One;
  unsigned ring_bits = 16;
  std::vector<std::uint64_t> features;
  std::vector<std::uint64_t> offsets;
  std::optional<std::uint64_t> unit;

  friend bool operator==(const ShareVector&, const ShareVector&) = default;
};

// "OP1S" | l u8 | n u32be | gamma u32be | party u8 | has_unit u8 |
// entries packed little-endian, ceil(l/8) bytes each: features, offsets, unit.
inline Bytes encode_share_vector(const ShareVector& sv) {
  const RingParams ring(sv.ring_bits);
  ByteWriter w;
  w.raw(std::string_view("OP1S"));
  w.u8(static_cast<std::uint8_t>(sv.ring_bits));
  w.u32be(static_cast<std::uint32_t>(sv.features.size()));
  w.u32be(static_cast<std::uint32_t>(sv.offsets.size()));
  w.u8(static_cast<std::uint8_t>(sv.party));
  w.u8(sv.unit ? 1 : 0);
  auto put = [&](std::uint64_t v) {
    if (!ring.contains(v)) throw FormatError("share entry outside Z_{2^l}");
    w.uint_le(v, ring.entry_bytes());
  };
  for (auto v : sv.features) put(v);
  for (auto v : sv.offsets) put(v);
  if (sv.unit) put(*sv.unit);
  return std::move(w).take();
}

inline ShareVector decode_share_vector(ByteSpan data) {
  ByteReader r(data);
  r.expect_magic("OP1S");
  ShareVector sv;
  sv.ring_bits = r.u8();
  const RingParams ring(sv.ring_bits);
  const std::uint32_t n = r.u32be();
  const std::uint32_t gamma = r.u32be();
  const std::uint8_t party = r.u8();
  if (party != 1 && party != 2) throw FormatError("share party tag must be 1 or 2");
  sv.party = static_cast<Party>(party);
  const std::uint8_t has_unit = r.u8();
  if (has_unit > 1) throw FormatError("bad unit flag");
  const std::size_t width = ring.entry_bytes();
  if (r.remaining() != (std::size_t{n} + gamma + has_unit) * width)
    throw FormatError("share payload length does not match header");
  auto get = [&] {
    const std::uint64_t v = r.uint_le(width);
    if (!ring.contains(v)) throw FormatError("share entry outside Z_{2^l}");
    return v;
  };
  sv.features.resize(n);
  for (auto& v : sv.features) v = get();
  sv.offsets.resize(gamma);
  for (auto& v : sv.offsets) v = get();
  if (has_unit) sv.unit = get();
  r.expect_done();
  return sv;
}

}  // namespace onepath
