#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "onepath/params.hpp"
#include "onepath/prf.hpp"
#include "onepath/sharing.hpp"
#include "onepath/ske.hpp"

namespace onepath {

using SessionId = std::array<std::uint8_t, 16>;

struct UnitShares {
  std::uint64_t one = 0;  // <1>^1
  std::uint64_t two = 0;  // <1>^2

  friend bool operator==(const UnitShares&, const UnitShares&) = default;
};

struct QueryBundle {
  SessionId session{};
  ShareVector cs1;
  ShareVector cs2;
  UnitShares unit;  // -> KGC
};

inline SessionId new_session_id(Rng& rng) {
  SessionId s;
  rng.fill(s);
  return s;
}

// <x_j>^p = (-F(seed, j))^T <x>^p for every j in [1, gamma].
inline std::vector<std::uint64_t> offset_shares(const PrfSeed& seed, const RingParams& ring,
                                                std::span<const std::uint64_t> x_share) {
  const auto n = static_cast<std::uint32_t>(x_share.size());
  std::vector<std::uint64_t> out(seed.gamma);
  for (std::uint32_t j = 1; j <= seed.gamma; ++j) {
    auto mask = prf_eval(seed, j, n, ring.bits());
    for (auto& m : mask) m = ring.neg(m);
    out[j - 1] = dot_mod(ring, mask, x_share);
  }
  return out;
}

inline QueryBundle prepare_query(std::span<const std::uint32_t> x, const PrfSeed& seed, const ProtocolParams& params,
                                 std::uint32_t gamma, Rng& rng) {
  const RingParams ring = params.ring();
  if (seed.gamma != gamma) throw ParameterError("PRF seed covers " + std::to_string(seed.gamma) +
                                                " indexes but the tree has gamma = " + std::to_string(gamma));
  if (x.empty()) throw ParameterError("query needs n >= 1");

  QueryBundle q;
  q.session = new_session_id(rng);
  q.cs1 = ShareVector{Party::One, ring.bits(), {}, {}, std::nullopt};
  q.cs2 = ShareVector{Party::Two, ring.bits(), {}, {}, std::nullopt};
  for (std::size_t f = 0; f < x.size(); ++f) {
    if (x[f] >= params.feature_limit())
      throw ParameterError("feature " + std::to_string(f) + " = " + std::to_string(x[f]) + " outside [0, 2^t)");
    auto [a, b] = split(ring, x[f], rng);
    q.cs1.features.push_back(a.value);
    q.cs2.features.push_back(b.value);
  }
  auto [u1, u2] = split(ring, 1, rng);
  q.unit = UnitShares{u1.value, u2.value};
  q.cs1.offsets = offset_shares(seed, ring, q.cs1.features);
  q.cs2.offsets = offset_shares(seed, ring, q.cs2.features);
  return q;
}

inline PrfSeed open_seed(const Bytes& seed_ct, const SymmetricKey& sk3, std::uint32_t gamma) {
  return PrfSeed::from_bytes(ske_decrypt(sk3, seed_ct), gamma);
}

inline std::string decrypt_result(ByteSpan label_ct, const SymmetricKey& sk3) {
  return to_string(ske_decrypt(sk3, label_ct));
}

}  // namespace onepath
