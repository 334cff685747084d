#pragma once

#include <cstdint>
#include <string>

#include "onepath/common.hpp"
#include "onepath/group.hpp"
#include "onepath/sharing.hpp"

namespace onepath {

// Public configuration agreed by every entity.
//
// Node tests become R = A + B*X with B = 2b, A = 1 - 2b*Theta, b in [1, 99],
// X and Theta in [0, 2^t). Hence |R| <= A_max = 1 + 198*(2^t - 1) and every
// per-server partial A*<1>^p + B*<x_i>^p lies in [-W, W] with
// W = (A_max + B_max) * 2^l.
struct ProtocolParams {
  static constexpr std::int64_t kSlopeMax = 99;
  static constexpr unsigned kMinRingBits = 8;
  static constexpr unsigned kMaxRingBits = 32;
  static constexpr std::uint64_t kMaxDlogWindow = std::uint64_t{1} << 40;

  int security_bits = 128;
  unsigned ring_bits = 16;
  unsigned feature_bits = 7;

  RingParams ring() const { return RingParams(ring_bits); }
  std::uint64_t feature_limit() const { return std::uint64_t{1} << feature_bits; }
  std::int64_t a_max() const {
    return 1 + 2 * kSlopeMax * (static_cast<std::int64_t>(feature_limit()) - 1);
  }
  std::int64_t b_max() const { return 2 * kSlopeMax; }
  std::uint64_t dlog_window() const {
    return static_cast<std::uint64_t>(a_max() + b_max()) << ring_bits;
  }

  // Throws ParameterError naming the violated inequality.
  void validate() const {
    if (security_bits != 112 && security_bits != 128)
      throw ParameterError("security level must be 112 or 128, got " + std::to_string(security_bits));
    if (ring_bits < kMinRingBits || ring_bits > kMaxRingBits)
      throw ParameterError("ring width l = " + std::to_string(ring_bits) + " outside [" +
                           std::to_string(kMinRingBits) + ", " + std::to_string(kMaxRingBits) +
                           "]: the per-share window (A_max + B_max) * 2^l must stay within "
                           "discrete-log recovery range; use l <= 32");
    if (feature_bits < 1 || feature_bits >= ring_bits)
      throw ParameterError("feature bits t = " + std::to_string(feature_bits) + " must be in [1, l)");
    const std::uint64_t half = std::uint64_t{1} << (ring_bits - 1);
    if (static_cast<std::uint64_t>(a_max()) >= half)
      throw ParameterError("signed decode needs A_max = 1 + 198*(2^t - 1) = " + std::to_string(a_max()) +
                           " < 2^(l-1) = " + std::to_string(half) + "; lower t or raise l");
    if (dlog_window() > kMaxDlogWindow)
      throw ParameterError("dlog window W = (A_max + B_max) * 2^l = " + std::to_string(dlog_window()) +
                           " exceeds the feasible bound 2^40; lower l or t");
  }

  // Also checks W against the group order (recovery uniqueness).
  void validate(const GroupParams& gp) const {
    validate();
    if (mpz_class(2) * mpz_class(static_cast<unsigned long>(dlog_window())) + 1 >= gp.q)
      throw ParameterError("dlog window W must satisfy 2W + 1 < q");
  }

  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

}  // namespace onepath
