#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "onepath/group.hpp"

namespace onepath {

// Baby-step/giant-step table for exponents in the signed window [-W, W].
//
// The element h = g^e is shifted to h * g^W = g^(e + W) with e + W in
// [0, 2W]. Baby steps g^j (j < M) are indexed by the low limb of their
// residue; giant steps multiply by g^(-M). Every fingerprint hit is
// confirmed against the full element, so a lookup never returns a wrong
// exponent.
class DlogTable {
 public:
  static constexpr std::uint64_t kDefaultBabyBudget = std::uint64_t{1} << 20;

  // baby_steps == 0 picks max(ceil(sqrt(2W+1)), min(2W+1, kDefaultBabyBudget)).
  DlogTable(const GroupParams& gp, std::uint64_t window, std::uint64_t baby_steps = 0)
      : gp_(gp), window_(window) {
    const mpz_class span = mpz_class(2) * mpz_class(static_cast<unsigned long>(window)) + 1;
    if (span >= gp.q) throw ParameterError("dlog window not below q/2; recovery would be ambiguous");
    const std::uint64_t width = 2 * window + 1;
    const auto root = static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<long double>(width))));
    if (baby_steps == 0) baby_steps = std::max(root, std::min(width, kDefaultBabyBudget));
    baby_steps = std::min(baby_steps, width);
    if (baby_steps > (std::uint64_t{1} << 32)) throw ParameterError("dlog baby-step table too large");
    baby_ = baby_steps;
    giant_ = (width + baby_ - 1) / baby_;

    entries_.reserve(baby_);
    mpz_class cur = 1;
    for (std::uint64_t j = 0; j < baby_; ++j) {
      entries_.push_back({fingerprint(cur), static_cast<std::uint32_t>(j)});
      cur = gp_.mul(cur, gp_.g);
    }
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) { return a.fp < b.fp || (a.fp == b.fp && a.j < b.j); });
    stride_ = gp_.inverse(cur);  // g^(-M)
    shift_ = gp_.pow_g(mpz_class(static_cast<unsigned long>(window_)));
  }

  std::uint64_t window() const { return window_; }
  std::uint64_t baby_steps() const { return baby_; }
  std::uint64_t giant_steps() const { return giant_; }
  const GroupParams& group() const { return gp_; }

  std::optional<std::int64_t> try_recover(const mpz_class& element) const {
    mpz_class cur = gp_.mul(element, shift_);
    for (std::uint64_t i = 0; i < giant_; ++i) {
      const std::uint64_t fp = fingerprint(cur);
      auto it = std::lower_bound(entries_.begin(), entries_.end(), fp,
                                 [](const Entry& e, std::uint64_t v) { return e.fp < v; });
      for (; it != entries_.end() && it->fp == fp; ++it) {
        const std::uint64_t shifted = i * baby_ + it->j;
        if (shifted > 2 * window_) continue;
        if (gp_.pow_g(mpz_class(static_cast<unsigned long>(it->j))) != cur) continue;
        return static_cast<std::int64_t>(shifted) - static_cast<std::int64_t>(window_);
      }
      cur = gp_.mul(cur, stride_);
    }
    return std::nullopt;
  }

 private:
  struct Entry {
    std::uint64_t fp;
    std::uint32_t j;
  };

  static std::uint64_t fingerprint(const mpz_class& x) {
    return static_cast<std::uint64_t>(mpz_getlimbn(x.get_mpz_t(), 0));
  }

  GroupParams gp_;
  std::uint64_t window_;
  std::uint64_t baby_ = 0;
  std::uint64_t giant_ = 0;
  std::vector<Entry> entries_;
  mpz_class stride_;
  mpz_class shift_;
};

inline std::int64_t dlog_recover(const DlogTable& table, const mpz_class& element) {
  if (auto e = table.try_recover(element)) return *e;
  throw DlogWindowError("discrete log outside window [-" + std::to_string(table.window()) + ", " +
                        std::to_string(table.window()) +
                        "]; ring width, feature bits and slope bound are inconsistent with W");
}

}  // namespace onepath
