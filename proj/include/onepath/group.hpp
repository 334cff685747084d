#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "onepath/common.hpp"
#include "onepath/rng.hpp"

namespace onepath {

inline std::size_t bit_length(const mpz_class& x) { return mpz_sizeinbase(x.get_mpz_t(), 2); }

// Big-endian, left-padded to exactly `width` bytes.
inline Bytes mpz_to_bytes(const mpz_class& x, std::size_t width) {
  if (x < 0) throw FormatError("negative integer cannot be serialized");
  const std::size_t need = (bit_length(x) + 7) / 8;
  if (x != 0 && need > width) throw FormatError("integer wider than field");
  Bytes out(width, 0);
  if (x != 0) {
    std::size_t count = 0;
    mpz_export(out.data() + (width - need), &count, 1, 1, 1, 0, x.get_mpz_t());
  }
  return out;
}

inline mpz_class mpz_from_bytes(ByteSpan b) {
  mpz_class x;
  if (!b.empty()) mpz_import(x.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
  return x;
}

// Prime-order subgroup of Z_p^*: p = k*q + 1, g of order q.
struct GroupParams {
  int security_bits = 0;
  mpz_class p;
  mpz_class q;
  mpz_class g;

  std::size_t element_bytes() const { return (bit_length(p) + 7) / 8; }
  std::size_t scalar_bytes() const { return (bit_length(q) + 7) / 8; }

  mpz_class mul(const mpz_class& a, const mpz_class& b) const {
    mpz_class r = a * b;
    mpz_mod(r.get_mpz_t(), r.get_mpz_t(), p.get_mpz_t());
    return r;
  }

  // base^e for any integer e (exponents are taken mod q).
  mpz_class pow(const mpz_class& base, const mpz_class& e) const {
    mpz_class r;
    mpz_class ee = e;
    if (ee < 0 || ee >= q) mpz_mod(ee.get_mpz_t(), ee.get_mpz_t(), q.get_mpz_t());
    mpz_powm(r.get_mpz_t(), base.get_mpz_t(), ee.get_mpz_t(), p.get_mpz_t());
    return r;
  }

  mpz_class pow_g(const mpz_class& e) const { return pow(g, e); }

  mpz_class inverse(const mpz_class& a) const {
    mpz_class r;
    if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), p.get_mpz_t()) == 0)
      throw Error("element not invertible");
    return r;
  }

  bool in_range(const mpz_class& x) const { return x > 0 && x < p; }

  bool is_member(const mpz_class& x) const {
    if (!in_range(x)) return false;
    mpz_class r;
    mpz_powm(r.get_mpz_t(), x.get_mpz_t(), q.get_mpz_t(), p.get_mpz_t());
    return r == 1;
  }

  void validate() const {
    if (mpz_probab_prime_p(p.get_mpz_t(), 25) == 0) throw ParameterError("group modulus is not prime");
    if (mpz_probab_prime_p(q.get_mpz_t(), 25) == 0) throw ParameterError("group order is not prime");
    mpz_class pm1 = p - 1;
    if (!mpz_divisible_p(pm1.get_mpz_t(), q.get_mpz_t())) throw ParameterError("q does not divide p-1");
    if (g == 1 || !is_member(g)) throw ParameterError("generator does not have order q");
    if (bit_length(q) < static_cast<std::size_t>(2 * security_bits))
      throw ParameterError("group order shorter than twice the security level");
  }

  friend bool operator==(const GroupParams& a, const GroupParams& b) {
    return a.security_bits == b.security_bits && a.p == b.p && a.q == b.q && a.g == b.g;
  }
};

namespace detail {

// Expand a label into `bits` pseudorandom bits (BLAKE2b-512 counter mode).
inline mpz_class expand_label(std::string_view label, std::string_view tag, std::size_t bits) {
  ensure_sodium();
  const std::size_t nbytes = (bits + 7) / 8;
  Bytes out;
  for (std::uint32_t ctr = 0; out.size() < nbytes; ++ctr) {
    ByteWriter in;
    in.raw(label);
    in.u8(0);
    in.raw(tag);
    in.u32be(ctr);
    std::array<std::uint8_t, 64> block{};
    crypto_generichash(block.data(), block.size(), in.data().data(), in.size(), nullptr, 0);
    out.insert(out.end(), block.begin(), block.end());
  }
  out.resize(nbytes);
  mpz_class x = mpz_from_bytes(out);
  mpz_fdiv_r_2exp(x.get_mpz_t(), x.get_mpz_t(), bits);
  mpz_setbit(x.get_mpz_t(), bits - 1);
  return x;
}

}  // namespace detail

// Deterministic Schnorr group from a label: q = next prime after the
// expanded label, p = the first prime of the form k*q + 1 at or above the
// expanded p-label.
inline GroupParams derive_group(std::string_view label, std::size_t p_bits, std::size_t q_bits,
                                int security_bits) {
  GroupParams gp;
  gp.security_bits = security_bits;
  mpz_class qseed = detail::expand_label(label, "q", q_bits);
  mpz_nextprime(gp.q.get_mpz_t(), qseed.get_mpz_t());
  if (bit_length(gp.q) != q_bits) throw ParameterError("q derivation overflowed its bit length");

  const mpz_class two_q = 2 * gp.q;
  mpz_class x = detail::expand_label(label, "p", p_bits);
  mpz_class r;
  mpz_fdiv_r(r.get_mpz_t(), x.get_mpz_t(), two_q.get_mpz_t());
  gp.p = x - r + 1;
  mpz_class low;
  mpz_ui_pow_ui(low.get_mpz_t(), 2, p_bits - 1);
  if (gp.p < low) gp.p += two_q;

  // Cheap sieve before the probabilistic test.
  static constexpr unsigned kSmallPrimes[] = {3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43,
                                              47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101,
                                              103, 107, 109, 113, 127, 131, 137, 139, 149, 151};
  std::vector<unsigned long> res, step;
  for (unsigned sp : kSmallPrimes) {
    res.push_back(mpz_fdiv_ui(gp.p.get_mpz_t(), sp));
    step.push_back(mpz_fdiv_ui(two_q.get_mpz_t(), sp));
  }
  for (;;) {
    bool composite = false;
    for (std::size_t i = 0; i < res.size(); ++i) {
      if (res[i] == 0) {
        composite = true;
        break;
      }
    }
    if (!composite && mpz_probab_prime_p(gp.p.get_mpz_t(), 30) != 0) break;
    gp.p += two_q;
    for (std::size_t i = 0; i < res.size(); ++i) res[i] = (res[i] + step[i]) % kSmallPrimes[i];
  }
  if (bit_length(gp.p) != p_bits) throw ParameterError("p derivation overflowed its bit length");

  const mpz_class cofactor = (gp.p - 1) / gp.q;
  for (unsigned long h = 2;; ++h) {
    mpz_class base = h;
    mpz_powm(gp.g.get_mpz_t(), base.get_mpz_t(), cofactor.get_mpz_t(), gp.p.get_mpz_t());
    if (gp.g != 1) break;
  }
  return gp;
}

// Standard parameter sets: 112-bit -> 2048/224, 128-bit -> 3072/256.
// Derived once per process and cached.
inline const GroupParams& group_setup(int security_bits) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GroupParams>> cache;
  std::size_t p_bits = 0, q_bits = 0;
  if (security_bits == 112) {
    p_bits = 2048;
    q_bits = 224;
  } else if (security_bits == 128) {
    p_bits = 3072;
    q_bits = 256;
  } else {
    throw ParameterError("unsupported security level " + std::to_string(security_bits) +
                         " (supported: 112, 128)");
  }
  std::lock_guard lock(mu);
  auto& slot = cache[security_bits];
  if (!slot) {
    slot = std::make_unique<GroupParams>(derive_group(
        "onepath-group-v1/" + std::to_string(security_bits), p_bits, q_bits, security_bits));
  }
  return *slot;
}

// Length-prefixed fixed-width group element.
inline void write_element(ByteWriter& w, const GroupParams& gp, const mpz_class& x) {
  w.lp_bytes(mpz_to_bytes(x, gp.element_bytes()));
}

inline mpz_class read_element(ByteReader& r, const GroupParams& gp) {
  auto b = r.lp_bytes(gp.element_bytes());
  mpz_class x = mpz_from_bytes(b);
  if (!gp.in_range(x)) throw FormatError("group element out of range");
  return x;
}

inline void write_scalar(ByteWriter& w, const GroupParams& gp, const mpz_class& x) {
  w.lp_bytes(mpz_to_bytes(x, gp.scalar_bytes()));
}

inline mpz_class read_scalar(ByteReader& r, const GroupParams& gp) {
  mpz_class x = mpz_from_bytes(r.lp_bytes(gp.scalar_bytes()));
  if (x >= gp.q) throw FormatError("scalar out of range");
  return x;
}

// Length-prefixed big-endian integers: security, p, q, g.
inline void write_group(ByteWriter& w, const GroupParams& gp) {
  w.u32be(static_cast<std::uint32_t>(gp.security_bits));
  for (const mpz_class* x : {&gp.p, &gp.q, &gp.g}) w.lp_bytes(mpz_to_bytes(*x, (bit_length(*x) + 7) / 8));
}

inline GroupParams read_group(ByteReader& r) {
  GroupParams gp;
  gp.security_bits = static_cast<int>(r.u32be());
  gp.p = mpz_from_bytes(r.lp_bytes(4096));
  gp.q = mpz_from_bytes(r.lp_bytes(4096));
  gp.g = mpz_from_bytes(r.lp_bytes(4096));
  return gp;
}

// Fixed-base windowed exponentiation: base^e with one multiplication per
// w-bit window of e, after a one-time table build.
class FixedBase {
 public:
  FixedBase(const GroupParams& gp, const mpz_class& base, unsigned window_bits = 8)
      : p_(gp.p), q_(gp.q), w_(window_bits) {
    const std::size_t qbits = bit_length(gp.q);
    windows_ = (qbits + w_ - 1) / w_;
    const std::size_t per = std::size_t{1} << w_;
    table_.resize(windows_ * per);
    mpz_class b = base;
    for (std::size_t k = 0; k < windows_; ++k) {
      mpz_class* row = &table_[k * per];
      row[0] = 1;
      for (std::size_t j = 1; j < per; ++j) row[j] = gp.mul(row[j - 1], b);
      b = gp.mul(row[per - 1], b);  // base^(2^(w*(k+1)))
    }
  }

  mpz_class pow(const mpz_class& e) const {
    mpz_class ee = e;
    if (ee < 0 || ee >= q_) mpz_mod(ee.get_mpz_t(), ee.get_mpz_t(), q_.get_mpz_t());
    const std::size_t per = std::size_t{1} << w_;
    mpz_class acc = 1;
    mpz_class t;
    const std::size_t nbits = bit_length(ee);
    for (std::size_t k = 0; k < windows_ && k * w_ < nbits; ++k) {
      unsigned long digit = 0;
      for (unsigned b = 0; b < w_; ++b) {
        if (mpz_tstbit(ee.get_mpz_t(), k * w_ + b)) digit |= 1ul << b;
      }
      if (digit == 0) continue;
      mpz_mul(t.get_mpz_t(), acc.get_mpz_t(), table_[k * per + digit].get_mpz_t());
      mpz_mod(acc.get_mpz_t(), t.get_mpz_t(), p_.get_mpz_t());
    }
    return acc;
  }

 private:
  mpz_class p_, q_;
  unsigned w_;
  std::size_t windows_ = 0;
  std::vector<mpz_class> table_;
};

}  // namespace onepath
