#pragma once

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <memory>

#include "onepath/dlog.hpp"
#include "onepath/group.hpp"
#include "onepath/rng.hpp"

namespace onepath {

// Two-slot inner-product functional encryption over a DDH group.
//
//   Setup:   s_i <- Z_q, pk_i = g^{s_i}
//   Encrypt: ct_0 = g^r, ct_i = g^{m_i} pk_i^r
//   KeyDer:  sk_y = y_1 s_1 + y_2 s_2 mod q
//   Decrypt: dlog(ct_1^{y_1} ct_2^{y_2} / ct_0^{sk_y}) = <m, y>
//
// Messages are signed; negative slots are encoded as q - |m|.

struct MessageBounds {
  std::int64_t slot1 = 1;
  std::int64_t slot2 = 1;

  friend bool operator==(const MessageBounds&, const MessageBounds&) = default;
};

struct IpfeCiphertext {
  mpz_class c0, c1, c2;

  friend bool operator==(const IpfeCiphertext&, const IpfeCiphertext&) = default;
};

struct FunctionalKey {
  std::array<std::uint64_t, 2> y{};
  mpz_class sk;
};

class IpfePublicKey {
 public:
  IpfePublicKey(GroupParams gp, mpz_class pk1, mpz_class pk2, MessageBounds bounds)
      : gp_(std::move(gp)), pk1_(std::move(pk1)), pk2_(std::move(pk2)), bounds_(bounds) {}

  const GroupParams& group() const { return gp_; }
  const mpz_class& pk1() const { return pk1_; }
  const mpz_class& pk2() const { return pk2_; }
  const MessageBounds& bounds() const { return bounds_; }

  // Builds fixed-base tables for g, g^-1, pk_1, pk_2. Copies share them.
  void precompute() {
    if (!tables_) tables_ = std::make_shared<const Tables>(gp_, pk1_, pk2_);
  }
  bool precomputed() const { return tables_ != nullptr; }

  // g^m for small signed m.
  mpz_class pow_g_signed(std::int64_t m) const {
    const mpz_class mag(static_cast<unsigned long>(m < 0 ? -m : m));
    if (tables_) return m < 0 ? tables_->g_inv.pow(mag) : tables_->g.pow(mag);
    return m < 0 ? gp_.inverse(gp_.pow_g(mag)) : gp_.pow_g(mag);
  }
  mpz_class pow_g(const mpz_class& e) const { return tables_ ? tables_->g.pow(e) : gp_.pow_g(e); }
  mpz_class pow_pk1(const mpz_class& e) const { return tables_ ? tables_->pk1.pow(e) : gp_.pow(pk1_, e); }
  mpz_class pow_pk2(const mpz_class& e) const { return tables_ ? tables_->pk2.pow(e) : gp_.pow(pk2_, e); }

  friend bool operator==(const IpfePublicKey& a, const IpfePublicKey& b) {
    return a.gp_ == b.gp_ && a.pk1_ == b.pk1_ && a.pk2_ == b.pk2_ && a.bounds_ == b.bounds_;
  }

 private:
  struct Tables {
    Tables(const GroupParams& gp, const mpz_class& pk1, const mpz_class& pk2)
        : g(gp, gp.g), g_inv(gp, gp.inverse(gp.g)), pk1(gp, pk1), pk2(gp, pk2) {}
    FixedBase g, g_inv, pk1, pk2;
  };

  GroupParams gp_;
  mpz_class pk1_, pk2_;
  MessageBounds bounds_;
  std::shared_ptr<const Tables> tables_;
};

struct IpfeSecretKey {
  mpz_class s1, s2;

  friend bool operator==(const IpfeSecretKey&, const IpfeSecretKey&) = default;
};

struct IpfeMasterKeys {
  IpfePublicKey mpk;
  IpfeSecretKey msk;
};

inline IpfeMasterKeys ipfe_setup(const GroupParams& gp, MessageBounds bounds, Rng& rng) {
  if (bounds.slot1 < 1 || bounds.slot2 < 1) throw ParameterError("IPFE message bound must be >= 1");
  IpfeSecretKey msk{rng.uniform_mpz(gp.q), rng.uniform_mpz(gp.q)};
  IpfePublicKey mpk(gp, gp.pow_g(msk.s1), gp.pow_g(msk.s2), bounds);
  return {std::move(mpk), std::move(msk)};
}

inline IpfeCiphertext ipfe_encrypt(const IpfePublicKey& mpk, std::array<std::int64_t, 2> m, Rng& rng) {
  if (m[0] > mpk.bounds().slot1 || m[0] < -mpk.bounds().slot1 || m[1] > mpk.bounds().slot2 ||
      m[1] < -mpk.bounds().slot2)
    throw ParameterError("IPFE message (" + std::to_string(m[0]) + ", " + std::to_string(m[1]) +
                         ") exceeds coefficient bounds (" + std::to_string(mpk.bounds().slot1) + ", " +
                         std::to_string(mpk.bounds().slot2) + ")");
  const GroupParams& gp = mpk.group();
  const mpz_class r = rng.uniform_mpz(gp.q);
  IpfeCiphertext ct;
  ct.c0 = mpk.pow_g(r);
  ct.c1 = gp.mul(mpk.pow_g_signed(m[0]), mpk.pow_pk1(r));
  ct.c2 = gp.mul(mpk.pow_g_signed(m[1]), mpk.pow_pk2(r));
  return ct;
}

inline FunctionalKey ipfe_keyder(const IpfeSecretKey& msk, const GroupParams& gp,
                                 std::array<std::uint64_t, 2> y) {
  FunctionalKey fk;
  fk.y = y;
  fk.sk = mpz_class(static_cast<unsigned long>(y[0])) * msk.s1 +
          mpz_class(static_cast<unsigned long>(y[1])) * msk.s2;
  mpz_mod(fk.sk.get_mpz_t(), fk.sk.get_mpz_t(), gp.q.get_mpz_t());
  return fk;
}

inline std::int64_t ipfe_decrypt(const IpfePublicKey& mpk, const IpfeCiphertext& ct,
                                 const FunctionalKey& fk, const DlogTable& table) {
  const GroupParams& gp = mpk.group();
  mpz_class acc = gp.mul(gp.pow(ct.c1, mpz_class(static_cast<unsigned long>(fk.y[0]))),
                         gp.pow(ct.c2, mpz_class(static_cast<unsigned long>(fk.y[1]))));
  acc = gp.mul(acc, gp.pow(ct.c0, gp.q - fk.sk));  // ct_0^{-sk_y}
  return dlog_recover(table, acc);
}

inline void write_ciphertext(ByteWriter& w, const GroupParams& gp, const IpfeCiphertext& ct) {
  write_element(w, gp, ct.c0);
  write_element(w, gp, ct.c1);
  write_element(w, gp, ct.c2);
}

inline IpfeCiphertext read_ciphertext(ByteReader& r, const GroupParams& gp) {
  IpfeCiphertext ct;
  ct.c0 = read_element(r, gp);
  ct.c1 = read_element(r, gp);
  ct.c2 = read_element(r, gp);
  return ct;
}

inline void write_functional_key(ByteWriter& w, const GroupParams& gp, const FunctionalKey& fk) {
  w.u64be(fk.y[0]);
  w.u64be(fk.y[1]);
  write_scalar(w, gp, fk.sk);
}

inline FunctionalKey read_functional_key(ByteReader& r, const GroupParams& gp) {
  FunctionalKey fk;
  fk.y[0] = r.u64be();
  fk.y[1] = r.u64be();
  fk.sk = read_scalar(r, gp);
  return fk;
}

}  // namespace onepath
