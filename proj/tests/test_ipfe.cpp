#include "support.hpp"

using namespace onepath;
using onepath::testing::default_keys;

namespace {

const DlogTable& table() {
  static auto t = shared_dlog_table(default_keys().group(), default_keys().params.dlog_window());
  return *t;
}

std::int64_t inner(std::array<std::int64_t, 2> m, std::array<std::uint64_t, 2> y) {
  return m[0] * static_cast<std::int64_t>(y[0]) + m[1] * static_cast<std::int64_t>(y[1]);
}

}  // namespace

TEST(Ipfe, WorkedVector) {
  const auto& km = default_keys();
  Rng rng = Rng::from_seed("ipfe-vector");
  const auto ct = ipfe_encrypt(km.ipfe.mpk, {1, 2}, rng);
  EXPECT_EQ(ipfe_decrypt(km.ipfe.mpk, ct, ipfe_keyder(km.ipfe.msk, km.group(), {3, 4}), table()), 11);
}

TEST(Ipfe, NegativeSlot) {
  const auto& km = default_keys();
  Rng rng = Rng::from_seed("ipfe-neg");
  const auto ct = ipfe_encrypt(km.ipfe.mpk, {-9, 2}, rng);
  EXPECT_EQ(ipfe_decrypt(km.ipfe.mpk, ct, ipfe_keyder(km.ipfe.msk, km.group(), {1, 6}), table()), 3);
}

TEST(Ipfe, ZeroMessageAndZeroKey) {
  const auto& km = default_keys();
  Rng rng = Rng::from_seed("ipfe-zero");
  const auto zero = ipfe_encrypt(km.ipfe.mpk, {0, 0}, rng);
  EXPECT_EQ(ipfe_decrypt(km.ipfe.mpk, zero, ipfe_keyder(km.ipfe.msk, km.group(), {65535, 12345}), table()), 0);
  const auto ct = ipfe_encrypt(km.ipfe.mpk, {-25147, 198}, rng);
  const auto k0 = ipfe_keyder(km.ipfe.msk, km.group(), {0, 0});
  EXPECT_EQ(k0.sk, 0);
  EXPECT_EQ(ipfe_decrypt(km.ipfe.mpk, ct, k0, table()), 0);
  EXPECT_EQ(ipfe_keyder(km.ipfe.msk, km.group(), {1, 0}).sk, km.ipfe.msk.s1);
}

TEST(Ipfe, RandomInBoundPairsMatchIntegerInnerProduct) {
  const auto& km = default_keys();
  const auto& p = km.params;
  Rng rng = Rng::from_seed("ipfe-random");
  for (int i = 0; i < 500; ++i) {
    const std::array<std::int64_t, 2> m{rng.uniform_int(-p.a_max(), p.a_max()), rng.uniform_int(-p.b_max(), p.b_max())};
    const std::array<std::uint64_t, 2> y{rng.uniform(p.ring().modulus()), rng.uniform(p.ring().modulus())};
    const auto ct = ipfe_encrypt(km.ipfe.mpk, m, rng);
    ASSERT_EQ(ipfe_decrypt(km.ipfe.mpk, ct, ipfe_keyder(km.ipfe.msk, km.group(), y), table()), inner(m, y))
        << "m = (" << m[0] << ", " << m[1] << "), y = (" << y[0] << ", " << y[1] << ")";
  }
}

TEST(Ipfe, KeyDerivationIsLinear) {
  const auto& km = default_keys();
  const auto& gp = km.group();
  Rng rng = Rng::from_seed("ipfe-linear");
  for (int i = 0; i < 100; ++i) {
    const std::array<std::uint64_t, 2> y{rng.uniform(1u << 16), rng.uniform(1u << 16)};
    const std::array<std::uint64_t, 2> z{rng.uniform(1u << 16), rng.uniform(1u << 16)};
    mpz_class sum = ipfe_keyder(km.ipfe.msk, gp, y).sk + ipfe_keyder(km.ipfe.msk, gp, z).sk;
    mpz_mod(sum.get_mpz_t(), sum.get_mpz_t(), gp.q.get_mpz_t());
    ASSERT_EQ(sum, ipfe_keyder(km.ipfe.msk, gp, {y[0] + z[0], y[1] + z[1]}).sk);
  }
}

TEST(Ipfe, SetupPublishesGToTheSecrets) {
  const GroupParams& gp = group_setup(112);
  Rng rng = Rng::from_seed("ipfe-setup");
  const auto a = ipfe_setup(gp, {10, 10}, rng);
  const auto b = ipfe_setup(gp, {10, 10}, rng);
  EXPECT_EQ(a.mpk.pk1(), gp.pow_g(a.msk.s1));
  EXPECT_EQ(a.mpk.pk2(), gp.pow_g(a.msk.s2));
  EXPECT_NE(a.msk.s1, b.msk.s1);
  EXPECT_THROW(ipfe_setup(gp, {0, 10}, rng), ParameterError);
}

TEST(Ipfe, BoundsEnforcedAtEncrypt) {
  const auto& km = default_keys();
  Rng rng = Rng::from_seed("ipfe-bounds");
  const auto a = km.params.a_max(), b = km.params.b_max();
  EXPECT_NO_THROW(ipfe_encrypt(km.ipfe.mpk, {-a, b}, rng));
  EXPECT_THROW(ipfe_encrypt(km.ipfe.mpk, {a + 1, 0}, rng), ParameterError);
  EXPECT_THROW(ipfe_encrypt(km.ipfe.mpk, {0, -b - 1}, rng), ParameterError);
}

TEST(Ipfe, EncryptionIsRandomized) {
  const auto& km = default_keys();
  Rng rng = Rng::from_seed("ipfe-fresh");
  const auto c1 = ipfe_encrypt(km.ipfe.mpk, {1, 2}, rng), c2 = ipfe_encrypt(km.ipfe.mpk, {1, 2}, rng);
  EXPECT_NE(c1.c0, c2.c0);
  EXPECT_NE(c1.c1, c2.c1);
}

TEST(Ipfe, PrecomputedTablesAgreeWithPlainExponentiation) {
  const GroupParams& gp = group_setup(112);
  Rng rng = Rng::from_seed("ipfe-fixed-base");
  auto keys = ipfe_setup(gp, {100, 100}, rng);
  IpfePublicKey plain = keys.mpk;
  keys.mpk.precompute();
  for (int i = 0; i < 20; ++i) {
    const mpz_class e = rng.uniform_mpz(gp.q);
    ASSERT_EQ(keys.mpk.pow_g(e), plain.pow_g(e));
    ASSERT_EQ(keys.mpk.pow_pk1(e), plain.pow_pk1(e));
    ASSERT_EQ(keys.mpk.pow_pk2(e), plain.pow_pk2(e));
  }
}

TEST(Ipfe, CiphertextSerializationRoundTrip) {
  const auto& km = default_keys();
  Rng rng = Rng::from_seed("ipfe-ser");
  const auto ct = ipfe_encrypt(km.ipfe.mpk, {-7, 3}, rng);
  ByteWriter w;
  write_ciphertext(w, km.group(), ct);
  const Bytes b = std::move(w).take();
  ByteReader r(b);
  const auto back = read_ciphertext(r, km.group());
  EXPECT_EQ(back.c0, ct.c0);
  EXPECT_EQ(back.c1, ct.c1);
  EXPECT_EQ(back.c2, ct.c2);
  EXPECT_EQ(b.size(), 3 * (4 + km.group().element_bytes()));
}
