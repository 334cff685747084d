#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "onepath/entities.hpp"
#include "onepath/tree.hpp"

namespace onepath {

// Key and model files.
//
//   "OP1K" | version | role | body
//
// role 1..3 are sk1..sk3 (32 raw key bytes), the rest are below.
enum class FileRole : std::uint8_t {
  Sk1 = 1,
  Sk2 = 2,
  Sk3 = 3,
  Params = 0x10,  // security | l | t | group
  Mpk = 0x11,     // group | pk1 | pk2 | A_max | B_max
  Msk = 0x12,     // s1 | s2
  SeedCt = 0x20,  // gamma | lp ciphertext
};

inline constexpr std::uint8_t kKeyFileVersion = 1;

inline Bytes read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& p, ByteSpan data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("short write to " + p.string());
}

namespace detail {

inline ByteWriter key_header(FileRole role) {
  ByteWriter w;
  w.raw(std::string_view("OP1K"));
  w.u8(kKeyFileVersion);
  w.u8(static_cast<std::uint8_t>(role));
  return w;
}

inline void expect_key_header(ByteReader& r, FileRole role) {
  r.expect_magic("OP1K");
  if (r.u8() != kKeyFileVersion) throw FormatError("unsupported OP1K version");
  const auto got = r.u8();
  if (got != static_cast<std::uint8_t>(role))
    throw FormatError("key file has role tag " + std::to_string(got) + ", expected " +
                      std::to_string(static_cast<unsigned>(role)));
}

}  // namespace detail

inline Bytes encode_symmetric_key(const SymmetricKey& k) {
  auto w = detail::key_header(static_cast<FileRole>(k.role()));
  w.raw(ByteSpan(k.bytes()));
  return std::move(w).take();
}

inline SymmetricKey decode_symmetric_key(ByteSpan b, KeyRole role) {
  ByteReader r(b);
  detail::expect_key_header(r, static_cast<FileRole>(role));
  std::array<std::uint8_t, SymmetricKey::kKeyBytes> k{};
  auto raw = r.raw(k.size());
  std::copy(raw.begin(), raw.end(), k.begin());
  r.expect_done();
  return SymmetricKey(role, k);
}

inline Bytes encode_params(const ProtocolParams& p, const GroupParams& gp) {
  auto w = detail::key_header(FileRole::Params);
  w.u8(static_cast<std::uint8_t>(p.security_bits));
  w.u8(static_cast<std::uint8_t>(p.ring_bits));
  w.u8(static_cast<std::uint8_t>(p.feature_bits));
  write_group(w, gp);
  return std::move(w).take();
}

// Checks that the stored group is the one this build derives.
inline ProtocolParams decode_params(ByteSpan b) {
  ByteReader r(b);
  detail::expect_key_header(r, FileRole::Params);
  ProtocolParams p;
  p.security_bits = r.u8();
  p.ring_bits = r.u8();
  p.feature_bits = r.u8();
  const GroupParams gp = read_group(r);
  r.expect_done();
  p.validate();
  if (!(gp == group_setup(p.security_bits))) throw FormatError("params file group differs from the derived group");
  p.validate(gp);
  return p;
}

inline Bytes encode_mpk(const IpfePublicKey& mpk) {
  auto w = detail::key_header(FileRole::Mpk);
  write_group(w, mpk.group());
  write_element(w, mpk.group(), mpk.pk1());
  write_element(w, mpk.group(), mpk.pk2());
  w.i64be(mpk.bounds().slot1);
  w.i64be(mpk.bounds().slot2);
  return std::move(w).take();
}

inline IpfePublicKey decode_mpk(ByteSpan b) {
  ByteReader r(b);
  detail::expect_key_header(r, FileRole::Mpk);
  GroupParams gp = read_group(r);
  mpz_class pk1 = read_element(r, gp), pk2 = read_element(r, gp);
  MessageBounds mb;
  mb.slot1 = r.i64be();
  mb.slot2 = r.i64be();
  r.expect_done();
  if (!gp.is_member(pk1) || !gp.is_member(pk2)) throw FormatError("mpk element outside the order-q subgroup");
  return IpfePublicKey(std::move(gp), std::move(pk1), std::move(pk2), mb);
}

inline Bytes encode_msk(const GroupParams& gp, const IpfeSecretKey& msk) {
  auto w = detail::key_header(FileRole::Msk);
  write_scalar(w, gp, msk.s1);
  write_scalar(w, gp, msk.s2);
  return std::move(w).take();
}

inline IpfeSecretKey decode_msk(const GroupParams& gp, ByteSpan b) {
  ByteReader r(b);
  detail::expect_key_header(r, FileRole::Msk);
  IpfeSecretKey k;
  k.s1 = read_scalar(r, gp);
  k.s2 = read_scalar(r, gp);
  r.expect_done();
  return k;
}

inline Bytes encode_seed_file(const SeedCtMsg& m) {
  auto w = detail::key_header(FileRole::SeedCt);
  w.raw(encode(m));
  return std::move(w).take();
}

inline SeedCtMsg decode_seed_file(ByteSpan b) {
  ByteReader r(b);
  detail::expect_key_header(r, FileRole::SeedCt);
  return decode_seed_ct(r.raw(r.remaining()));
}

// Directory layout written by `keygen`.
struct KeyDir {
  static constexpr const char* kParams = "params.op1k";
  static constexpr const char* kMpk = "mpk.op1k";
  static constexpr const char* kMsk = "msk.op1k";
  static constexpr const char* kSk[3] = {"sk1.op1k", "sk2.op1k", "sk3.op1k"};

  static void write(const std::filesystem::path& dir, const KeyMaterial& km) {
    std::filesystem::create_directories(dir);
    const GroupParams& gp = km.group();
    write_file(dir / kParams, encode_params(km.params, gp));
    write_file(dir / kMpk, encode_mpk(km.ipfe.mpk));
    write_file(dir / kMsk, encode_msk(gp, km.ipfe.msk));
    write_file(dir / kSk[0], encode_symmetric_key(km.sym.sk1));
    write_file(dir / kSk[1], encode_symmetric_key(km.sym.sk2));
    write_file(dir / kSk[2], encode_symmetric_key(km.sym.sk3));
  }

  static bool exists(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / kParams) || std::filesystem::exists(dir / kMsk);
  }

  static KeyMaterial read(const std::filesystem::path& dir) {
    const ProtocolParams params = decode_params(read_file(dir / kParams));
    IpfePublicKey mpk = decode_mpk(read_file(dir / kMpk));
    if (!(mpk.group() == group_setup(params.security_bits))) throw FormatError("mpk group differs from params");
    if (mpk.bounds().slot1 != params.a_max() || mpk.bounds().slot2 != params.b_max())
      throw FormatError("mpk coefficient bounds disagree with params");
    IpfeSecretKey msk = decode_msk(mpk.group(), read_file(dir / kMsk));
    if (mpk.group().pow_g(msk.s1) != mpk.pk1() || mpk.group().pow_g(msk.s2) != mpk.pk2())
      throw FormatError("msk does not match mpk");
    SymmetricKeys sym{decode_symmetric_key(read_file(dir / kSk[0]), KeyRole::Sk1),
                      decode_symmetric_key(read_file(dir / kSk[1]), KeyRole::Sk2),
                      decode_symmetric_key(read_file(dir / kSk[2]), KeyRole::Sk3)};
    mpk.precompute();
    return KeyMaterial{params, IpfeMasterKeys{std::move(mpk), std::move(msk)}, std::move(sym)};
  }
};

}  // namespace onepath
