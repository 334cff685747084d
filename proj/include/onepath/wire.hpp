#pragma once

#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>

#include "onepath/input_share.hpp"
#include "onepath/ipfe.hpp"
#include "onepath/model_prep.hpp"

namespace onepath {

enum class EntityId : std::uint8_t { KGC = 1, MP = 2, CS1 = 3, CS2 = 4, DU = 5 };

inline constexpr EntityId kAllEntities[] = {EntityId::KGC, EntityId::MP, EntityId::CS1, EntityId::CS2, EntityId::DU};

inline const char* entity_name(EntityId e) {
  switch (e) {
    case EntityId::KGC: return "KGC";
    case EntityId::MP: return "MP";
    case EntityId::CS1: return "CS1";
    case EntityId::CS2: return "CS2";
    case EntityId::DU: return "DU";
  }
  return "?";
}

inline std::size_t entity_slot(EntityId e) { return static_cast<std::size_t>(e) - 1; }

inline EntityId server_of(Party p) { return p == Party::One ? EntityId::CS1 : EntityId::CS2; }
inline EntityId peer_of(EntityId server) { return server == EntityId::CS1 ? EntityId::CS2 : EntityId::CS1; }
inline Party party_of(EntityId server) {
  if (server == EntityId::CS1) return Party::One;
  if (server == EntityId::CS2) return Party::Two;
  throw ProtocolError(std::string(entity_name(server)) + " is not a computing server");
}
// CS1 decides odd layers, CS2 even ones.
inline EntityId leader_of(unsigned layer) { return layer % 2 == 1 ? EntityId::CS1 : EntityId::CS2; }

enum class MessageKind : std::uint8_t {
  PrepTree = 1,
  PrepRoot,
  SeedCt,
  QueryShares,
  UnitShares,
  FeatureShare,
  FuncKey,
  PartialResult,
  Subtree,
  PlainIndex,
  LeafLabel,
};

inline const char* kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::PrepTree: return "PrepTree";
    case MessageKind::PrepRoot: return "PrepRoot";
    case MessageKind::SeedCt: return "SeedCt";
    case MessageKind::QueryShares: return "QueryShares";
    case MessageKind::UnitShares: return "UnitShares";
    case MessageKind::FeatureShare: return "FeatureShare";
    case MessageKind::FuncKey: return "FuncKey";
    case MessageKind::PartialResult: return "PartialResult";
    case MessageKind::Subtree: return "Subtree";
    case MessageKind::PlainIndex: return "PlainIndex";
    case MessageKind::LeafLabel: return "LeafLabel";
  }
  return "?";
}

// Model-level messages (PrepTree, PrepRoot, SeedCt) travel under the zero id.
inline constexpr SessionId kModelSession{};

struct Frame {
  SessionId session{};
  EntityId from = EntityId::KGC;
  EntityId to = EntityId::KGC;
  MessageKind kind = MessageKind::PrepTree;
  Bytes payload;

  static constexpr std::size_t kHeaderBytes = 4 + 16 + 1 + 1 + 1 + 4;
  static constexpr std::size_t kMaxPayload = std::size_t{1} << 30;

  std::size_t wire_size() const { return kHeaderBytes + payload.size(); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline void write_frame_header(ByteWriter& w, const Frame& f) {
  w.raw(std::string_view("OP1M"));
  w.raw(ByteSpan(f.session));
  w.u8(static_cast<std::uint8_t>(f.from));
  w.u8(static_cast<std::uint8_t>(f.to));
  w.u8(static_cast<std::uint8_t>(f.kind));
  w.u32be(static_cast<std::uint32_t>(f.payload.size()));
}

inline Bytes encode_frame(const Frame& f) {
  if (f.payload.size() > Frame::kMaxPayload) throw FormatError("frame payload too large");
  ByteWriter w;
  write_frame_header(w, f);
  w.raw(f.payload);
  return std::move(w).take();
}

namespace detail {
inline Frame parse_frame_header(ByteReader& r, std::uint32_t& len) {
  r.expect_magic("OP1M");
  Frame f;
  auto sid = r.raw(16);
  std::copy(sid.begin(), sid.end(), f.session.begin());
  const auto from = r.u8(), to = r.u8(), kind = r.u8();
  if (from < 1 || from > 5 || to < 1 || to > 5) throw FormatError("unknown entity id in frame");
  if (kind < 1 || kind > static_cast<std::uint8_t>(MessageKind::LeafLabel)) throw FormatError("unknown message kind");
  f.from = static_cast<EntityId>(from);
  f.to = static_cast<EntityId>(to);
  f.kind = static_cast<MessageKind>(kind);
  len = r.u32be();
  if (len > Frame::kMaxPayload) throw FormatError("frame payload too large");
  return f;
}
}  // namespace detail

inline Frame decode_frame(ByteSpan data) {
  ByteReader r(data);
  std::uint32_t len = 0;
  Frame f = detail::parse_frame_header(r, len);
  auto p = r.raw(len);
  f.payload.assign(p.begin(), p.end());
  r.expect_done();
  return f;
}

// Blocking frame I/O over a stream socket or pipe.
inline void write_frame_fd(int fd, const Frame& f) {
  const Bytes b = encode_frame(f);
  std::size_t off = 0;
  while (off < b.size()) {
    const ssize_t n = ::write(fd, b.data() + off, b.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(std::string("frame write failed: ") + std::strerror(errno));
    off += static_cast<std::size_t>(n);
  }
}

namespace detail {
inline bool read_exact(int fd, std::uint8_t* out, std::size_t n, bool eof_ok) {
  std::size_t off = 0;
  while (off < n) {
    const ssize_t got = ::read(fd, out + off, n - off);
    if (got < 0 && errno == EINTR) continue;
    if (got < 0) throw Error(std::string("frame read failed: ") + std::strerror(errno));
    if (got == 0) {
      if (off == 0 && eof_ok) return false;
      throw FormatError("stream ended inside a frame");
    }
    off += static_cast<std::size_t>(got);
  }
  return true;
}
}  // namespace detail

// nullopt on clean end of stream.
inline std::optional<Frame> read_frame_fd(int fd) {
  std::array<std::uint8_t, Frame::kHeaderBytes> hdr{};
  if (!detail::read_exact(fd, hdr.data(), hdr.size(), true)) return std::nullopt;
  ByteReader r(hdr);
  std::uint32_t len = 0;
  Frame f = detail::parse_frame_header(r, len);
  f.payload.resize(len);
  detail::read_exact(fd, f.payload.data(), len, false);
  return f;
}

// ---- payload schemas ----

struct SeedCtMsg {
  std::uint32_t gamma = 0;
  Bytes ct;
};

inline Bytes encode(const SeedCtMsg& m) {
  ByteWriter w;
  w.u32be(m.gamma);
  w.lp_bytes(m.ct);
  return std::move(w).take();
}

inline SeedCtMsg decode_seed_ct(ByteSpan b) {
  ByteReader r(b);
  SeedCtMsg m;
  m.gamma = r.u32be();
  auto ct = r.lp_bytes(1 << 24);
  m.ct.assign(ct.begin(), ct.end());
  r.expect_done();
  return m;
}

// l | <1>^1 | <1>^2, entries big-endian at ceil(l/8) bytes.
inline Bytes encode_unit_shares(const RingParams& ring, const UnitShares& u) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(ring.bits()));
  w.uint_be(u.one, ring.entry_bytes());
  w.uint_be(u.two, ring.entry_bytes());
  return std::move(w).take();
}

inline UnitShares decode_unit_shares(const RingParams& ring, ByteSpan b) {
  ByteReader r(b);
  if (r.u8() != ring.bits()) throw FormatError("unit shares use a different ring width");
  UnitShares u{r.uint_be(ring.entry_bytes()), r.uint_be(ring.entry_bytes())};
  r.expect_done();
  if (!ring.contains(u.one) || !ring.contains(u.two)) throw FormatError("unit share outside Z_{2^l}");
  return u;
}

// Ring value tagged with party and layer; used for FeatureShare and PartialResult.
struct LayerValue {
  Party party = Party::One;
  unsigned layer = 0;
  std::uint64_t value = 0;
};

inline Bytes encode_layer_value(const RingParams& ring, const LayerValue& m) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(m.party));
  w.u8(static_cast<std::uint8_t>(m.layer));
  w.uint_be(m.value, ring.entry_bytes());
  return std::move(w).take();
}

inline LayerValue decode_layer_value(const RingParams& ring, ByteSpan b) {
  ByteReader r(b);
  LayerValue m;
  const auto p = r.u8();
  if (p != 1 && p != 2) throw FormatError("party tag must be 1 or 2");
  m.party = static_cast<Party>(p);
  m.layer = r.u8();
  m.value = r.uint_be(ring.entry_bytes());
  r.expect_done();
  if (!ring.contains(m.value)) throw FormatError("value outside Z_{2^l}");
  return m;
}

struct FuncKeyMsg {
  unsigned layer = 0;
  FunctionalKey key;
};

// layer | y_1 | y_2 | sk_y; y entries at ring width.
inline Bytes encode_func_key(const GroupParams& gp, const RingParams& ring, const FuncKeyMsg& m) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(m.layer));
  for (auto y : m.key.y) {
    if (!ring.contains(y)) throw FormatError("key vector entry outside Z_{2^l}");
    w.uint_be(y, ring.entry_bytes());
  }
  write_scalar(w, gp, m.key.sk);
  return std::move(w).take();
}

inline FuncKeyMsg decode_func_key(const GroupParams& gp, const RingParams& ring, ByteSpan b) {
  ByteReader r(b);
  FuncKeyMsg m;
  m.layer = r.u8();
  for (auto& y : m.key.y) y = r.uint_be(ring.entry_bytes());
  m.key.sk = read_scalar(r, gp);
  r.expect_done();
  return m;
}

// top layer | height | n | l | internal records | leaf records.
inline Bytes encode_subtree(const GroupParams& gp, const RingParams& ring, std::uint32_t n, const Subtree& s) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(s.top_layer));
  w.u8(static_cast<std::uint8_t>(s.height));
  w.u32be(n);
  w.u8(static_cast<std::uint8_t>(ring.bits()));
  w.u32be(static_cast<std::uint32_t>(s.internal.size()));
  for (const auto& nd : s.internal) write_node(w, gp, ring, nd);
  w.u32be(static_cast<std::uint32_t>(s.leaves.size()));
  for (const auto& lf : s.leaves) write_leaf(w, lf);
  return std::move(w).take();
}

inline Subtree decode_subtree(const GroupParams& gp, const TreeShape& shape, ByteSpan b) {
  const RingParams ring(shape.ring_bits);
  ByteReader r(b);
  Subtree s;
  s.top_layer = r.u8();
  s.height = r.u8();
  if (s.top_layer < 2 || s.top_layer > shape.depth || s.height != shape.depth - s.top_layer + 1)
    throw FormatError("subtree position inconsistent with tree depth");
  if (r.u32be() != shape.n || r.u8() != shape.ring_bits) throw FormatError("subtree shape mismatch");
  if (r.u32be() != (std::uint32_t{1} << s.height) - 1) throw FormatError("subtree internal count mismatch");
  for (std::uint32_t i = 0; i < (std::uint32_t{1} << s.height) - 1; ++i)
    s.internal.push_back(read_node(r, gp, ring, shape.n));
  if (r.u32be() != std::uint32_t{1} << s.height) throw FormatError("subtree leaf count mismatch");
  for (std::uint32_t i = 0; i < std::uint32_t{1} << s.height; ++i) s.leaves.push_back(read_leaf(r));
  r.expect_done();
  return s;
}

struct PlainIndexMsg {
  unsigned layer = 0;
  std::uint32_t index = 0;
};

inline Bytes encode(const PlainIndexMsg& m) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(m.layer));
  w.u32be(m.index);
  return std::move(w).take();
}

inline PlainIndexMsg decode_plain_index(ByteSpan b) {
  ByteReader r(b);
  PlainIndexMsg m;
  m.layer = r.u8();
  m.index = r.u32be();
  r.expect_done();
  return m;
}

inline Bytes encode_leaf_label(const EncLeaf& leaf) {
  ByteWriter w;
  write_leaf(w, leaf);
  return std::move(w).take();
}

inline EncLeaf decode_leaf_label(ByteSpan b) {
  ByteReader r(b);
  EncLeaf l = read_leaf(r);
  r.expect_done();
  return l;
}

}  // namespace onepath
