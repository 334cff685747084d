#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "onepath/ipfe.hpp"
#include "onepath/params.hpp"
#include "onepath/prf.hpp"
#include "onepath/sharing.hpp"
#include "onepath/ske.hpp"
#include "onepath/tree.hpp"

namespace onepath {

// D = [d_1..d_gamma], a permutation of [1..gamma] assigned to internal
// positions in level order. inverse[d - 1] is the position holding index d.
struct ShuffledIndexMap {
  std::vector<std::uint32_t> order;
  std::vector<std::uint32_t> inverse;

  std::uint32_t index_at(std::size_t position) const { return order.at(position - 1); }
  std::size_t position_of(std::uint32_t index) const { return inverse.at(index - 1); }
};

inline ShuffledIndexMap fisher_yates(std::uint32_t gamma, Rng& rng) {
  if (gamma < 1) throw ParameterError("shuffle needs gamma >= 1");
  ShuffledIndexMap m;
  m.order.resize(gamma);
  for (std::uint32_t i = 0; i < gamma; ++i) m.order[i] = i + 1;
  for (std::uint32_t i = gamma - 1; i > 0; --i) {
    const auto j = static_cast<std::uint32_t>(rng.uniform(std::uint64_t{i} + 1));
    std::swap(m.order[i], m.order[j]);
  }
  m.inverse.resize(gamma);
  for (std::uint32_t p = 0; p < gamma; ++p) m.inverse[m.order[p] - 1] = p + 1;
  return m;
}

// Line through (Theta, 1) with random slope 2b:
// A + B*X = 1 + 2b(X - Theta), so R > 1 iff X > Theta and X = Theta gives R = 1.
struct LinearCoefficients {
  std::int64_t intercept = 0;  // A
  std::int64_t slope = 0;      // B = 2b
  std::int64_t slope_draw = 0; // b

  std::int64_t evaluate(std::int64_t x) const { return intercept + slope * x; }
};

inline LinearCoefficients linear_from_draw(std::uint32_t threshold, std::int64_t b) {
  return LinearCoefficients{1 - 2 * b * static_cast<std::int64_t>(threshold), 2 * b, b};
}

inline LinearCoefficients encode_linear(std::uint32_t threshold, Rng& rng) {
  return linear_from_draw(threshold, rng.uniform_int(1, ProtocolParams::kSlopeMax));
}

// Public shape published alongside the model.
struct TreeShape {
  unsigned depth = 0;
  std::uint32_t n = 0;
  unsigned ring_bits = 16;
  unsigned feature_bits = 7;
  std::int64_t a_max = 0;
  std::int64_t b_max = 0;

  std::uint32_t gamma() const { return (std::uint32_t{1} << depth) - 1; }
  std::uint32_t leaf_count() const { return std::uint32_t{1} << depth; }

  friend bool operator==(const TreeShape&, const TreeShape&) = default;
};

inline void write_shape(ByteWriter& w, const TreeShape& s) {
  w.u8(static_cast<std::uint8_t>(s.depth));
  w.u32be(s.n);
  w.u8(static_cast<std::uint8_t>(s.ring_bits));
  w.u8(static_cast<std::uint8_t>(s.feature_bits));
  w.i64be(s.a_max);
  w.i64be(s.b_max);
}

inline TreeShape read_shape(ByteReader& r) {
  TreeShape s;
  s.depth = r.u8();
  s.n = r.u32be();
  s.ring_bits = r.u8();
  s.feature_bits = r.u8();
  s.a_max = r.i64be();
  s.b_max = r.i64be();
  if (s.depth < 1 || s.depth > 24) throw FormatError("tree depth out of range");
  if (s.n < 1) throw FormatError("tree needs n >= 1");
  RingParams check(s.ring_bits);
  (void)check;
  return s;
}

struct EncInternalNode {
  std::vector<std::uint64_t> masked_feature;  // e'_{f,n} = e_{f,n} + F(seed, d)
  IpfeCiphertext coeffs;                      // [[A, B]]
  Bytes index_ct;                             // layered SKE ciphertext of d
  std::uint8_t layer = 1;

  friend bool operator==(const EncInternalNode&, const EncInternalNode&) = default;
};

struct EncLeaf {
  Bytes label_ct;  // Enc_{sk3}(label)

  friend bool operator==(const EncLeaf&, const EncLeaf&) = default;
};

// Non-owning level-order view of a (sub)tree whose root sits at `top_layer`.
struct SubtreeView {
  unsigned top_layer = 1;
  unsigned height = 0;  // internal levels; 0 means a single leaf
  std::span<const EncInternalNode> internal;
  std::span<const EncLeaf> leaves;
};

struct Subtree {
  unsigned top_layer = 1;
  unsigned height = 0;
  std::vector<EncInternalNode> internal;
  std::vector<EncLeaf> leaves;

  SubtreeView view() const { return {top_layer, height, internal, leaves}; }
  std::size_t record_count() const { return internal.size() + leaves.size(); }

  friend bool operator==(const Subtree&, const Subtree&) = default;
};

// Child subtree of the view's root (right = true picks 2p + 1). Internal
// node at local position p (1-based level order) maps to internal[p - 1];
// a leaf at local position p maps to leaves[p - 2^height].
inline Subtree child_subtree(const SubtreeView& parent, bool right) {
  if (parent.height < 1) throw ProtocolError("cannot descend below a leaf");
  Subtree out;
  out.top_layer = parent.top_layer + 1;
  out.height = parent.height - 1;
  const std::size_t c = right ? 3 : 2;
  for (unsigned k = 0; k < out.height; ++k) {
    const std::size_t first = c << k;
    for (std::size_t j = 0; j < (std::size_t{1} << k); ++j) out.internal.push_back(parent.internal[first + j - 1]);
  }
  const std::size_t first_leaf = (c << out.height) - (std::size_t{1} << parent.height);
  for (std::size_t j = 0; j < (std::size_t{1} << out.height); ++j) out.leaves.push_back(parent.leaves[first_leaf + j]);
  return out;
}

struct EncryptedTree {
  TreeShape shape;
  std::vector<EncInternalNode> internal;  // level order, gamma entries
  std::vector<EncLeaf> leaves;            // 2^d entries

  SubtreeView view() const { return {1, shape.depth, internal, leaves}; }

  friend bool operator==(const EncryptedTree&, const EncryptedTree&) = default;
};

// CS2 only ever holds the root.
struct RootPayload {
  TreeShape shape;
  EncInternalNode root;

  friend bool operator==(const RootPayload&, const RootPayload&) = default;
};

inline void write_node(ByteWriter& w, const GroupParams& gp, const RingParams& ring, const EncInternalNode& nd) {
  w.u8(nd.layer);
  for (auto v : nd.masked_feature) w.uint_be(v, ring.entry_bytes());
  write_ciphertext(w, gp, nd.coeffs);
  w.lp_bytes(nd.index_ct);
}

inline EncInternalNode read_node(ByteReader& r, const GroupParams& gp, const RingParams& ring, std::uint32_t n) {
  EncInternalNode nd;
  nd.layer = r.u8();
  nd.masked_feature.resize(n);
  for (auto& v : nd.masked_feature) {
    v = r.uint_be(ring.entry_bytes());
    if (!ring.contains(v)) throw FormatError("masked feature entry outside Z_{2^l}");
  }
  nd.coeffs = read_ciphertext(r, gp);
  auto ct = r.lp_bytes(1024);
  nd.index_ct.assign(ct.begin(), ct.end());
  return nd;
}

inline void write_leaf(ByteWriter& w, const EncLeaf& lf) { w.lp_bytes(lf.label_ct); }

inline EncLeaf read_leaf(ByteReader& r) {
  auto b = r.lp_bytes(1 << 20);
  return EncLeaf{Bytes(b.begin(), b.end())};
}

namespace detail {
inline constexpr std::uint8_t kTreeFormatVersion = 1;
inline constexpr std::uint8_t kFullTree = 0;
inline constexpr std::uint8_t kRootOnly = 1;
}  // namespace detail

// "OP1T" | version | kind | shape | node count | nodes | leaf count | leaves.
inline Bytes encode_encrypted_tree(const GroupParams& gp, const EncryptedTree& t) {
  const RingParams ring(t.shape.ring_bits);
  ByteWriter w;
  w.raw(std::string_view("OP1T"));
  w.u8(detail::kTreeFormatVersion);
  w.u8(detail::kFullTree);
  write_shape(w, t.shape);
  w.u32be(static_cast<std::uint32_t>(t.internal.size()));
  for (const auto& nd : t.internal) write_node(w, gp, ring, nd);
  w.u32be(static_cast<std::uint32_t>(t.leaves.size()));
  for (const auto& lf : t.leaves) write_leaf(w, lf);
  return std::move(w).take();
}

inline Bytes encode_root_payload(const GroupParams& gp, const RootPayload& p) {
  const RingParams ring(p.shape.ring_bits);
  ByteWriter w;
  w.raw(std::string_view("OP1T"));
  w.u8(detail::kTreeFormatVersion);
  w.u8(detail::kRootOnly);
  write_shape(w, p.shape);
  w.u32be(1);
  write_node(w, gp, ring, p.root);
  w.u32be(0);
  return std::move(w).take();
}

namespace detail {
inline TreeShape read_tree_header(ByteReader& r, std::uint8_t want_kind) {
  r.expect_magic("OP1T");
  if (r.u8() != kTreeFormatVersion) throw FormatError("unsupported OP1T version");
  if (r.u8() != want_kind) throw FormatError(want_kind == kFullTree ? "expected a full tree" : "expected a root payload");
  return read_shape(r);
}
}  // namespace detail

inline EncryptedTree decode_encrypted_tree(const GroupParams& gp, ByteSpan data) {
  ByteReader r(data);
  EncryptedTree t;
  t.shape = detail::read_tree_header(r, detail::kFullTree);
  const RingParams ring(t.shape.ring_bits);
  if (r.u32be() != t.shape.gamma()) throw FormatError("node count does not match depth");
  for (std::uint32_t i = 0; i < t.shape.gamma(); ++i) t.internal.push_back(read_node(r, gp, ring, t.shape.n));
  if (r.u32be() != t.shape.leaf_count()) throw FormatError("leaf count does not match depth");
  for (std::uint32_t i = 0; i < t.shape.leaf_count(); ++i) t.leaves.push_back(read_leaf(r));
  r.expect_done();
  return t;
}

inline RootPayload decode_root_payload(const GroupParams& gp, ByteSpan data) {
  ByteReader r(data);
  RootPayload p;
  p.shape = detail::read_tree_header(r, detail::kRootOnly);
  const RingParams ring(p.shape.ring_bits);
  if (r.u32be() != 1) throw FormatError("root payload must hold exactly one node");
  p.root = read_node(r, gp, ring, p.shape.n);
  if (r.u32be() != 0) throw FormatError("root payload must not hold leaves");
  r.expect_done();
  return p;
}

struct SymmetricKeys {
  SymmetricKey sk1;
  SymmetricKey sk2;
  SymmetricKey sk3;
};

// Provider-side record of what was encrypted at each position. Kept only
// for oracle checks and audits.
struct NodeSecret {
  std::size_t position = 0;
  std::uint32_t index = 0;
  std::uint32_t feature = 0;
  std::uint32_t threshold = 0;
  bool dummy = false;
  LinearCoefficients coeffs;
};

struct PreparedModel {
  EncryptedTree tree;  // -> CS1
  RootPayload root;    // -> CS2
  Bytes seed_ct;       // -> KGC -> DU
  ShuffledIndexMap shuffle;
  std::vector<NodeSecret> secrets;
};

// `slopes`, when given, fixes b_i per level-order position instead of
// drawing it (test vectors only).
inline PreparedModel prepare_model(const CompleteTree& tree, const SymmetricKeys& keys, const IpfePublicKey& mpk,
                                   const PrfSeed& seed, const ProtocolParams& params, Rng& rng,
                                   std::span<const std::int64_t> slopes = {}) {
  tree.validate();
  params.validate();
  const RingParams ring = params.ring();
  const auto gamma = static_cast<std::uint32_t>(tree.gamma());
  if (seed.gamma != gamma) throw ParameterError("PRF seed length does not match gamma");
  if (mpk.bounds().slot1 < params.a_max() || mpk.bounds().slot2 < params.b_max())
    throw ParameterError("IPFE bounds smaller than the published coefficient bounds");
  if (keys.sk1.role() != KeyRole::Sk1 || keys.sk2.role() != KeyRole::Sk2 || keys.sk3.role() != KeyRole::Sk3)
    throw ParameterError("symmetric keys passed in the wrong roles");
  if (!slopes.empty() && slopes.size() != gamma) throw ParameterError("need one fixed slope per internal node");
  for (auto b : slopes)
    if (b < 1 || b > ProtocolParams::kSlopeMax) throw ParameterError("fixed slope outside [1, 99]");

  PreparedModel out;
  out.tree.shape = TreeShape{tree.depth, static_cast<std::uint32_t>(tree.n_features), params.ring_bits,
                             params.feature_bits, params.a_max(), params.b_max()};
  out.root.shape = out.tree.shape;

  // Leaf labels under sk3.
  for (const auto& label : tree.leaves) out.tree.leaves.push_back(EncLeaf{ske_encrypt(keys.sk3, to_bytes(label), rng)});

  out.shuffle = fisher_yates(gamma, rng);

  out.tree.internal.resize(gamma);
  for (std::size_t pos = 1; pos <= gamma; ++pos) {
    const CompleteNode& src = tree.internal[pos - 1];
    if (src.threshold >= params.feature_limit())
      throw ParameterError("threshold " + std::to_string(src.threshold) + " outside [0, 2^t)");
    const std::uint32_t d = out.shuffle.index_at(pos);
    const unsigned layer = CompleteTree::layer_of(pos);
    EncInternalNode& nd = out.tree.internal[pos - 1];
    nd.layer = static_cast<std::uint8_t>(layer);

    // Odd layers: Enc_sk2(Enc_sk1(d)); even: Enc_sk1(Enc_sk2(d)); the root
    // goes out single-layered, one copy per server.
    const Bytes plain = encode_index(d);
    if (layer == 1) {
      nd.index_ct = ske_encrypt(keys.sk1, plain, rng);
    } else if (layer % 2 == 1) {
      nd.index_ct = ske_encrypt(keys.sk2, ske_encrypt(keys.sk1, plain, rng), rng);
    } else {
      nd.index_ct = ske_encrypt(keys.sk1, ske_encrypt(keys.sk2, plain, rng), rng);
    }

    nd.masked_feature = prf_eval(seed, d, tree.n_features, ring.bits());
    nd.masked_feature[src.feature] = ring.add(nd.masked_feature[src.feature], 1);

    const LinearCoefficients lc =
        slopes.empty() ? encode_linear(src.threshold, rng) : linear_from_draw(src.threshold, slopes[pos - 1]);
    nd.coeffs = ipfe_encrypt(mpk, {lc.intercept, lc.slope}, rng);
    out.secrets.push_back(NodeSecret{pos, d, src.feature, src.threshold, src.dummy, lc});
  }

  out.root.root = out.tree.internal[0];
  out.root.root.index_ct = ske_encrypt(keys.sk2, encode_index(out.shuffle.index_at(1)), rng);
  out.seed_ct = ske_encrypt(keys.sk3, seed.bytes, rng);
  return out;
}

}  // namespace onepath
