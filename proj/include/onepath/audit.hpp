#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "onepath/entities.hpp"
#include "onepath/tree.hpp"

namespace onepath {

struct AuditFinding {
  std::string check;
  bool ok = true;
  std::string detail;
};

struct AuditReport {
  std::vector<AuditFinding> findings;

  bool passed() const {
    return std::all_of(findings.begin(), findings.end(), [](const AuditFinding& f) { return f.ok; });
  }
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    for (const auto& f : findings)
      if (!f.ok) out.push_back(f.check + ": " + f.detail);
    return out;
  }
  void add(std::string check, bool ok, std::string detail = {}) {
    findings.push_back({std::move(check), ok, std::move(detail)});
  }
};

inline nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : r.findings) j.push_back({{"check", f.check}, {"ok", f.ok}, {"detail", f.detail}});
  return j;
}

// Expected communication for one query on a complete depth-d tree.
inline std::uint64_t expected_subtree_nodes(unsigned d) { return (std::uint64_t{1} << (d + 1)) - 2 - d; }
inline std::uint64_t expected_inter_server_records(unsigned d) { return (std::uint64_t{1} << (d + 1)) - 3 - d; }

namespace detail {

inline std::string join(const std::vector<unsigned>& v) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return "{" + s + "}";
}

inline Bytes node_material(const GroupParams& gp, const RingParams& ring, const EncInternalNode& nd) {
  ByteWriter w;
  for (auto v : nd.masked_feature) w.uint_be(v, ring.entry_bytes());
  write_ciphertext(w, gp, nd.coeffs);
  return std::move(w).take();
}

// Ciphertexts, masked vectors, shares and key material of one payload, each
// as a separate byte string. Counts, length prefixes and layer tags are left
// out: they are public small integers and two adjacent ones can spell any
// (feature, threshold) pair by accident.
inline std::vector<Bytes> opaque_regions(const TranscriptRecord& r, const GroupParams& gp, const TreeShape& shape) {
  const RingParams ring(shape.ring_bits);
  std::vector<Bytes> out;
  auto add_nodes = [&](std::span<const EncInternalNode> nodes, std::span<const EncLeaf> leaves) {
    for (const auto& nd : nodes) {
      out.push_back(node_material(gp, ring, nd));
      out.push_back(nd.index_ct);
    }
    for (const auto& lf : leaves) out.push_back(lf.label_ct);
  };
  switch (r.kind) {
    case MessageKind::PrepTree: {
      const auto t = decode_encrypted_tree(gp, r.payload);
      add_nodes(t.internal, t.leaves);
      break;
    }
    case MessageKind::PrepRoot: {
      const auto root = decode_root_payload(gp, r.payload);
      add_nodes(std::span(&root.root, 1), {});
      break;
    }
    case MessageKind::SeedCt:
      out.push_back(decode_seed_ct(r.payload).ct);
      break;
    case MessageKind::Subtree: {
      const auto s = decode_subtree(gp, shape, r.payload);
      add_nodes(s.internal, s.leaves);
      break;
    }
    case MessageKind::FuncKey: {
      const auto m = decode_func_key(gp, ring, r.payload);
      ByteWriter w;
      for (auto y : m.key.y) w.uint_be(y, ring.entry_bytes());
      write_scalar(w, gp, m.key.sk);
      out.push_back(std::move(w).take());
      break;
    }
    case MessageKind::LeafLabel:
      out.push_back(decode_leaf_label(r.payload).label_ct);
      break;
    default:  // shares and plain indexes: a few bytes, shorter than a pattern
      break;
  }
  return out;
}

// Counts occurrences of any 8-byte (feature || threshold) pattern inside the
// opaque regions, and of any label of at least 4 bytes anywhere in a payload.
inline std::size_t scan_plaintext(const std::vector<const TranscriptRecord*>& records, const CompleteTree& tree,
                                  const GroupParams& gp, const TreeShape& shape) {
  std::unordered_set<std::uint64_t> patterns;
  for (const auto& nd : tree.internal) patterns.insert((std::uint64_t{nd.feature} << 32) | nd.threshold);
  std::set<std::string> labels;
  for (const auto& l : tree.leaves)
    if (l.size() >= 4) labels.insert(l);

  std::size_t hits = 0;
  for (const auto* r : records) {
    for (const Bytes& p : opaque_regions(*r, gp, shape)) {
      std::uint64_t win = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        win = (win << 8) | p[i];
        if (i >= 7 && patterns.count(win)) ++hits;
      }
    }
    for (const auto& l : labels)
      if (std::search(r->payload.begin(), r->payload.end(), l.begin(), l.end()) != r->payload.end()) ++hits;
  }
  return hits;
}

}  // namespace detail

// Ground truth only the test harness has.
struct AuditTruth {
  const GroupParams& group;
  const ProtocolParams& params;
  const CompleteTree& tree;
  std::span<const std::uint32_t> x;
  const ShuffledIndexMap& shuffle;
  const std::vector<NodeSecret>& secrets;
};

// Checks one finished session against the leakage profile: who decided
// which layer, which indexes each server saw, what CS2 stored, the
// counters, and the absence of plaintext model data on the wire.
inline AuditReport leakage_audit(const Transcript& tr, const Probe& probe, const SessionId& sid,
                                 const AuditTruth& truth, const std::optional<std::string>& delivered) {
  AuditReport rep;
  const unsigned d = truth.tree.depth;
  const Inference oracle = plaintext_infer(truth.tree, truth.x);

  auto it = probe.sessions.find(sid);
  if (it == probe.sessions.end()) {
    rep.add("instrumentation", false, "no probe data for session " + to_hex(sid));
    return rep;
  }
  const SessionTrace& st = it->second;
  const ServerView& v1 = st.servers[0];
  const ServerView& v2 = st.servers[1];

  rep.add("oracle label", delivered && *delivered == oracle.label,
          "delivered " + (delivered ? *delivered : std::string("<none>")) + ", oracle " + oracle.label);

  rep.add("CS2 pre-query state", v2.model_records == 1,
          "CS2 held " + std::to_string(v2.model_records) + " node records");

  std::vector<unsigned> odd, even;
  for (unsigned k = 1; k <= d; ++k) (k % 2 ? odd : even).push_back(k);
  rep.add("leadership", v1.decided_layers == odd && v2.decided_layers == even,
          "CS1 decided " + detail::join(v1.decided_layers) + ", CS2 decided " + detail::join(v2.decided_layers));

  std::vector<std::uint32_t> path_indexes;
  for (auto pos : oracle.path.positions) path_indexes.push_back(truth.shuffle.index_at(pos));
  rep.add("plain indexes CS1", v1.observed_indexes == path_indexes,
          std::to_string(v1.observed_indexes.size()) + " observed, " + std::to_string(d) + " on the path");
  rep.add("plain indexes CS2", v2.observed_indexes == path_indexes,
          std::to_string(v2.observed_indexes.size()) + " observed, " + std::to_string(d) + " on the path");

  // R_i = A_i + B_i x_{f_i} for every evaluated node, and the branch taken
  // matches the oracle path.
  bool linear_ok = st.layers.size() == d;
  std::string linear_detail = std::to_string(st.layers.size()) + " layers evaluated";
  for (std::size_t k = 0; k < st.layers.size() && k < d; ++k) {
    const LayerTrace& lt = st.layers[k];
    const std::size_t pos = oracle.path.positions[k];
    const NodeSecret& ns = truth.secrets.at(pos - 1);
    const std::int64_t want = ns.coeffs.evaluate(truth.x[ns.feature]);
    if (lt.layer != k + 1 || lt.index != ns.index || lt.r != want || lt.right != oracle.path.directions[k]) {
      linear_ok = false;
      linear_detail = "layer " + std::to_string(k + 1) + ": R = " + std::to_string(lt.r) + ", expected " +
                      std::to_string(want);
      break;
    }
  }
  rep.add("linear identity", linear_ok, linear_detail);

  const Counters kept = tr.counters(sid);
  const Counters derived = tr.derive(sid);
  rep.add("counters cross-check", kept == derived, "kept " + to_json(kept).dump() + ", derived " + to_json(derived).dump());
  rep.add("one path", kept.sine_evaluations == d && kept.fe_decryptions == 2 * d,
          std::to_string(kept.sine_evaluations) + " evaluations, " + std::to_string(kept.fe_decryptions) +
              " FE decryptions for d = " + std::to_string(d));
  rep.add("subtree records", kept.subtree_nodes_sent == expected_subtree_nodes(d) &&
                                 kept.inter_server_records == expected_inter_server_records(d),
          std::to_string(kept.subtree_nodes_sent) + " sent, expected " + std::to_string(expected_subtree_nodes(d)));

  const auto log = tr.session_log(sid);
  std::size_t du_out = 0, du_in = 0;
  for (const auto* r : log) {
    if (r->from == EntityId::DU) ++du_out;
    if (r->to == EntityId::DU) ++du_in;
  }
  rep.add("one-shot user", du_out == 3 && du_in == 1,
          "DU sent " + std::to_string(du_out) + " and received " + std::to_string(du_in) + " messages");

  if (tr.keeps_payloads()) {
    auto scanned = log;
    for (const auto* r : tr.session_log(kModelSession)) scanned.push_back(r);
    try {
      TreeShape shape;
      shape.depth = d;
      shape.n = static_cast<std::uint32_t>(truth.tree.n_features);
      shape.ring_bits = truth.params.ring_bits;
      const std::size_t hits = detail::scan_plaintext(scanned, truth.tree, truth.group, shape);
      rep.add("plaintext on wire", hits == 0, std::to_string(hits) + " plaintext matches");
    } catch (const Error& e) {
      rep.add("plaintext on wire", false, std::string("payload did not parse: ") + e.what());
    }
  }
  return rep;
}

inline AuditReport leakage_audit(const Deployment& dep, const SessionId& sid, const CompleteTree& tree,
                                 std::span<const std::uint32_t> x) {
  return leakage_audit(dep.transcript(), dep.probe(), sid,
                       AuditTruth{dep.keys().group(), dep.keys().params, tree, x, dep.provider().shuffle(), dep.provider().secrets()}, dep.result(sid));
}

}  // namespace onepath
