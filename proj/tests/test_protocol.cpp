#include <map>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace onepath;
using onepath::testing::default_keys;
using onepath::testing::leaf;
using onepath::testing::small_keys;
using onepath::testing::small_options;
using onepath::testing::split_node;

namespace {

struct Fixed {
  CompleteTree tree;
  PreparedModel pm;
};

// Prepares outside the deployment so the test controls slopes or can
// tamper with the ciphertexts before they are sent.
Fixed prepare_fixed(const KeyMaterial& km, CompleteTree tree, Rng& rng, std::span<const std::int64_t> slopes = {}) {
  const auto seed = PrfSeed::sample(static_cast<std::uint32_t>(tree.gamma()), rng);
  PreparedModel pm = prepare_model(tree, km.sym, km.ipfe.mpk, seed, km.params, rng, slopes);
  return {std::move(tree), std::move(pm)};
}

void provision_fixed(Deployment& dep, const Fixed& f) {
  const GroupParams& gp = dep.keys().group();
  const auto records = static_cast<std::uint32_t>(f.pm.tree.internal.size() + f.pm.tree.leaves.size());
  dep.provision_encrypted(encode_encrypted_tree(gp, f.pm.tree), encode_root_payload(gp, f.pm.root),
                          SeedCtMsg{static_cast<std::uint32_t>(f.tree.gamma()), f.pm.seed_ct}, records);
}

CompleteTree stump(std::uint32_t threshold, std::size_t n = 1) {
  PlainTree t;
  t.n_features = n;
  t.nodes = {split_node(0, threshold, 1, 2), leaf("left"), leaf("right")};
  return complete_pad(t, 1);
}

std::string jsonl(const Transcript& tr) {
  std::ostringstream o;
  tr.export_jsonl(o);
  return o.str();
}

}  // namespace

TEST(Protocol, HeartShapedTreeMatchesOracle) {
  const auto& km = default_keys();
  Rng rng = Rng::from_seed("heart-protocol");
  const Dataset ds = synthetic_dataset(303, 13, {"absent", "present"}, rng);
  const Quantizer q = Quantizer::fit(ds.rows, 13, km.params.feature_bits);
  const PlainTree plain = train_cart(quantize_dataset(ds, q), 3);
  const CompleteTree tree = complete_pad(quantize(plain, Quantizer::identity(13, km.params.feature_bits)), 3);

  Deployment dep(km, rng.derive("dep"));
  dep.provision(tree);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto x = q.quantize(ds.rows[i]);
    const auto out = dep.infer(x);
    ASSERT_EQ(out.label, plaintext_infer(tree, x).label) << "row " << i;
    dep.transcript().verify(out.session);
  }
  EXPECT_EQ(dep.kgc().open_sessions(), 0u);
}

TEST(Protocol, FixedSlopeRightBranch) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("fixed-right");
  const std::vector<std::int64_t> slopes{2};
  const Fixed f = prepare_fixed(km, stump(5), rng, slopes);
  Deployment dep(km, rng.derive("dep"), small_options());
  provision_fixed(dep, f);
  const std::vector<std::uint32_t> x{6};
  const auto out = dep.infer(x);
  EXPECT_EQ(out.label, "right");
  const auto& layers = dep.probe().sessions.at(out.session).layers;
  ASSERT_EQ(layers.size(), 1u);
  EXPECT_EQ(layers[0].r, 5);  // 1 + 2*2*(6 - 5)
  EXPECT_TRUE(layers[0].right);
  EXPECT_EQ(layers[0].leader, EntityId::CS1);
}

TEST(Protocol, FixedSlopeTieGoesLeft) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("fixed-left");
  const std::vector<std::int64_t> slopes{1};
  const Fixed f = prepare_fixed(km, stump(0), rng, slopes);
  Deployment dep(km, rng.derive("dep"), small_options());
  provision_fixed(dep, f);
  const std::vector<std::uint32_t> x{0};
  const auto out = dep.infer(x);
  EXPECT_EQ(out.label, "left");
  const auto& layers = dep.probe().sessions.at(out.session).layers;
  ASSERT_EQ(layers.size(), 1u);
  EXPECT_EQ(layers[0].r, 1);
  EXPECT_FALSE(layers[0].right);
}

TEST(Protocol, ThousandNodeDecisionsMatchPlaintext) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("decisions");
  std::size_t decisions = 0, mismatches = 0;
  for (int t = 0; t < 10; ++t) {
    const CompleteTree tree = random_complete_tree(5, 2 + rng.uniform(6), km.params.feature_bits, rng);
    Deployment dep(km, rng.derive("dep"), small_options());
    dep.provision(tree);
    const auto& secrets = dep.provider().secrets();
    for (int i = 0; i < 20; ++i) {
      const auto x = i % 2 ? boundary_input(tree, km.params.feature_bits, rng)
                           : random_input(tree.n_features, km.params.feature_bits, rng);
      const auto out = dep.infer(x);
      const auto oracle = plaintext_infer(tree, x);
      EXPECT_EQ(out.label, oracle.label);
      const auto& layers = dep.probe().sessions.at(out.session).layers;
      ASSERT_EQ(layers.size(), tree.depth);
      for (std::size_t k = 0; k < layers.size(); ++k) {
        const NodeSecret& ns = secrets[oracle.path.positions[k] - 1];
        ++decisions;
        if (layers[k].right != (x[ns.feature] > ns.threshold) || layers[k].r != ns.coeffs.evaluate(x[ns.feature]))
          ++mismatches;
      }
    }
  }
  EXPECT_EQ(decisions, 1000u);
  EXPECT_EQ(mismatches, 0u);
}

TEST(Protocol, DepthOneStaysOnCs1) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("depth-one");
  const CompleteTree tree = stump(3, 2);
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(tree);
  const std::vector<std::uint32_t> x{4, 0};
  const auto out = dep.infer(x);
  EXPECT_EQ(out.label, "right");
  std::size_t subtrees = 0;
  const TranscriptRecord* label = nullptr;
  for (const auto* r : dep.transcript().session_log(out.session)) {
    if (r->kind == MessageKind::Subtree) ++subtrees;
    if (r->kind == MessageKind::LeafLabel) label = r;
  }
  EXPECT_EQ(subtrees, 0u);
  ASSERT_NE(label, nullptr);
  EXPECT_EQ(label->from, EntityId::CS1);
  const auto c = dep.transcript().counters(out.session);
  EXPECT_EQ(c.subtree_nodes_sent, 1u);
  EXPECT_EQ(c.inter_server_records, 0u);
  EXPECT_EQ(c.sine_evaluations, 1u);
  EXPECT_EQ(c.fe_decryptions, 2u);
}

TEST(Protocol, LeadershipAlternatesByLayer) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("leaders");
  const CompleteTree tree = random_complete_tree(3, 4, km.params.feature_bits, rng, 0.0);
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(tree);
  EXPECT_EQ(dep.cs1().model_records(), 15u);
  EXPECT_EQ(dep.cs2().model_records(), 1u);
  const auto out = dep.infer(random_input(4, km.params.feature_bits, rng));
  const auto& st = dep.probe().sessions.at(out.session);
  EXPECT_EQ(st.servers[0].decided_layers, (std::vector<unsigned>{1, 3}));
  EXPECT_EQ(st.servers[1].decided_layers, (std::vector<unsigned>{2}));
  EXPECT_EQ(st.servers[1].model_records, 1u);
  for (const auto& lt : st.layers) EXPECT_EQ(lt.leader, leader_of(lt.layer));
  // Final label comes from the layer-3 leader.
  for (const auto* r : dep.transcript().session_log(out.session))
    if (r->kind == MessageKind::LeafLabel) EXPECT_EQ(r->from, EntityId::CS1);
}

TEST(Protocol, RandomTreesPassTheAudit) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("audit-random");
  for (unsigned d = 1; d <= 7; ++d) {
    const CompleteTree tree = random_complete_tree(d, 1 + rng.uniform(10), km.params.feature_bits, rng);
    Deployment dep(km, rng.derive("dep"), small_options());
    dep.provision(tree);
    for (int i = 0; i < 3; ++i) {
      const auto x = boundary_input(tree, km.params.feature_bits, rng);
      const auto out = dep.infer(x);
      const auto rep = leakage_audit(dep, out.session, tree, x);
      EXPECT_TRUE(rep.passed()) << "d=" << d << ": " << (rep.violations().empty() ? "" : rep.violations()[0]);
    }
  }
}

TEST(Protocol, EvenDepthEndsOnCs2) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("even-depth");
  const CompleteTree tree = random_complete_tree(4, 3, km.params.feature_bits, rng);
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(tree);
  const auto out = dep.infer(random_input(3, km.params.feature_bits, rng));
  for (const auto* r : dep.transcript().session_log(out.session))
    if (r->kind == MessageKind::LeafLabel) EXPECT_EQ(r->from, EntityId::CS2);
}

TEST(Protocol, SocketLoopbackGivesTheSameTranscript) {
  const auto& km = small_keys();
  Rng trees = Rng::from_seed("loopback-tree");
  const CompleteTree tree = random_complete_tree(4, 5, km.params.feature_bits, trees);
  auto run = [&](bool socket) {
    auto opts = small_options();
    opts.transport.socket_loopback = socket;
    opts.transport.zero_timestamps = true;
    auto dep = std::make_unique<Deployment>(km, Rng::from_seed("loopback"), opts);
    dep->provision(tree);
    Rng inputs = Rng::from_seed("loopback-inputs");
    for (int i = 0; i < 3; ++i) {
      const auto x = random_input(5, km.params.feature_bits, inputs);
      EXPECT_EQ(dep->infer(x).label, plaintext_infer(tree, x).label);
    }
    return dep;
  };
  const auto a = run(false);
  const auto b = run(true);
  EXPECT_EQ(jsonl(a->transcript()), jsonl(b->transcript()));
  ASSERT_EQ(a->transcript().records().size(), b->transcript().records().size());
  for (std::size_t i = 0; i < a->transcript().records().size(); ++i)
    EXPECT_EQ(a->transcript().records()[i].payload, b->transcript().records()[i].payload);
}

TEST(Protocol, InterleavedSessionsUnderRandomSchedule) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("interleaved");
  const CompleteTree tree = random_complete_tree(3, 6, km.params.feature_bits, rng);
  auto opts = small_options();
  opts.transport.random_schedule = true;
  Deployment dep(km, rng.derive("dep"), opts);
  dep.provision(tree);

  std::vector<std::pair<SessionId, std::vector<std::uint32_t>>> sessions;
  for (int i = 0; i < 100; ++i) {
    auto x = random_input(6, km.params.feature_bits, rng);
    sessions.emplace_back(dep.submit(x), std::move(x));
  }
  dep.run();
  for (const auto& [sid, x] : sessions) {
    const auto label = dep.result(sid);
    ASSERT_TRUE(label.has_value());
    EXPECT_EQ(*label, plaintext_infer(tree, x).label);
    dep.transcript().verify(sid);
  }
  EXPECT_EQ(dep.kgc().open_sessions(), 0u);

  // Per (sender, receiver) pair, delivery follows send order.
  const auto& recs = dep.transcript().records();
  std::map<std::pair<EntityId, EntityId>, std::uint64_t> last;
  bool fifo = true, interleaved = false;
  SessionId prev{};
  for (auto seq : dep.transport().delivery_log()) {
    const auto& r = recs.at(seq);
    auto key = std::make_pair(r.from, r.to);
    if (last.count(key) && last[key] >= seq) fifo = false;
    last[key] = seq;
    if (r.session != kModelSession && prev != kModelSession && r.session != prev) interleaved = true;
    prev = r.session;
  }
  EXPECT_TRUE(fifo);
  EXPECT_TRUE(interleaved);
  EXPECT_EQ(dep.transport().delivery_log().size(), recs.size());
}

TEST(Protocol, ReplayedUnitSharesRejected) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("replay-unit");
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(random_complete_tree(2, 2, km.params.feature_bits, rng));
  const auto out = dep.infer(random_input(2, km.params.feature_bits, rng));
  Bytes unit;
  for (const auto* r : dep.transcript().session_log(out.session))
    if (r->kind == MessageKind::UnitShares) unit = r->payload;
  ASSERT_FALSE(unit.empty());
  dep.transport().send(Frame{out.session, EntityId::DU, EntityId::KGC, MessageKind::UnitShares, unit});
  EXPECT_THROW(dep.run(), ProtocolError);
}

TEST(Protocol, KeyRequestAfterCloseRejected) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("replay-feature");
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(random_complete_tree(2, 2, km.params.feature_bits, rng));
  const auto out = dep.infer(random_input(2, km.params.feature_bits, rng));
  const RingParams ring = km.params.ring();
  dep.transport().send(Frame{out.session, EntityId::CS1, EntityId::KGC, MessageKind::FeatureShare,
                             encode_layer_value(ring, LayerValue{Party::One, 1, 7})});
  EXPECT_THROW(dep.run(), ProtocolError);
}

TEST(Protocol, DuplicateLayerRequestRejected) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("replay-layer");
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(random_complete_tree(2, 2, km.params.feature_bits, rng));
  // Session still open at KGC: no unit shares yet, requests are parked.
  SessionId sid{};
  sid[0] = 0x42;
  const RingParams ring = km.params.ring();
  const Frame req{sid, EntityId::CS2, EntityId::KGC, MessageKind::FeatureShare,
                  encode_layer_value(ring, LayerValue{Party::Two, 1, 3})};
  dep.transport().send(req);
  dep.run();
  dep.transport().send(req);
  EXPECT_THROW(dep.run(), ProtocolError);
}

TEST(Protocol, WrongSenderRejected) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("wrong-sender");
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(random_complete_tree(2, 2, km.params.feature_bits, rng));
  SessionId sid{};
  sid[0] = 0x17;
  dep.transport().send(Frame{sid, EntityId::CS1, EntityId::KGC, MessageKind::UnitShares,
                             encode_unit_shares(km.params.ring(), UnitShares{1, 0})});
  EXPECT_THROW(dep.run(), ProtocolError);

  // Party tag must match the sender.
  Deployment dep2(km, rng.derive("dep2"), small_options());
  dep2.provision(random_complete_tree(2, 2, km.params.feature_bits, rng));
  dep2.transport().send(Frame{sid, EntityId::CS1, EntityId::KGC, MessageKind::FeatureShare,
                              encode_layer_value(km.params.ring(), LayerValue{Party::Two, 1, 3})});
  EXPECT_THROW(dep2.run(), ProtocolError);
}

TEST(Protocol, TamperedIndexCiphertextFailsAuthentication) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("tamper-index");
  Fixed f = prepare_fixed(km, random_complete_tree(2, 2, km.params.feature_bits, rng), rng);
  f.pm.root.root.index_ct.back() ^= 0x01;
  Deployment dep(km, rng.derive("dep"), small_options());
  provision_fixed(dep, f);
  EXPECT_THROW(dep.infer(random_input(2, km.params.feature_bits, rng)), AuthError);
}

TEST(Protocol, TamperedLabelFailsAuthentication) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("tamper-label");
  Fixed f = prepare_fixed(km, random_complete_tree(2, 2, km.params.feature_bits, rng), rng);
  for (auto& lf : f.pm.tree.leaves) lf.label_ct[lf.label_ct.size() / 2] ^= 0x80;
  Deployment dep(km, rng.derive("dep"), small_options());
  provision_fixed(dep, f);
  EXPECT_THROW(dep.infer(random_input(2, km.params.feature_bits, rng)), AuthError);
}

TEST(Protocol, SameSeedsSameTranscript) {
  const auto& km = small_keys();
  auto run = [&] {
    Rng rng = Rng::from_seed("determinism");
    auto opts = small_options();
    opts.transport.zero_timestamps = true;
    opts.transport.random_schedule = true;
    Deployment dep(km, rng.derive("dep"), opts);
    dep.provision(random_complete_tree(3, 4, km.params.feature_bits, rng));
    for (int i = 0; i < 4; ++i) dep.submit(random_input(4, km.params.feature_bits, rng));
    dep.run();
    std::string payloads;
    for (const auto& r : dep.transcript().records()) payloads += to_hex(r.payload);
    return jsonl(dep.transcript()) + payloads;
  };
  EXPECT_EQ(run(), run());
}

TEST(Protocol, TranscriptCarriesTimestampsByDefault) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("timestamps");
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(random_complete_tree(2, 2, km.params.feature_bits, rng));
  dep.infer(random_input(2, km.params.feature_bits, rng));
  std::int64_t last = 0;
  for (const auto& r : dep.transcript().records()) {
    EXPECT_GE(r.t_ns, last);
    last = r.t_ns;
  }
  EXPECT_GT(last, 0);
}

TEST(Frame, RoundTrip) {
  Frame f;
  f.session[3] = 9;
  f.from = EntityId::CS2;
  f.to = EntityId::DU;
  f.kind = MessageKind::LeafLabel;
  f.payload = to_bytes("payload");
  const Bytes b = encode_frame(f);
  EXPECT_EQ(b.size(), f.wire_size());
  EXPECT_EQ(f.wire_size(), 7u + 27u);
  EXPECT_EQ(decode_frame(b), f);
  EXPECT_EQ(b[0], 'O');
  EXPECT_EQ(b[20], 4);  // from
  EXPECT_EQ(b[21], 5);  // to
}

TEST(Frame, MalformedFramesRejected) {
  Frame f;
  f.kind = MessageKind::SeedCt;
  f.payload = Bytes(10, 0xaa);
  Bytes b = encode_frame(f);

  Bytes magic = b;
  magic[0] = 'X';
  EXPECT_THROW(decode_frame(magic), FormatError);

  Bytes shorter(b.begin(), b.end() - 1);
  EXPECT_THROW(decode_frame(shorter), FormatError);

  Bytes longer = b;
  longer.push_back(0);
  EXPECT_THROW(decode_frame(longer), FormatError);

  Bytes entity = b;
  entity[20] = 9;
  EXPECT_THROW(decode_frame(entity), FormatError);

  Bytes kind = b;
  kind[22] = 0;
  EXPECT_THROW(decode_frame(kind), FormatError);
}

TEST(Audit, PlantedPlaintextIsDetected) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("audit-plant");
  PlainTree pt;
  pt.n_features = 3;
  pt.nodes = {split_node(2, 5, 1, 2), leaf("benign"), leaf("malignant")};
  const CompleteTree tree = complete_pad(pt, 1);
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(tree);
  const std::vector<std::uint32_t> x{1, 2, 3};
  const auto out = dep.infer(x);
  ASSERT_TRUE(leakage_audit(dep, out.session, tree, x).passed());

  TreeShape shape;
  shape.depth = 1;
  shape.n = 3;
  shape.ring_bits = km.params.ring_bits;
  std::vector<TranscriptRecord> copies;
  for (const auto& r : dep.transcript().records()) copies.push_back(r);
  auto scan = [&] {
    std::vector<const TranscriptRecord*> ptrs;
    for (const auto& r : copies) ptrs.push_back(&r);
    return detail::scan_plaintext(ptrs, tree, km.group(), shape);
  };
  EXPECT_EQ(scan(), 0u);

  // (feature 2, threshold 5) written into the seed ciphertext body.
  auto seed = std::find_if(copies.begin(), copies.end(), [](const auto& r) { return r.kind == MessageKind::SeedCt; });
  ASSERT_NE(seed, copies.end());
  const Bytes saved = seed->payload;
  const std::uint8_t pattern[8] = {0, 0, 0, 2, 0, 0, 0, 5};
  std::copy(std::begin(pattern), std::end(pattern), seed->payload.begin() + 12);
  EXPECT_EQ(scan(), 1u);

  // A label anywhere in any payload.
  seed->payload = saved;
  const std::string label = "malignant";
  std::copy(label.begin(), label.end(), seed->payload.begin() + 12);
  EXPECT_GE(scan(), 1u);
}

TEST(Audit, WrongTruthFails) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("audit-wrong");
  const CompleteTree tree = random_complete_tree(3, 4, km.params.feature_bits, rng, 0.0);
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(tree);
  const auto x = random_input(4, km.params.feature_bits, rng);
  const auto out = dep.infer(x);
  const AuditTruth good{km.group(), km.params, tree, x, dep.provider().shuffle(), dep.provider().secrets()};
  EXPECT_TRUE(leakage_audit(dep.transcript(), dep.probe(), out.session, good, dep.result(out.session)).passed());

  auto secrets = dep.provider().secrets();
  for (auto& s : secrets) s.coeffs.intercept += 2;
  const AuditTruth bad_coeffs{km.group(), km.params, tree, x, dep.provider().shuffle(), secrets};
  EXPECT_FALSE(leakage_audit(dep.transcript(), dep.probe(), out.session, bad_coeffs, dep.result(out.session)).passed());

  auto shuffle = dep.provider().shuffle();
  std::reverse(shuffle.order.begin(), shuffle.order.end());
  const AuditTruth bad_shuffle{km.group(), km.params, tree, x, shuffle, dep.provider().secrets()};
  EXPECT_FALSE(leakage_audit(dep.transcript(), dep.probe(), out.session, bad_shuffle, dep.result(out.session)).passed());

  EXPECT_FALSE(leakage_audit(dep.transcript(), dep.probe(), out.session, good, std::string("forged")).passed());
}

TEST(Counters, DepthEightSubtreeRecords) {
  const auto& km = small_keys();
  Rng rng = Rng::from_seed("depth-eight");
  const CompleteTree tree = random_complete_tree(8, 9, km.params.feature_bits, rng);
  Deployment dep(km, rng.derive("dep"), small_options());
  dep.provision(tree);
  const auto x = random_input(9, km.params.feature_bits, rng);
  const auto out = dep.infer(x);
  EXPECT_EQ(out.label, plaintext_infer(tree, x).label);
  const auto c = dep.transcript().counters(out.session);
  EXPECT_EQ(c.subtree_nodes_sent, 502u);
  EXPECT_EQ(c.inter_server_records, 501u);
  EXPECT_EQ(c.sine_evaluations, 8u);
  EXPECT_EQ(c.fe_decryptions, 16u);
  // A subtree rooted at layer k has 2^{d-k+1} - 1 internal nodes and
  // 2^{d-k+1} leaves; one is shipped for k = 2..d, then the final leaf.
  std::uint64_t oracle = 1;
  for (unsigned k = 2; k <= 8; ++k) oracle += (std::uint64_t{1} << (8 - k + 2)) - 1;
  EXPECT_EQ(c.subtree_nodes_sent, oracle);
  dep.transcript().verify(out.session);
}
