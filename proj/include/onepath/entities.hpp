#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "onepath/input_share.hpp"
#include "onepath/model_prep.hpp"
#include "onepath/transport.hpp"

namespace onepath {

struct KeyMaterial {
  ProtocolParams params;
  IpfeMasterKeys ipfe;
  SymmetricKeys sym;

  const GroupParams& group() const { return ipfe.mpk.group(); }

  static KeyMaterial generate(const ProtocolParams& params, Rng& rng) {
    params.validate();
    const GroupParams& gp = group_setup(params.security_bits);
    params.validate(gp);
    auto ipfe = ipfe_setup(gp, MessageBounds{params.a_max(), params.b_max()}, rng);
    ipfe.mpk.precompute();
    SymmetricKeys sym{SymmetricKey::generate(KeyRole::Sk1, rng), SymmetricKey::generate(KeyRole::Sk2, rng),
                      SymmetricKey::generate(KeyRole::Sk3, rng)};
    return KeyMaterial{params, std::move(ipfe), std::move(sym)};
  }
};

// Process-wide cache: tables are large and read-only once built.
inline std::shared_ptr<const DlogTable> shared_dlog_table(const GroupParams& gp, std::uint64_t window,
                                                          std::uint64_t baby_steps = 0) {
  static std::mutex mu;
  static std::map<std::tuple<int, std::uint64_t, std::uint64_t>, std::shared_ptr<const DlogTable>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{gp.security_bits, window, baby_steps}];
  if (!slot || !(slot->group() == gp)) slot = std::make_shared<const DlogTable>(gp, window, baby_steps);
  return slot;
}

// Test-mode instrumentation. Entities write what they observe here; the
// protocol never reads it back.
struct LayerTrace {
  unsigned layer = 0;
  EntityId leader = EntityId::CS1;
  std::uint32_t index = 0;
  std::uint64_t partial_leader = 0;
  std::uint64_t partial_peer = 0;
  std::int64_t r = 0;
  bool right = false;
};

struct ServerView {
  std::size_t model_records = 0;  // records held when the query arrived
  std::vector<std::uint32_t> observed_indexes;
  std::vector<unsigned> decided_layers;
};

struct SessionTrace {
  std::vector<LayerTrace> layers;
  std::array<ServerView, 2> servers;  // [0] = CS1, [1] = CS2
};

struct Probe {
  std::map<SessionId, SessionTrace> sessions;

  ServerView& view(const SessionId& s, EntityId server) {
    return sessions[s].servers[server == EntityId::CS1 ? 0 : 1];
  }
};

class Kgc : public Endpoint {
 public:
  Kgc(IpfeSecretKey msk, const GroupParams& gp, ProtocolParams params)
      : msk_(std::move(msk)), gp_(gp), params_(params), ring_(params.ring_bits) {}

  std::uint32_t gamma() const { return gamma_; }
  std::size_t open_sessions() const { return sessions_.size(); }

  void on_frame(const Frame& f, LocalTransport& t) override {
    switch (f.kind) {
      case MessageKind::SeedCt: {
        if (f.from != EntityId::MP) throw ProtocolError("seed ciphertext must come from MP");
        const auto m = decode_seed_ct(f.payload);
        gamma_ = m.gamma;
        depth_ = CompleteTree::layer_of(m.gamma);
        if (gamma_ != (std::uint32_t{1} << depth_) - 1) throw ProtocolError("gamma is not 2^d - 1");
        t.send(Frame{kModelSession, EntityId::KGC, EntityId::DU, MessageKind::SeedCt, f.payload});
        break;
      }
      case MessageKind::UnitShares: {
        if (f.from != EntityId::DU) throw ProtocolError("unit shares must come from DU");
        if (closed_.count(f.session) || (sessions_.count(f.session) && sessions_[f.session].unit))
          throw ProtocolError("unit shares replayed for session " + to_hex(f.session));
        auto& s = sessions_[f.session];
        s.unit = decode_unit_shares(ring_, f.payload);
        auto pending = std::move(s.pending);
        s.pending.clear();
        for (const auto& [party, m] : pending) issue(f.session, party, m, t);
        break;
      }
      case MessageKind::FeatureShare: {
        const Party party = party_of(f.from);
        const auto m = decode_layer_value(ring_, f.payload);
        if (m.party != party) throw ProtocolError("feature share party tag does not match sender");
        if (depth_ == 0) throw ProtocolError("KGC has no model registered");
        if (m.layer < 1 || m.layer > depth_) throw ProtocolError("feature share for a layer outside the tree");
        if (closed_.count(f.session)) throw ProtocolError("session " + to_hex(f.session) + " already closed");
        auto& s = sessions_[f.session];
        if (!s.used.insert({party, m.layer}).second)
          throw ProtocolError("replayed key request for layer " + std::to_string(m.layer));
        if (!s.unit) {
          s.pending.emplace_back(party, m);
          break;
        }
        issue(f.session, party, m, t);
        break;
      }
      default:
        throw ProtocolError(std::string("KGC cannot handle ") + kind_name(f.kind));
    }
  }

 private:
  struct Session {
    std::optional<UnitShares> unit;
    std::set<std::pair<Party, unsigned>> used;
    std::vector<std::pair<Party, LayerValue>> pending;
    unsigned issued = 0;
  };

  void issue(const SessionId& sid, Party party, const LayerValue& m, LocalTransport& t) {
    auto& s = sessions_.at(sid);
    const std::uint64_t one = party == Party::One ? s.unit->one : s.unit->two;
    FuncKeyMsg out{m.layer, ipfe_keyder(msk_, gp_, {one, m.value})};
    t.send(Frame{sid, EntityId::KGC, server_of(party), MessageKind::FuncKey, encode_func_key(gp_, ring_, out)});
    // Shares are held only until the last key of the session is out.
    if (++s.issued == 2 * depth_) {
      sessions_.erase(sid);
      closed_.insert(sid);
    }
  }

  IpfeSecretKey msk_;
  const GroupParams& gp_;
  ProtocolParams params_;
  RingParams ring_;
  std::uint32_t gamma_ = 0;
  unsigned depth_ = 0;
  std::map<SessionId, Session> sessions_;
  std::set<SessionId> closed_;
};

class Provider : public Endpoint {
 public:
  Provider(SymmetricKeys keys, IpfePublicKey mpk, ProtocolParams params)
      : keys_(std::move(keys)), mpk_(std::move(mpk)), params_(params) {}

  // Runs model preparation and dispatches E_T to CS1, the root to CS2 and
  // the encrypted seed to KGC.
  void provision(const CompleteTree& tree, LocalTransport& t, Rng& rng) {
    t.timed(EntityId::MP, kModelSession, [&] {
      const auto seed = PrfSeed::sample(static_cast<std::uint32_t>(tree.gamma()), rng);
      PreparedModel pm = prepare_model(tree, keys_, mpk_, seed, params_, rng);
      const GroupParams& gp = mpk_.group();
      const auto records = static_cast<std::uint32_t>(pm.tree.internal.size() + pm.tree.leaves.size());
      t.send(Frame{kModelSession, EntityId::MP, EntityId::CS1, MessageKind::PrepTree,
                   encode_encrypted_tree(gp, pm.tree)},
             records);
      t.send(Frame{kModelSession, EntityId::MP, EntityId::CS2, MessageKind::PrepRoot,
                   encode_root_payload(gp, pm.root)},
             1);
      t.send(Frame{kModelSession, EntityId::MP, EntityId::KGC, MessageKind::SeedCt,
                   encode(SeedCtMsg{seed.gamma, pm.seed_ct})});
      shuffle_ = std::move(pm.shuffle);
      secrets_ = std::move(pm.secrets);
    });
  }

  const ShuffledIndexMap& shuffle() const { return shuffle_; }
  const std::vector<NodeSecret>& secrets() const { return secrets_; }

  void on_frame(const Frame& f, LocalTransport&) override {
    throw ProtocolError(std::string("MP does not accept ") + kind_name(f.kind));
  }

 private:
  SymmetricKeys keys_;
  IpfePublicKey mpk_;
  ProtocolParams params_;
  ShuffledIndexMap shuffle_;
  std::vector<NodeSecret> secrets_;
};

// CS1 or CS2. CS1 holds E_T, CS2 only the encrypted root; subtrees move
// between them as the path is walked.
class Server : public Endpoint {
 public:
  Server(EntityId id, SymmetricKey key, IpfePublicKey mpk, ProtocolParams params,
         std::shared_ptr<const DlogTable> table, Probe* probe = nullptr)
      : id_(id),
        party_(party_of(id)),
        key_(std::move(key)),
        mpk_(std::move(mpk)),
        params_(params),
        ring_(params.ring_bits),
        table_(std::move(table)),
        probe_(probe) {
    const KeyRole want = id == EntityId::CS1 ? KeyRole::Sk1 : KeyRole::Sk2;
    if (key_.role() != want) throw ParameterError(std::string(entity_name(id)) + " needs " + role_name(want));
  }

  EntityId id() const { return id_; }

  // Tree-node records currently stored as the model.
  std::size_t model_records() const {
    if (tree_) return tree_->internal.size() + tree_->leaves.size();
    return root_ ? 1 : 0;
  }
  const std::optional<TreeShape>& shape() const { return shape_; }

  void on_frame(const Frame& f, LocalTransport& t) override {
    switch (f.kind) {
      case MessageKind::PrepTree: return on_prep_tree(f);
      case MessageKind::PrepRoot: return on_prep_root(f);
      case MessageKind::QueryShares: return on_query(f, t);
      case MessageKind::FuncKey: return on_func_key(f, t);
      case MessageKind::PartialResult: return on_partial(f, t);
      case MessageKind::Subtree: return on_subtree(f, t);
      case MessageKind::PlainIndex: return on_plain_index(f, t);
      default: throw ProtocolError(std::string(entity_name(id_)) + " cannot handle " + kind_name(f.kind));
    }
  }

 private:
  struct Session {
    bool started = false;
    bool done = false;
    ShareVector shares;
    unsigned layer = 0;
    bool awaiting_index = false;      // shipped a subtree, waiting for PlainIndex
    bool full_tree = false;           // CS1 at layer 1 walks E_T in place
    std::optional<Subtree> subtree;   // subtree rooted at `layer`, when this server holds it
    EncInternalNode node;             // record evaluated at `layer`
    std::uint32_t index = 0;
    std::set<unsigned> evaluated;
    std::optional<std::uint64_t> own_partial;
    std::map<unsigned, std::uint64_t> peer_partials;
  };

  const TreeShape& need_shape() const {
    if (!shape_) throw ProtocolError(std::string(entity_name(id_)) + " has no model");
    return *shape_;
  }

  void check_shape(const TreeShape& s) const {
    if (s.ring_bits != params_.ring_bits || s.feature_bits != params_.feature_bits || s.a_max != params_.a_max() ||
        s.b_max != params_.b_max())
      throw ProtocolError("model shape disagrees with the public parameters");
  }

  void on_prep_tree(const Frame& f) {
    if (id_ != EntityId::CS1 || f.from != EntityId::MP) throw ProtocolError("E_T must go from MP to CS1");
    auto t = decode_encrypted_tree(mpk_.group(), f.payload);
    check_shape(t.shape);
    shape_ = t.shape;
    tree_ = std::move(t);
  }

  void on_prep_root(const Frame& f) {
    if (id_ != EntityId::CS2 || f.from != EntityId::MP) throw ProtocolError("root payload must go from MP to CS2");
    auto r = decode_root_payload(mpk_.group(), f.payload);
    check_shape(r.shape);
    shape_ = r.shape;
    root_ = std::move(r);
  }

  std::uint32_t open_index(ByteSpan ct) const {
    const std::uint32_t d = decode_index(ske_decrypt(key_, ct));
    if (d < 1 || d > need_shape().gamma()) throw ProtocolError("node index outside [1, gamma]");
    return d;
  }

  void observe(const SessionId& sid, std::uint32_t index) {
    if (probe_) probe_->view(sid, id_).observed_indexes.push_back(index);
  }

  void on_query(const Frame& f, LocalTransport& t) {
    if (f.from != EntityId::DU) throw ProtocolError("query shares must come from DU");
    const TreeShape& shape = need_shape();
    auto& s = sessions_[f.session];
    if (s.started) throw ProtocolError("session " + to_hex(f.session) + " replayed");
    s.started = true;
    s.shares = decode_share_vector(f.payload);
    if (s.shares.party != party_) throw ProtocolError("share vector addressed to the other server");
    if (s.shares.ring_bits != shape.ring_bits || s.shares.features.size() != shape.n ||
        s.shares.offsets.size() != shape.gamma())
      throw ProtocolError("share vector shape does not match the model");
    if (probe_) probe_->view(f.session, id_).model_records = model_records();

    s.layer = 1;
    if (tree_) {
      s.full_tree = true;
      s.node = tree_->internal[0];
    } else {
      s.node = root_->root;
    }
    s.index = open_index(s.node.index_ct);
    observe(f.session, s.index);
    start_layer(f.session, s, t);
  }

  void start_layer(const SessionId& sid, Session& s, LocalTransport& t) {
    if (!s.evaluated.insert(s.layer).second) throw ProtocolError("layer evaluated twice in one session");
    s.own_partial.reset();
    // <x_i>^p = e'^T <x>^p + <x_{d_i}>^p
    const std::uint64_t xi = ring_.add(dot_mod(ring_, s.node.masked_feature, s.shares.features),
                                       s.shares.offsets.at(s.index - 1));
    t.send(Frame{sid, id_, EntityId::KGC, MessageKind::FeatureShare,
                 encode_layer_value(ring_, LayerValue{party_, s.layer, xi})});
  }

  Session& active(const SessionId& sid) {
    auto it = sessions_.find(sid);
    if (it == sessions_.end() || !it->second.started) throw ProtocolError("unknown session " + to_hex(sid));
    if (it->second.done) throw ProtocolError("session " + to_hex(sid) + " already finished");
    return it->second;
  }

  void on_func_key(const Frame& f, LocalTransport& t) {
    if (f.from != EntityId::KGC) throw ProtocolError("functional keys must come from KGC");
    Session& s = active(f.session);
    const auto m = decode_func_key(mpk_.group(), ring_, f.payload);
    if (m.layer != s.layer || s.awaiting_index || s.own_partial)
      throw ProtocolError("functional key for an unexpected layer");
    const std::int64_t partial = ipfe_decrypt(mpk_, s.node.coeffs, m.key, *table_);
    ++t.transcript().counters(f.session).fe_decryptions;
    const std::uint64_t v = signed_encode(ring_, partial);
    if (leader_of(s.layer) == id_) {
      s.own_partial = v;
      try_decide(f.session, s, t);
    } else {
      s.own_partial = v;
      t.send(Frame{f.session, id_, peer_of(id_), MessageKind::PartialResult,
                   encode_layer_value(ring_, LayerValue{party_, s.layer, v})});
    }
  }

  void on_partial(const Frame& f, LocalTransport& t) {
    if (f.from != peer_of(id_)) throw ProtocolError("partial results come only from the peer server");
    const auto m = decode_layer_value(ring_, f.payload);
    if (leader_of(m.layer) != id_) throw ProtocolError("partial result sent to the non-leader");
    // Layer-1 partials can overtake this server's own query shares.
    auto& s = sessions_[f.session];
    if (s.done) throw ProtocolError("session " + to_hex(f.session) + " already finished");
    if (!s.peer_partials.emplace(m.layer, m.value).second) throw ProtocolError("duplicate partial result");
    if (s.started && s.layer == m.layer) try_decide(f.session, s, t);
  }

  void try_decide(const SessionId& sid, Session& s, LocalTransport& t) {
    auto peer = s.peer_partials.find(s.layer);
    if (!s.own_partial || peer == s.peer_partials.end()) return;
    const std::int64_t r = signed_decode(ring_, ring_.add(*s.own_partial, peer->second));
    const bool right = r > 1;
    ++t.transcript().counters(sid).sine_evaluations;
    if (probe_) {
      probe_->view(sid, id_).decided_layers.push_back(s.layer);
      probe_->sessions[sid].layers.push_back(
          LayerTrace{s.layer, id_, s.index, *s.own_partial, peer->second, r, right});
    }
    s.peer_partials.erase(peer);

    const SubtreeView view = s.full_tree ? tree_->view() : s.subtree->view();
    if (s.layer == need_shape().depth) {
      const EncLeaf& leaf = view.leaves[right ? 1 : 0];
      t.send(Frame{sid, id_, EntityId::DU, MessageKind::LeafLabel, encode_leaf_label(leaf)}, 1);
      ++t.transcript().counters(sid).subtree_nodes_sent;
      finish(sid, s);
      return;
    }
    Subtree child = child_subtree(view, right);
    // Peel this server's layer; the peer peels the last one.
    child.internal[0].index_ct = ske_decrypt(key_, child.internal[0].index_ct);
    const auto records = static_cast<std::uint32_t>(child.record_count());
    auto& c = t.transcript().counters(sid);
    c.subtree_nodes_sent += records;
    c.inter_server_records += records;
    s.node = child.internal[0];
    s.layer += 1;
    s.full_tree = false;
    s.subtree.reset();
    s.own_partial.reset();
    s.awaiting_index = true;
    t.send(Frame{sid, id_, peer_of(id_), MessageKind::Subtree,
                 encode_subtree(mpk_.group(), ring_, need_shape().n, child)},
           records);
  }

  void on_subtree(const Frame& f, LocalTransport& t) {
    if (f.from != peer_of(id_)) throw ProtocolError("subtrees come only from the peer server");
    Session& s = active(f.session);
    Subtree sub = decode_subtree(mpk_.group(), need_shape(), f.payload);
    if (sub.top_layer != s.layer + 1 || leader_of(sub.top_layer) != id_ || s.awaiting_index)
      throw ProtocolError("subtree arrived out of turn");
    s.layer = sub.top_layer;
    s.index = open_index(sub.internal[0].index_ct);
    observe(f.session, s.index);
    s.node = sub.internal[0];
    s.subtree = std::move(sub);
    s.full_tree = false;
    t.send(Frame{f.session, id_, peer_of(id_), MessageKind::PlainIndex, encode(PlainIndexMsg{s.layer, s.index})});
    start_layer(f.session, s, t);
  }

  void on_plain_index(const Frame& f, LocalTransport& t) {
    if (f.from != peer_of(id_)) throw ProtocolError("plain indexes come only from the peer server");
    Session& s = active(f.session);
    const auto m = decode_plain_index(f.payload);
    if (!s.awaiting_index || m.layer != s.layer) throw ProtocolError("plain index for an unexpected layer");
    if (m.index < 1 || m.index > need_shape().gamma()) throw ProtocolError("plain index outside [1, gamma]");
    s.awaiting_index = false;
    s.index = m.index;
    observe(f.session, s.index);
    start_layer(f.session, s, t);
  }

  void finish(const SessionId& sid, Session& s) {
    s.done = true;
    s.shares = ShareVector{};
    s.subtree.reset();
    s.peer_partials.clear();
    (void)sid;
  }

  EntityId id_;
  Party party_;
  SymmetricKey key_;
  IpfePublicKey mpk_;
  ProtocolParams params_;
  RingParams ring_;
  std::shared_ptr<const DlogTable> table_;
  Probe* probe_;
  std::optional<TreeShape> shape_;
  std::optional<EncryptedTree> tree_;
  std::optional<RootPayload> root_;
  std::map<SessionId, Session> sessions_;
};

class User : public Endpoint {
 public:
  User(SymmetricKey sk3, ProtocolParams params) : sk3_(std::move(sk3)), params_(params) {
    if (sk3_.role() != KeyRole::Sk3) throw ParameterError("DU needs sk3");
  }

  bool ready() const { return seed_.has_value(); }
  std::uint32_t gamma() const { return seed_ ? seed_->gamma : 0; }

  // One upload: shares to each server and the unit shares to KGC.
  SessionId submit(std::span<const std::uint32_t> x, LocalTransport& t, Rng& rng) {
    if (!seed_) throw ProtocolError("DU has not received the model seed");
    // The session id only exists once preparation is done, so time it by hand.
    const auto t0 = std::chrono::steady_clock::now();
    QueryBundle q = prepare_query(x, *seed_, params_, seed_->gamma, rng);
    const SessionId sid = q.session;
    t.transcript().add_time(
        sid, EntityId::DU,
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count());
    if (results_.count(sid)) throw ProtocolError("session id collision");
    results_[sid] = std::nullopt;
    t.send(Frame{sid, EntityId::DU, EntityId::CS1, MessageKind::QueryShares, encode_share_vector(q.cs1)});
    t.send(Frame{sid, EntityId::DU, EntityId::CS2, MessageKind::QueryShares, encode_share_vector(q.cs2)});
    t.send(Frame{sid, EntityId::DU, EntityId::KGC, MessageKind::UnitShares,
                 encode_unit_shares(params_.ring(), q.unit)});
    return sid;
  }

  // Registers a session whose shares were prepared offline.
  void adopt(const SessionId& sid) {
    if (!results_.emplace(sid, std::nullopt).second) throw ProtocolError("session id collision");
  }

  std::optional<std::string> result(const SessionId& sid) const {
    auto it = results_.find(sid);
    return it == results_.end() ? std::nullopt : it->second;
  }

  void on_frame(const Frame& f, LocalTransport&) override {
    switch (f.kind) {
      case MessageKind::SeedCt: {
        if (f.from != EntityId::KGC) throw ProtocolError("seed ciphertext must be relayed by KGC");
        const auto m = decode_seed_ct(f.payload);
        seed_ = open_seed(m.ct, sk3_, m.gamma);
        break;
      }
      case MessageKind::LeafLabel: {
        if (f.from != EntityId::CS1 && f.from != EntityId::CS2) throw ProtocolError("labels come from a server");
        auto it = results_.find(f.session);
        if (it == results_.end()) throw ProtocolError("label for an unknown session");
        if (it->second) throw ProtocolError("second label for one session");
        it->second = decrypt_result(decode_leaf_label(f.payload).label_ct, sk3_);
        break;
      }
      default:
        throw ProtocolError(std::string("DU cannot handle ") + kind_name(f.kind));
    }
  }

 private:
  SymmetricKey sk3_;
  ProtocolParams params_;
  std::optional<PrfSeed> seed_;
  std::map<SessionId, std::optional<std::string>> results_;
};

struct DeploymentOptions {
  TransportOptions transport;
  bool instrument = true;
  std::uint64_t baby_steps = 0;  // 0 = DlogTable default
};

// All five entities wired to one in-process transport.
class Deployment {
 public:
  Deployment(const KeyMaterial& keys, Rng rng, DeploymentOptions opts = {})
      : keys_(keys),
        transport_(opts.transport),
        table_(shared_dlog_table(keys_.group(), keys_.params.dlog_window(), opts.baby_steps)),
        kgc_(keys.ipfe.msk, keys.group(), keys.params),
        mp_(keys.sym, keys.ipfe.mpk, keys.params),
        cs1_(EntityId::CS1, keys.sym.sk1, keys.ipfe.mpk, keys.params, table_, opts.instrument ? &probe_ : nullptr),
        cs2_(EntityId::CS2, keys.sym.sk2, keys.ipfe.mpk, keys.params, table_, opts.instrument ? &probe_ : nullptr),
        du_(keys.sym.sk3, keys.params),
        mp_rng_(rng.derive("mp")),
        du_rng_(rng.derive("du")) {
    transport_.attach(EntityId::KGC, &kgc_);
    transport_.attach(EntityId::MP, &mp_);
    transport_.attach(EntityId::CS1, &cs1_);
    transport_.attach(EntityId::CS2, &cs2_);
    transport_.attach(EntityId::DU, &du_);
  }

  Deployment(const Deployment&) = delete;
  Deployment& operator=(const Deployment&) = delete;

  void provision(const CompleteTree& tree) {
    mp_.provision(tree, transport_, mp_rng_);
    transport_.run();
    if (!du_.ready()) throw ProtocolError("model provisioning did not reach DU");
  }

  // Provisioning from files written by `prepare`: the frames MP would send.
  void provision_encrypted(Bytes tree, Bytes root, const SeedCtMsg& seed, std::uint32_t records) {
    transport_.send(Frame{kModelSession, EntityId::MP, EntityId::CS1, MessageKind::PrepTree, std::move(tree)}, records);
    transport_.send(Frame{kModelSession, EntityId::MP, EntityId::CS2, MessageKind::PrepRoot, std::move(root)}, 1);
    transport_.send(Frame{kModelSession, EntityId::MP, EntityId::KGC, MessageKind::SeedCt, encode(seed)});
    transport_.run();
    if (!du_.ready()) throw ProtocolError("model provisioning did not reach DU");
  }

  SessionId submit(std::span<const std::uint32_t> x) { return du_.submit(x, transport_, du_rng_); }

  // Upload of share files prepared offline; each carries its party's unit share.
  SessionId submit_shares(ShareVector a, ShareVector b) {
    if (a.party == b.party) throw ProtocolError("need one share file per server");
    if (a.party == Party::Two) std::swap(a, b);
    if (!a.unit || !b.unit) throw ProtocolError("share files lack the unit share");
    const UnitShares unit{*a.unit, *b.unit};
    a.unit.reset();
    b.unit.reset();
    const SessionId sid = new_session_id(du_rng_);
    du_.adopt(sid);
    transport_.send(Frame{sid, EntityId::DU, EntityId::CS1, MessageKind::QueryShares, encode_share_vector(a)});
    transport_.send(Frame{sid, EntityId::DU, EntityId::CS2, MessageKind::QueryShares, encode_share_vector(b)});
    transport_.send(Frame{sid, EntityId::DU, EntityId::KGC, MessageKind::UnitShares,
                          encode_unit_shares(keys_.params.ring(), unit)});
    return sid;
  }
  void run() { transport_.run(); }

  std::optional<std::string> result(const SessionId& s) const { return du_.result(s); }

  struct Outcome {
    SessionId session;
    std::string label;
  };

  Outcome infer(std::span<const std::uint32_t> x) {
    const SessionId s = submit(x);
    run();
    auto label = result(s);
    if (!label) throw ProtocolError("session ended without a label");
    return {s, *label};
  }

  const KeyMaterial& keys() const { return keys_; }
  LocalTransport& transport() { return transport_; }
  Transcript& transcript() { return transport_.transcript(); }
  const Transcript& transcript() const { return transport_.transcript(); }
  const Probe& probe() const { return probe_; }
  const Provider& provider() const { return mp_; }
  const Kgc& kgc() const { return kgc_; }
  const Server& cs1() const { return cs1_; }
  const Server& cs2() const { return cs2_; }
  const DlogTable& dlog_table() const { return *table_; }

 private:
  KeyMaterial keys_;
  LocalTransport transport_;
  Probe probe_;
  std::shared_ptr<const DlogTable> table_;
  Kgc kgc_;
  Provider mp_;
  Server cs1_, cs2_;
  User du_;
  Rng mp_rng_, du_rng_;
};

}  // namespace onepath
