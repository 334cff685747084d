#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "onepath/wire.hpp"

namespace onepath {

struct TranscriptRecord {
  std::uint64_t seq = 0;
  SessionId session{};
  EntityId from = EntityId::KGC;
  EntityId to = EntityId::KGC;
  MessageKind kind = MessageKind::PrepTree;
  std::uint64_t bytes = 0;    // header + payload
  std::uint32_t records = 0;  // tree-node records carried (internal + leaf)
  std::uint32_t depth = 0;    // causal depth: 1 + deepest message the sender had seen
  std::int64_t t_ns = 0;
  Bytes payload;              // kept only when the transcript retains payloads
};

struct Counters {
  std::uint64_t sine_evaluations = 0;
  std::uint64_t fe_decryptions = 0;
  std::uint64_t subtree_nodes_sent = 0;  // Subtree records + the delivered leaf record
  std::uint64_t inter_server_records = 0;
  std::uint64_t rounds = 0;

  friend bool operator==(const Counters&, const Counters&) = default;
};

inline nlohmann::json to_json(const Counters& c) {
  return {{"sine_evaluations", c.sine_evaluations},
          {"fe_decryptions", c.fe_decryptions},
          {"subtree_nodes_sent", c.subtree_nodes_sent},
          {"inter_server_records", c.inter_server_records},
          {"rounds", c.rounds}};
}

using EntityTimes = std::array<std::int64_t, 5>;  // ns, indexed by entity_slot

// Append-only message log. Counters are incremented by the entities as they
// act and can be re-derived from the log; `verify` compares the two.
class Transcript {
 public:
  explicit Transcript(bool keep_payloads = true, bool zero_timestamps = false)
      : keep_payloads_(keep_payloads), zero_timestamps_(zero_timestamps) {}

  bool keeps_payloads() const { return keep_payloads_; }
  const std::vector<TranscriptRecord>& records() const { return log_; }

  const TranscriptRecord& append(const Frame& f, std::uint32_t records, std::uint32_t depth, std::int64_t t_ns) {
    TranscriptRecord r;
    r.seq = log_.size();
    counters_[f.session];
    r.session = f.session;
    r.from = f.from;
    r.to = f.to;
    r.kind = f.kind;
    r.bytes = f.wire_size();
    r.records = records;
    r.depth = depth;
    r.t_ns = zero_timestamps_ ? 0 : t_ns;
    if (keep_payloads_) r.payload = f.payload;
    log_.push_back(std::move(r));
    return log_.back();
  }

  const std::vector<TranscriptRecord>& log() const { return log_; }

  Counters& counters(const SessionId& s) { return counters_[s]; }
  Counters counters(const SessionId& s) const {
    auto it = counters_.find(s);
    return it == counters_.end() ? Counters{} : it->second;
  }

  void add_time(const SessionId& s, EntityId e, std::int64_t ns) {
    times_[s][entity_slot(e)] += ns;
    totals_[entity_slot(e)] += ns;
  }
  EntityTimes times(const SessionId& s) const {
    auto it = times_.find(s);
    return it == times_.end() ? EntityTimes{} : it->second;
  }
  const EntityTimes& total_times() const { return totals_; }

  std::vector<SessionId> sessions() const {
    std::vector<SessionId> out;
    for (const auto& [s, c] : counters_)
      if (s != kModelSession) out.push_back(s);
    return out;
  }

  std::vector<const TranscriptRecord*> session_log(const SessionId& s) const {
    std::vector<const TranscriptRecord*> out;
    for (const auto& r : log_)
      if (r.session == s) out.push_back(&r);
    return out;
  }

  // Counters as implied by the message log alone.
  Counters derive(const SessionId& s) const {
    Counters c;
    for (const auto& r : log_) {
      if (r.session != s) continue;
      switch (r.kind) {
        case MessageKind::FeatureShare: ++c.sine_evaluations; break;  // halved below
        case MessageKind::FuncKey: ++c.fe_decryptions; break;
        case MessageKind::Subtree:
          c.subtree_nodes_sent += r.records;
          c.inter_server_records += r.records;
          break;
        case MessageKind::LeafLabel: c.subtree_nodes_sent += r.records; break;
        default: break;
      }
      c.rounds = std::max<std::uint64_t>(c.rounds, r.depth);
    }
    c.sine_evaluations /= 2;
    return c;
  }

  // Throws ProtocolError if maintained and derived counters disagree.
  void verify(const SessionId& s) const {
    const Counters kept = counters(s), derived = derive(s);
    if (!(kept == derived))
      throw ProtocolError("transcript counters disagree with the message log: kept " + to_json(kept).dump() +
                          ", derived " + to_json(derived).dump());
  }

  std::uint64_t edge_bytes(const SessionId& s, EntityId from, EntityId to) const {
    std::uint64_t b = 0;
    for (const auto& r : log_)
      if (r.session == s && r.from == from && r.to == to) b += r.bytes;
    return b;
  }

  std::uint64_t session_bytes(const SessionId& s) const {
    std::uint64_t b = 0;
    for (const auto& r : log_)
      if (r.session == s) b += r.bytes;
    return b;
  }

  // One JSON object per line: {seq, session, from, to, kind, bytes, records, t_ns}.
  void export_jsonl(std::ostream& out) const {
    for (const auto& r : log_) {
      nlohmann::ordered_json j;
      j["seq"] = r.seq;
      j["session"] = to_hex(r.session);
      j["from"] = entity_name(r.from);
      j["to"] = entity_name(r.to);
      j["kind"] = kind_name(r.kind);
      j["bytes"] = r.bytes;
      j["records"] = r.records;
      j["t_ns"] = r.t_ns;
      out << j.dump() << '\n';
    }
  }

 private:
  bool keep_payloads_;
  bool zero_timestamps_;
  std::vector<TranscriptRecord> log_;
  std::map<SessionId, Counters> counters_;
  std::map<SessionId, EntityTimes> times_;
  EntityTimes totals_{};
};

}  // namespace onepath
