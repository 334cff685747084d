#pragma once

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "onepath/audit.hpp"
#include "onepath/cart.hpp"
#include "onepath/entities.hpp"

namespace onepath {

struct BenchConfig {
  std::string name = "dataset";
  unsigned depth = 3;
  std::size_t repetitions = 10;
  std::size_t jobs = 1;  // sessions in flight at once
  std::uint64_t baby_steps = 0;
  // Off under ONEPATH_SEED so that seeded reports are byte-identical.
  bool timings = true;
};

struct BenchReport {
  std::string dataset;
  std::size_t rows = 0;
  std::size_t n = 0;
  unsigned depth = 0;
  unsigned trained_depth = 0;
  ProtocolParams params;
  bool timings = true;
  double train_accuracy = 0;      // quantized tree on quantized training rows
  double prepare_ms = 0;          // MP model preparation
  std::uint64_t model_bytes_cs1 = 0;
  std::uint64_t model_bytes_cs2 = 0;
  std::size_t queries = 0;
  std::size_t agree = 0;
  std::size_t clamped_values = 0;
  std::array<double, 5> entity_ms{};  // mean per query
  std::map<std::string, double> edge_bytes;  // "FROM->TO", mean per query
  double bytes_per_query = 0;
  double wall_ms_per_query = 0;
  Counters counters;  // per query; identical for every query on a complete tree
  bool counters_consistent = true;

  double agreement() const { return queries ? static_cast<double>(agree) / static_cast<double>(queries) : 1.0; }
  bool ok() const { return agree == queries && counters_consistent; }
};

inline nlohmann::ordered_json to_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["rows"] = r.rows;
  j["n"] = r.n;
  j["d"] = r.depth;
  j["trained_depth"] = r.trained_depth;
  j["params"] = {{"security_bits", r.params.security_bits},
                 {"l", r.params.ring_bits},
                 {"t", r.params.feature_bits},
                 {"A_max", r.params.a_max()},
                 {"B_max", r.params.b_max()},
                 {"W", r.params.dlog_window()}};
  j["timings"] = r.timings;
  j["train_accuracy"] = r.train_accuracy;
  j["prepare_ms"] = r.prepare_ms;
  j["model_bytes"] = {{"CS1", r.model_bytes_cs1}, {"CS2", r.model_bytes_cs2}};
  j["queries"] = r.queries;
  j["oracle_agreement"] = r.agreement();
  j["clamped_values"] = r.clamped_values;
  nlohmann::ordered_json ms;
  for (auto e : kAllEntities) ms[entity_name(e)] = r.entity_ms[entity_slot(e)];
  j["compute_ms_per_query"] = ms;
  j["edge_bytes_per_query"] = r.edge_bytes;
  j["bytes_per_query"] = r.bytes_per_query;
  j["wall_ms_per_query"] = r.wall_ms_per_query;
  j["counters"] = to_json(r.counters);
  j["counters_consistent"] = r.counters_consistent;
  return j;
}

// Human-readable summary: one row of per-entity cost, then the breakdown.
inline std::string to_table(const BenchReport& r) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(3);
  o << "dataset      d   n  queries  agree    DU ms   KGC ms   CS1 ms   CS2 ms   comm KB\n";
  o << std::left << std::setw(11) << r.dataset.substr(0, 11) << std::right << std::setw(3) << r.depth
    << std::setw(4) << r.n << std::setw(9) << r.queries << std::setw(7) << std::setprecision(1)
    << 100.0 * r.agreement() << "%" << std::setprecision(3);
  for (auto e : {EntityId::DU, EntityId::KGC, EntityId::CS1, EntityId::CS2})
    o << std::setw(9) << r.entity_ms[entity_slot(e)];
  o << std::setw(10) << r.bytes_per_query / 1024.0 << "\n\n";
  o << "model prep " << r.prepare_ms << " ms; E_T " << r.model_bytes_cs1 / 1024.0 << " KB to CS1, "
    << r.model_bytes_cs2 / 1024.0 << " KB to CS2\n";
  o << "per query: " << r.counters.sine_evaluations << " node evaluations, " << r.counters.fe_decryptions
    << " FE decryptions, " << r.counters.subtree_nodes_sent << " tree records sent, " << r.counters.rounds
    << " causal rounds, " << r.wall_ms_per_query << " ms wall\n";
  o << "bytes per query by edge:\n";
  for (const auto& [edge, b] : r.edge_bytes) o << "  " << std::left << std::setw(10) << edge << std::right << b << "\n";
  return o.str();
}

// Train on the dataset, pad to `depth`, provision, and run `repetitions`
// oracle-checked queries over the dataset rows.
inline BenchReport run_bench(const Dataset& ds, const BenchConfig& cfg, const KeyMaterial& keys, Rng rng) {
  if (cfg.depth < 1 || cfg.depth > 17) throw ParameterError("bench depth must be in [1, 17]");
  const ProtocolParams& params = keys.params;
  BenchReport rep;
  rep.dataset = cfg.name;
  rep.rows = ds.size();
  rep.n = ds.n_features();
  rep.depth = cfg.depth;
  rep.params = params;

  const Quantizer q = Quantizer::fit(ds.rows, ds.n_features(), params.feature_bits);
  const Dataset qds = quantize_dataset(ds, q);
  const PlainTree plain = train_cart(qds, cfg.depth);
  rep.trained_depth = plain.depth();
  const CompleteTree tree = complete_pad(quantize(plain, Quantizer::identity(ds.n_features(), params.feature_bits)),
                                         cfg.depth);
  std::vector<std::vector<std::uint32_t>> inputs;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < qds.size(); ++i) {
    inputs.push_back(q.quantize(ds.rows[i], OutOfDomain::Clamp, &rep.clamped_values));
    if (plaintext_infer(tree, inputs.back()).label == ds.labels[i]) ++correct;
  }
  rep.train_accuracy = ds.size() ? static_cast<double>(correct) / static_cast<double>(ds.size()) : 0.0;

  DeploymentOptions opts;
  opts.transport.keep_payloads = false;
  opts.transport.zero_timestamps = env_seed().has_value();
  opts.instrument = false;
  opts.baby_steps = cfg.baby_steps;
  Deployment dep(keys, rng.derive("bench"), opts);
  dep.provision(tree);
  const Transcript& tr = dep.transcript();
  rep.prepare_ms = static_cast<double>(tr.times(kModelSession)[entity_slot(EntityId::MP)]) / 1e6;
  rep.model_bytes_cs1 = tr.edge_bytes(kModelSession, EntityId::MP, EntityId::CS1);
  rep.model_bytes_cs2 = tr.edge_bytes(kModelSession, EntityId::MP, EntityId::CS2);

  std::vector<std::pair<SessionId, std::size_t>> sessions;
  const std::size_t jobs = std::max<std::size_t>(cfg.jobs, 1);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t done = 0; done < cfg.repetitions;) {
    std::vector<std::pair<SessionId, std::size_t>> batch;
    for (std::size_t j = 0; j < jobs && done < cfg.repetitions; ++j, ++done) {
      const std::size_t row = done % inputs.size();
      batch.emplace_back(dep.submit(inputs[row]), row);
    }
    dep.run();
    sessions.insert(sessions.end(), batch.begin(), batch.end());
  }
  const auto wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  rep.timings = cfg.timings;

  rep.queries = sessions.size();
  std::map<std::string, std::uint64_t> edges;
  std::array<std::int64_t, 5> ns{};
  std::uint64_t total_bytes = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& [sid, row] = sessions[i];
    const auto label = dep.result(sid);
    if (label && *label == plaintext_infer(tree, inputs[row]).label) ++rep.agree;
    const Counters c = tr.counters(sid);
    if (i == 0) rep.counters = c;
    if (!(c == rep.counters) || !(c == tr.derive(sid))) rep.counters_consistent = false;
    const auto times = tr.times(sid);
    for (std::size_t e = 0; e < 5; ++e) ns[e] += times[e];
    for (const auto* r : tr.session_log(sid)) {
      edges[std::string(entity_name(r->from)) + "->" + entity_name(r->to)] += r->bytes;
      total_bytes += r->bytes;
    }
  }
  if (rep.queries) {
    const double qn = static_cast<double>(rep.queries);
    for (std::size_t e = 0; e < 5; ++e) rep.entity_ms[e] = static_cast<double>(ns[e]) / 1e6 / qn;
    for (const auto& [k, v] : edges) rep.edge_bytes[k] = static_cast<double>(v) / qn;
    rep.bytes_per_query = static_cast<double>(total_bytes) / qn;
    rep.wall_ms_per_query = wall / qn;
  }
  if (!rep.timings) {
    rep.prepare_ms = rep.wall_ms_per_query = 0;
    rep.entity_ms.fill(0);
  }
  return rep;
}

}  // namespace onepath
