// onepath: command-line front end for key generation, model preparation,
// offline query sharing, encrypted inference, benchmarks and self-test.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "onepath/onepath.hpp"

namespace fs = std::filesystem;
using namespace onepath;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInvariant = 2;
constexpr int kExitInfeasible = 3;

struct InvariantFailure : Error {
  using Error::Error;
};

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw FormatError("not a number: \"" + cell + "\"");
    }
  }
  if (out.empty()) throw FormatError("empty input vector");
  return out;
}

nlohmann::json quantizer_json(const Quantizer& q) {
  return {{"bits", q.bits}, {"offset", q.offset}, {"scale", q.scale}};
}

Quantizer quantizer_from_json(const nlohmann::json& j) {
  Quantizer q;
  q.bits = j.at("bits").get<unsigned>();
  q.offset = j.at("offset").get<std::vector<double>>();
  q.scale = j.at("scale").get<std::vector<double>>();
  if (q.offset.size() != q.scale.size()) throw FormatError("quantizer offset/scale lengths differ");
  return q;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw FormatError("cannot write " + p.string());
  out << s;
}

Rng command_rng(const char* label) { return root_rng().derive(label); }

int cmd_keygen(const fs::path& out, int security, unsigned l, unsigned t, bool force) {
  ProtocolParams p{security, l, t};
  p.validate();
  if (KeyDir::exists(out) && !force) {
    std::cerr << "keys already present in " << out << "; pass --force to overwrite\n";
    return kExitError;
  }
  Rng rng = command_rng("keygen");
  const KeyMaterial km = KeyMaterial::generate(p, rng);
  KeyDir::write(out, km);
  std::cout << "security " << p.security_bits << ", l = " << p.ring_bits << ", t = " << p.feature_bits
            << ", A_max = " << p.a_max() << ", B_max = " << p.b_max() << "\n"
            << "W = (A_max + B_max) * 2^l = " << p.dlog_window() << "\n"
            << "wrote " << out / KeyDir::kParams << ", mpk, msk, sk1, sk2, sk3\n";
  return kExitOk;
}

int cmd_train(const fs::path& data, unsigned depth, unsigned t, const fs::path& out) {
  const Dataset ds = read_csv_file(data.string());
  const Quantizer q = Quantizer::fit(ds.rows, ds.n_features(), t);
  const Dataset qds = quantize_dataset(ds, q);
  const PlainTree plain = train_cart(qds, depth);
  const CompleteTree tree = complete_pad(quantize(plain, Quantizer::identity(ds.n_features(), t)), depth);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (plaintext_infer(tree, q.quantize(ds.rows[i])).label == ds.labels[i]) ++correct;
  write_tree_file(out.string(), tree, q);
  std::cout << "trained depth " << plain.depth() << ", padded to " << depth << " (" << tree.gamma()
            << " internal nodes); training accuracy " << static_cast<double>(correct) / ds.size() << "\n";
  return kExitOk;
}

int cmd_prepare(const fs::path& keys_dir, const fs::path& tree_path, const fs::path& out) {
  const KeyMaterial km = KeyDir::read(keys_dir);
  const TreeFile tf = read_tree_file(tree_path.string());
  if (tf.quantizer.bits != km.params.feature_bits)
    throw ParameterError("tree quantized to " + std::to_string(tf.quantizer.bits) + " bits but keys use t = " +
                         std::to_string(km.params.feature_bits));
  Rng rng = command_rng("prepare");
  const auto seed = PrfSeed::sample(static_cast<std::uint32_t>(tf.tree.gamma()), rng);
  const PreparedModel pm = prepare_model(tf.tree, km.sym, km.ipfe.mpk, seed, km.params, rng);
  fs::create_directories(out);
  write_file(out / "cs1.op1t", encode_encrypted_tree(km.group(), pm.tree));
  write_file(out / "cs2.op1t", encode_root_payload(km.group(), pm.root));
  write_file(out / "seed.op1k", encode_seed_file(SeedCtMsg{seed.gamma, pm.seed_ct}));
  write_text(out / "quantizer.json", quantizer_json(tf.quantizer).dump(1) + "\n");
  std::cout << "prepared d = " << tf.tree.depth << ", n = " << tf.tree.n_features << ": "
            << pm.tree.internal.size() << " encrypted nodes, " << pm.tree.leaves.size() << " encrypted leaves\n";
  return kExitOk;
}

int cmd_share(const fs::path& keys_dir, const fs::path& model, const std::string& input, const fs::path& out) {
  const KeyMaterial km = KeyDir::read(keys_dir);
  const SeedCtMsg sm = decode_seed_file(read_file(model / "seed.op1k"));
  const PrfSeed seed = open_seed(sm.ct, km.sym.sk3, sm.gamma);
  std::ifstream qin(model / "quantizer.json");
  if (!qin) throw FormatError("cannot open " + (model / "quantizer.json").string());
  const Quantizer q = quantizer_from_json(nlohmann::json::parse(qin));
  std::size_t clamped = 0;
  const auto x = q.quantize(parse_values(input), OutOfDomain::Clamp, &clamped);
  if (clamped) std::cerr << "warning: " << clamped << " value(s) clamped to the quantizer domain\n";
  Rng rng = command_rng("share");
  QueryBundle qb = prepare_query(x, seed, km.params, sm.gamma, rng);
  qb.cs1.unit = qb.unit.one;
  qb.cs2.unit = qb.unit.two;
  fs::create_directories(out);
  write_file(out / "cs1.op1s", encode_share_vector(qb.cs1));
  write_file(out / "cs2.op1s", encode_share_vector(qb.cs2));
  std::cout << "wrote shares for n = " << x.size() << ", gamma = " << sm.gamma << " to " << out << "\n";
  return kExitOk;
}

void maybe_write_transcript(const Transcript& tr, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  tr.export_jsonl(out);
}

int cmd_infer(const fs::path& keys_dir, const fs::path& model, const fs::path& shares, const std::string& transcript) {
  const KeyMaterial km = KeyDir::read(keys_dir);
  Bytes tree_bytes = read_file(model / "cs1.op1t");
  const EncryptedTree et = decode_encrypted_tree(km.group(), tree_bytes);
  const SeedCtMsg sm = decode_seed_file(read_file(model / "seed.op1k"));
  DeploymentOptions opts;
  opts.transport.zero_timestamps = env_seed().has_value();
  opts.instrument = false;
  Deployment dep(km, command_rng("infer"), opts);
  dep.provision_encrypted(std::move(tree_bytes), read_file(model / "cs2.op1t"), sm,
                          static_cast<std::uint32_t>(et.internal.size() + et.leaves.size()));
  const SessionId sid = dep.submit_shares(decode_share_vector(read_file(shares / "cs1.op1s")),
                                          decode_share_vector(read_file(shares / "cs2.op1s")));
  dep.run();
  const auto label = dep.result(sid);
  if (!label) throw InvariantFailure("session finished without a label");
  dep.transcript().verify(sid);
  std::cout << *label << "\n";
  maybe_write_transcript(dep.transcript(), transcript);
  return kExitOk;
}

int cmd_bench(const fs::path& data, const BenchConfig& cfg, const ProtocolParams& p, const std::string& json_out) {
  p.validate();
  const Dataset ds = read_csv_file(data.string());
  Rng rng = command_rng("bench");
  Rng key_rng = rng.derive("keys");
  const KeyMaterial km = KeyMaterial::generate(p, key_rng);
  const BenchReport rep = run_bench(ds, cfg, km, rng);
  std::cout << to_table(rep);
  const std::string js = to_json(rep).dump(2) + "\n";
  if (!json_out.empty()) write_text(json_out, js);
  else std::cout << js;
  if (!rep.ok())
    throw InvariantFailure("oracle agreement " + std::to_string(rep.agree) + "/" + std::to_string(rep.queries) +
                           (rep.counters_consistent ? "" : ", counters inconsistent"));
  return kExitOk;
}

int cmd_selftest(const std::string& keys_dir, const std::string& transcript, std::size_t trees) {
  Rng rng = command_rng("selftest");
  std::optional<KeyMaterial> km;
  if (!keys_dir.empty()) {
    try {
      km = KeyDir::read(keys_dir);
    } catch (const std::exception& e) {
      std::cout << "FAIL  key files: " << e.what() << "\n";
      return kExitInvariant;
    }
  } else {
    Rng key_rng = rng.derive("keys");
    km = KeyMaterial::generate(ProtocolParams{}, key_rng);
  }
  SelftestOptions opt;
  opt.trees = trees;
  const SelftestResult res = run_selftest(*km, rng.derive("suite"), opt);
  for (const auto& c : res.checks) std::cout << (c.ok ? "PASS  " : "FAIL  ") << c.name << ": " << c.detail << "\n";
  if (!transcript.empty()) write_text(transcript, res.transcript_jsonl);
  return res.passed() ? kExitOk : kExitInvariant;
}

int cmd_audit(const fs::path& keys_dir, const fs::path& tree_path, const std::string& input) {
  const KeyMaterial km = KeyDir::read(keys_dir);
  const TreeFile tf = read_tree_file(tree_path.string());
  const auto x = tf.quantizer.quantize(parse_values(input));
  DeploymentOptions opts;
  opts.transport.zero_timestamps = env_seed().has_value();
  Deployment dep(km, command_rng("audit"), opts);
  dep.provision(tf.tree);
  const auto out = dep.infer(x);
  const AuditReport rep = leakage_audit(dep, out.session, tf.tree, x);
  std::cout << nlohmann::json{{"label", out.label}, {"passed", rep.passed()}, {"findings", to_json(rep)}}.dump(2)
            << "\n";
  return rep.passed() ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OnePath privacy-preserving decision-tree inference"};
  app.require_subcommand(1);

  std::string keys_dir, out, data, tree, model, shares, input, transcript, json_out, name;
  int security = 128;
  unsigned ring_bits = 16, feature_bits = 7, depth = 3;
  std::size_t reps = 10, jobs = 1, trees = 8;
  bool force = false;

  auto* keygen = app.add_subcommand("keygen", "generate IPFE master keys, sk1..sk3 and public parameters");
  keygen->add_option("--out", out, "output directory")->required();
  keygen->add_option("--security", security, "112 or 128");
  keygen->add_option("--ring-bits,-l", ring_bits, "share ring width l");
  keygen->add_option("--feature-bits,-t", feature_bits, "feature quantization bits t");
  keygen->add_flag("--force", force, "overwrite existing key files");

  auto* train = app.add_subcommand("train", "train a CART tree on a CSV and pad it to a complete tree");
  train->add_option("--data", data, "CSV with header, label in the last column")->required();
  train->add_option("--depth,-d", depth, "tree depth")->required();
  train->add_option("--feature-bits,-t", feature_bits, "feature quantization bits t");
  train->add_option("--out", out, "tree JSON output")->required();

  auto* prepare = app.add_subcommand("prepare", "encrypt a tree into the CS1/CS2 payloads and the seed ciphertext");
  prepare->add_option("--keys", keys_dir, "key directory")->required();
  prepare->add_option("--tree", tree, "tree JSON")->required();
  prepare->add_option("--out", out, "model output directory")->required();

  auto* share = app.add_subcommand("share", "split a query into share files for CS1 and CS2");
  share->add_option("--keys", keys_dir, "key directory (uses params and sk3)")->required();
  share->add_option("--model", model, "model directory written by prepare")->required();
  share->add_option("--input", input, "comma-separated raw feature values")->required();
  share->add_option("--out", out, "share output directory")->required();

  auto* infer = app.add_subcommand("infer", "run the encrypted traversal on prepared shares");
  infer->add_option("--keys", keys_dir, "key directory")->required();
  infer->add_option("--model", model, "model directory")->required();
  infer->add_option("--shares", shares, "share directory")->required();
  infer->add_option("--transcript", transcript, "write the message log as JSON lines");

  auto* bench = app.add_subcommand("bench", "train, prepare and run oracle-checked encrypted queries");
  bench->add_option("--data", data, "CSV dataset")->required();
  bench->add_option("--depth,-d", depth, "tree depth in [1, 17]")->required();
  bench->add_option("--reps,-n", reps, "number of queries (0 = prepare only)");
  bench->add_option("--jobs,-j", jobs, "sessions in flight at once");
  bench->add_option("--security", security, "112 or 128");
  bench->add_option("--ring-bits,-l", ring_bits, "share ring width l");
  bench->add_option("--feature-bits,-t", feature_bits, "feature quantization bits t");
  bench->add_option("--json", json_out, "write the JSON report here instead of stdout");
  bench->add_option("--name", name, "dataset name in the report");

  auto* selftest = app.add_subcommand("selftest", "run the invariant suite");
  selftest->add_option("--keys", keys_dir, "use these key files instead of fresh keys");
  selftest->add_option("--transcript", transcript, "write the message log as JSON lines");
  selftest->add_option("--trees", trees, "random trees in the oracle check");

  auto* audit = app.add_subcommand("audit", "run one query with ground truth and print the leakage audit");
  audit->add_option("--keys", keys_dir, "key directory")->required();
  audit->add_option("--tree", tree, "tree JSON")->required();
  audit->add_option("--input", input, "comma-separated raw feature values")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (keygen->parsed()) return cmd_keygen(out, security, ring_bits, feature_bits, force);
    if (train->parsed()) return cmd_train(data, depth, feature_bits, out);
    if (prepare->parsed()) return cmd_prepare(keys_dir, tree, out);
    if (share->parsed()) return cmd_share(keys_dir, model, input, out);
    if (infer->parsed()) return cmd_infer(keys_dir, model, shares, transcript);
    if (bench->parsed()) {
      BenchConfig cfg;
      cfg.name = name.empty() ? fs::path(data).stem().string() : name;
      cfg.depth = depth;
      cfg.repetitions = reps;
      cfg.jobs = jobs;
      cfg.timings = !env_seed().has_value();
      return cmd_bench(data, cfg, ProtocolParams{security, ring_bits, feature_bits}, json_out);
    }
    if (selftest->parsed()) return cmd_selftest(keys_dir, transcript, trees);
    if (audit->parsed()) return cmd_audit(keys_dir, tree, input);
  } catch (const ParameterError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const InvariantFailure& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const AuthError& e) {
    std::cerr << "authentication failure: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
