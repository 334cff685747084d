#pragma once

#include <fstream>
#include <string>

#include "json.hpp"
#include "onepath/tree.hpp"

namespace onepath {

// {depth, n, quantizer: {bits, offset, scale},
//  nodes: level-order [{feature, threshold, dummy} x gamma, {label} x 2^d]}
inline nlohmann::json tree_to_json(const CompleteTree& tree, const Quantizer& q) {
  nlohmann::json j;
  j["depth"] = tree.depth;
  j["n"] = tree.n_features;
  j["quantizer"] = {{"bits", q.bits}, {"offset", q.offset}, {"scale", q.scale}};
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& nd : tree.internal)
    nodes.push_back({{"feature", nd.feature}, {"threshold", nd.threshold}, {"dummy", nd.dummy}});
  for (const auto& l : tree.leaves) nodes.push_back({{"label", l}});
  return j;
}

struct TreeFile {
  CompleteTree tree;
  Quantizer quantizer;
};

inline TreeFile tree_from_json(const nlohmann::json& j) {
  try {
    TreeFile tf;
    tf.tree.depth = j.at("depth").get<unsigned>();
    tf.tree.n_features = j.at("n").get<std::size_t>();
    if (tf.tree.depth < 1 || tf.tree.depth > 24) throw FormatError("tree depth out of range");
    const auto& q = j.at("quantizer");
    tf.quantizer.bits = q.at("bits").get<unsigned>();
    tf.quantizer.offset = q.at("offset").get<std::vector<double>>();
    tf.quantizer.scale = q.at("scale").get<std::vector<double>>();
    if (tf.quantizer.offset.size() != tf.tree.n_features || tf.quantizer.scale.size() != tf.tree.n_features)
      throw FormatError("quantizer width does not match n");
    const auto& nodes = j.at("nodes");
    if (nodes.size() != tf.tree.gamma() + tf.tree.leaf_count())
      throw FormatError("node array must hold 2^(d+1) - 1 entries");
    for (std::size_t i = 0; i < tf.tree.gamma(); ++i) {
      const auto& nd = nodes[i];
      tf.tree.internal.push_back(CompleteNode{nd.at("feature").get<std::uint32_t>(),
                                              nd.at("threshold").get<std::uint32_t>(),
                                              nd.value("dummy", false)});
    }
    for (std::size_t i = tf.tree.gamma(); i < nodes.size(); ++i)
      tf.tree.leaves.push_back(nodes[i].at("label").get<std::string>());
    tf.tree.validate();
    return tf;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tree JSON: ") + e.what());
  }
}

inline void write_tree_file(const std::string& path, const CompleteTree& tree, const Quantizer& q) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << tree_to_json(tree, q).dump(1) << '\n';
}

inline TreeFile read_tree_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return tree_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace onepath
