#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "onepath/cart.hpp"
#include "onepath/rng.hpp"
#include "onepath/tree.hpp"

namespace onepath {

// Random irregular tree with integer thresholds in [0, 2^t). Each internal
// slot below the root becomes a leaf early with probability `leaf_bias`, so
// padding produces a mix of real and dummy nodes.
inline PlainTree random_plain_tree(unsigned max_depth, std::size_t n, unsigned t, Rng& rng,
                                   double leaf_bias = 0.25, std::size_t n_labels = 6) {
  PlainTree tree;
  tree.n_features = n;
  const auto limit = std::uint64_t{1} << t;
  auto label = [&] { return "class-" + std::to_string(rng.uniform(n_labels)); };
  auto grow = [&](auto&& self, unsigned depth) -> int {
    const int me = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(PlainNode{true, 0, 0.0, label(), -1, -1});
    const bool stop = depth == max_depth ||
                      (depth > 0 && static_cast<double>(rng.uniform(1u << 20)) < leaf_bias * (1u << 20));
    if (stop) return me;
    const auto f = static_cast<std::uint32_t>(rng.uniform(n));
    const auto th = static_cast<double>(rng.uniform(limit));
    const int l = self(self, depth + 1);
    const int r = self(self, depth + 1);
    tree.nodes[me] = PlainNode{false, f, th, {}, l, r};
    return me;
  };
  grow(grow, 0);
  return tree;
}

inline CompleteTree random_complete_tree(unsigned depth, std::size_t n, unsigned t, Rng& rng,
                                         double leaf_bias = 0.25) {
  return complete_pad(random_plain_tree(depth, n, t, rng, leaf_bias), depth);
}

inline std::vector<std::uint32_t> random_input(std::size_t n, unsigned t, Rng& rng) {
  std::vector<std::uint32_t> x(n);
  for (auto& v : x) v = static_cast<std::uint32_t>(rng.uniform(std::uint64_t{1} << t));
  return x;
}

// Inputs that hit thresholds exactly on the path are the interesting edge
// case; bias one feature per call onto a threshold value of the tree.
inline std::vector<std::uint32_t> boundary_input(const CompleteTree& tree, unsigned t, Rng& rng) {
  auto x = random_input(tree.n_features, t, rng);
  const auto& nd = tree.internal[rng.uniform(tree.internal.size())];
  x[nd.feature] = nd.threshold + static_cast<std::uint32_t>(rng.uniform(2));
  if (x[nd.feature] >= (1u << t)) x[nd.feature] = nd.threshold;
  return x;
}

// Labelled rows drawn from a hidden random tree plus label noise. Used to
// produce tabular fixtures with a given shape.
inline Dataset synthetic_dataset(std::size_t rows, std::size_t n, std::vector<std::string> classes, Rng& rng,
                                 double noise = 0.05) {
  Dataset ds;
  for (std::size_t f = 0; f < n; ++f) ds.feature_names.push_back("f" + std::to_string(f + 1));
  // Hidden concept: depth-4 tree over real-valued features in [0, 100).
  PlainTree concept_tree = random_plain_tree(4, n, 7, rng, 0.1, classes.size());
  for (auto& nd : concept_tree.nodes) {
    if (nd.leaf) nd.label = classes[std::stoul(nd.label.substr(6)) % classes.size()];
    else nd.threshold = nd.threshold * 100.0 / 128.0;
  }
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> row(n);
    for (auto& v : row) v = std::round(static_cast<double>(rng.uniform(100000)) / 10.0) / 100.0;
    std::string y = concept_tree.infer(row);
    if (static_cast<double>(rng.uniform(1u << 20)) < noise * (1u << 20)) y = classes[rng.uniform(classes.size())];
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(std::move(y));
  }
  return ds;
}

inline void write_csv(std::ostream& out, const Dataset& ds) {
  for (const auto& name : ds.feature_names) out << name << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.rows[i]) out << v << ',';
    out << ds.labels[i] << '\n';
  }
}

}  // namespace onepath
