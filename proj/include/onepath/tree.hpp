#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "onepath/common.hpp"

namespace onepath {

// Arbitrary binary decision tree. nodes[0] is the root; internal nodes test
// x[feature] > threshold (right on true). Features are 0-based.
struct PlainNode {
  bool leaf = true;
  std::uint32_t feature = 0;
  double threshold = 0.0;
  std::string label;
  int left = -1;
  int right = -1;
};

struct PlainTree {
  std::vector<PlainNode> nodes;
  std::size_t n_features = 0;

  static PlainTree single_leaf(std::string label, std::size_t n_features) {
    PlainTree t;
    t.n_features = n_features;
    t.nodes.push_back(PlainNode{true, 0, 0.0, std::move(label), -1, -1});
    return t;
  }

  void validate() const {
    if (nodes.empty()) throw FormatError("tree has no nodes");
    std::vector<int> seen(nodes.size(), 0);
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      if (i < 0 || static_cast<std::size_t>(i) >= nodes.size()) throw FormatError("child index out of range");
      if (seen[i]++) throw FormatError("tree has a cycle or shared child");
      const auto& nd = nodes[i];
      if (nd.leaf) continue;
      if (nd.feature >= n_features) throw FormatError("feature index out of range");
      if (nd.left < 0 || nd.right < 0) throw FormatError("internal node needs two children");
      stack.push_back(nd.left);
      stack.push_back(nd.right);
    }
  }

  unsigned depth() const { return depth_from(0); }

  const std::string& infer(std::span<const double> x) const {
    int i = 0;
    while (!nodes[i].leaf) i = x[nodes[i].feature] > nodes[i].threshold ? nodes[i].right : nodes[i].left;
    return nodes[i].label;
  }

 private:
  unsigned depth_from(int i) const {
    const auto& nd = nodes[i];
    if (nd.leaf) return 0;
    return 1 + std::max(depth_from(nd.left), depth_from(nd.right));
  }
};

enum class OutOfDomain { Clamp, Error };

// Per-feature monotone affine map onto [0, 2^t):
// q(v) = clamp(floor((v - offset) * scale), 0, 2^t - 1).
// q(x) > q(theta) implies x > theta, so quantized decisions can only differ
// from real-valued ones when x and theta fall in the same quantization cell.
struct Quantizer {
  unsigned bits = 7;
  std::vector<double> offset;
  std::vector<double> scale;

  std::uint32_t limit() const { return static_cast<std::uint32_t>(1u << bits) - 1; }
  std::size_t features() const { return offset.size(); }

  static Quantizer identity(std::size_t n, unsigned bits) {
    return Quantizer{bits, std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
  }

  // Maps each column's [min, max] onto [0, 2^t - 1].
  static Quantizer fit(const std::vector<std::vector<double>>& rows, std::size_t n, unsigned bits) {
    Quantizer q{bits, std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
    for (std::size_t f = 0; f < n; ++f) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& r : rows) {
        lo = std::min(lo, r[f]);
        hi = std::max(hi, r[f]);
      }
      if (rows.empty()) lo = hi = 0.0;
      q.offset[f] = lo;
      q.scale[f] = hi > lo ? static_cast<double>(q.limit()) / (hi - lo) : 1.0;
    }
    return q;
  }

  // `clamped` counts values that fell outside the domain.
  std::uint32_t quantize_value(std::size_t f, double v, OutOfDomain policy = OutOfDomain::Clamp,
                               std::size_t* clamped = nullptr) const {
    if (f >= features()) throw FormatError("quantizer has no feature " + std::to_string(f));
    const double z = std::floor((v - offset[f]) * scale[f]);
    if (std::isnan(z)) throw FormatError("cannot quantize NaN");
    if (z < 0.0 || z > static_cast<double>(limit())) {
      if (policy == OutOfDomain::Error)
        throw FormatError("feature " + std::to_string(f) + " value " + std::to_string(v) +
                          " outside quantizer domain");
      if (clamped) ++*clamped;
      return z < 0.0 ? 0u : limit();
    }
    return static_cast<std::uint32_t>(z);
  }

  std::vector<std::uint32_t> quantize(std::span<const double> x, OutOfDomain policy = OutOfDomain::Clamp,
                                      std::size_t* clamped = nullptr) const {
    if (x.size() != features()) throw FormatError("feature vector length does not match quantizer");
    std::vector<std::uint32_t> out(x.size());
    for (std::size_t f = 0; f < x.size(); ++f) out[f] = quantize_value(f, x[f], policy, clamped);
    return out;
  }
};

// Thresholds map through the same quantizer. Thresholds below the domain
// clamp to 0; those are the only place where a tie (x == theta after
// quantization) resolves left although x > theta in real terms.
inline PlainTree quantize(const PlainTree& tree, const Quantizer& q) {
  if (q.features() != tree.n_features) throw FormatError("quantizer width does not match tree");
  PlainTree out = tree;
  for (auto& nd : out.nodes) {
    if (!nd.leaf) nd.threshold = q.quantize_value(nd.feature, nd.threshold);
  }
  return out;
}

struct CompleteNode {
  std::uint32_t feature = 0;
  std::uint32_t threshold = 0;
  bool dummy = false;

  friend bool operator==(const CompleteNode&, const CompleteNode&) = default;
};

// Complete binary tree in level order. Internal position p (1-based) lives
// at internal[p - 1] and has children 2p, 2p + 1; positions above gamma are
// leaves, leaf index = p - 2^depth.
struct CompleteTree {
  unsigned depth = 0;
  std::size_t n_features = 0;
  std::vector<CompleteNode> internal;
  std::vector<std::string> leaves;

  std::size_t gamma() const { return (std::size_t{1} << depth) - 1; }
  std::size_t leaf_count() const { return std::size_t{1} << depth; }

  static unsigned layer_of(std::size_t position) {
    unsigned k = 0;
    while (position) {
      position >>= 1;
      ++k;
    }
    return k;
  }

  void validate() const {
    if (depth < 1) throw FormatError("complete tree needs depth >= 1");
    if (internal.size() != gamma() || leaves.size() != leaf_count())
      throw FormatError("complete tree shape violates gamma = 2^d - 1, m = 2^d");
    for (const auto& nd : internal)
      if (nd.feature >= n_features) throw FormatError("feature index out of range");
  }

  friend bool operator==(const CompleteTree&, const CompleteTree&) = default;
};

struct PredictionPath {
  std::vector<bool> directions;       // true = right
  std::vector<std::size_t> positions;  // internal positions visited, root first
  std::size_t leaf = 0;
};

struct Inference {
  std::string label;
  PredictionPath path;
};

// Pads every shallow leaf with dummy internals (feature 0, threshold 0,
// both children carrying the original label). Thresholds must already be
// quantized integers.
inline CompleteTree complete_pad(const PlainTree& tree, unsigned target_depth) {
  tree.validate();
  if (target_depth < 1) throw ParameterError("target depth must be >= 1");
  if (tree.depth() > target_depth)
    throw ParameterError("tree depth " + std::to_string(tree.depth()) + " exceeds target depth " +
                         std::to_string(target_depth));
  CompleteTree out;
  out.depth = target_depth;
  out.n_features = tree.n_features;
  out.internal.resize(out.gamma());
  out.leaves.resize(out.leaf_count());

  // Walk positions in level order carrying the source node (or, below a
  // padded leaf, the leaf being replicated).
  std::vector<int> source(2 * out.leaf_count(), -1);
  source[1] = 0;
  for (std::size_t pos = 1; pos < 2 * out.leaf_count(); ++pos) {
    const auto& nd = tree.nodes[source[pos]];
    if (pos > out.gamma()) {
      if (!nd.leaf) throw ParameterError("internal node at leaf level");
      out.leaves[pos - out.leaf_count()] = nd.label;
      continue;
    }
    if (nd.leaf) {
      out.internal[pos - 1] = CompleteNode{0, 0, true};
      source[2 * pos] = source[2 * pos + 1] = source[pos];
    } else {
      const double th = nd.threshold;
      if (th < 0 || th != std::floor(th) || th > 4294967295.0)
        throw ParameterError("complete_pad needs integer thresholds; quantize first");
      out.internal[pos - 1] = CompleteNode{nd.feature, static_cast<std::uint32_t>(th), false};
      source[2 * pos] = nd.left;
      source[2 * pos + 1] = nd.right;
    }
  }
  return out;
}

// Oracle: exactly `depth` comparisons, right iff x[f] > Theta.
inline Inference plaintext_infer(const CompleteTree& tree, std::span<const std::uint32_t> x) {
  if (x.size() != tree.n_features) throw ParameterError("feature vector length does not match tree");
  Inference res;
  std::size_t pos = 1;
  for (unsigned k = 0; k < tree.depth; ++k) {
    const auto& nd = tree.internal[pos - 1];
    const bool right = x[nd.feature] > nd.threshold;
    res.path.positions.push_back(pos);
    res.path.directions.push_back(right);
    pos = 2 * pos + (right ? 1 : 0);
  }
  res.path.leaf = pos - tree.leaf_count();
  res.label = tree.leaves[res.path.leaf];
  return res;
}

}  // namespace onepath
