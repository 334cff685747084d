#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "onepath/common.hpp"
#include "onepath/tree.hpp"

namespace onepath {

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;

  std::size_t n_features() const { return feature_names.size(); }
  std::size_t size() const { return rows.size(); }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  const auto e = s.find_last_not_of(" \t\r\"");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

// Header row required; the last column is the label, all others numeric.
inline Dataset read_csv(std::istream& in) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2) throw FormatError("dataset needs at least one feature and a label column");
  ds.feature_names.assign(header.begin(), header.end() - 1);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " columns");
    std::vector<double> row(ds.n_features());
    for (std::size_t f = 0; f < row.size(); ++f) {
      try {
        std::size_t used = 0;
        row[f] = std::stod(cells[f], &used);
        if (used != cells[f].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw FormatError("line " + std::to_string(lineno) + ": non-numeric value \"" + cells[f] + "\"");
      }
    }
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(cells.back());
  }
  return ds;
}

inline Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset " + path);
  return read_csv(in);
}

inline Dataset quantize_dataset(const Dataset& ds, const Quantizer& q) {
  Dataset out = ds;
  for (auto& r : out.rows) {
    auto z = q.quantize(r);
    for (std::size_t f = 0; f < r.size(); ++f) r[f] = z[f];
  }
  return out;
}

namespace detail {

struct CartBuilder {
  const Dataset& ds;
  unsigned max_depth;
  std::vector<std::string> classes;  // sorted
  std::vector<int> y;
  PlainTree tree;

  double gini(const std::vector<std::size_t>& counts, std::size_t total) const {
    if (total == 0) return 0.0;
    double s = 1.0;
    for (auto c : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(total);
      s -= p * p;
    }
    return s;
  }

  std::vector<std::size_t> count(const std::vector<std::size_t>& idx) const {
    std::vector<std::size_t> c(classes.size(), 0);
    for (auto i : idx) ++c[y[i]];
    return c;
  }

  // Majority label; ties go to the lexicographically smallest class.
  std::string majority(const std::vector<std::size_t>& counts) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.size(); ++k)
      if (counts[k] > counts[best]) best = k;
    return classes[best];
  }

  int build(const std::vector<std::size_t>& idx, unsigned depth) {
    const auto counts = count(idx);
    const int me = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(PlainNode{true, 0, 0.0, majority(counts), -1, -1});
    const double parent = gini(counts, idx.size());
    if (depth >= max_depth || parent == 0.0 || idx.size() < 2) return me;

    // Best split by weighted Gini; strict improvement needed to replace the
    // incumbent, so ties keep the lowest feature, then lowest threshold.
    double best_score = parent;
    std::uint32_t best_f = 0;
    double best_t = 0.0;
    bool found = false;
    std::vector<std::size_t> order(idx);
    for (std::uint32_t f = 0; f < ds.n_features(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return ds.rows[a][f] < ds.rows[b][f]; });
      std::vector<std::size_t> left(classes.size(), 0);
      std::vector<std::size_t> right = counts;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        ++left[y[order[k]]];
        --right[y[order[k]]];
        const double v = ds.rows[order[k]][f];
        const double next = ds.rows[order[k + 1]][f];
        if (v == next) continue;
        const std::size_t nl = k + 1, nr = order.size() - nl;
        const double score = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                             static_cast<double>(order.size());
        if (score < best_score - 1e-12) {
          best_score = score;
          best_f = f;
          best_t = v + (next - v) / 2.0;
          found = true;
        }
      }
    }
    if (!found) return me;

    std::vector<std::size_t> li, ri;
    for (auto i : idx) (ds.rows[i][best_f] > best_t ? ri : li).push_back(i);
    const int l = build(li, depth + 1);
    const int r = build(ri, depth + 1);
    auto& nd = tree.nodes[me];
    nd.leaf = false;
    nd.feature = best_f;
    nd.threshold = best_t;
    nd.label.clear();
    nd.left = l;
    nd.right = r;
    return me;
  }
};

}  // namespace detail

// Greedy Gini CART, depth <= max_depth, deterministic for a fixed row order.
inline PlainTree train_cart(const Dataset& ds, unsigned max_depth) {
  if (ds.size() < 2) throw FormatError("training needs at least 2 rows");
  if (ds.n_features() < 1) throw FormatError("training needs at least 1 feature");
  detail::CartBuilder b{ds, max_depth, {}, {}, {}};
  b.classes = ds.labels;
  std::sort(b.classes.begin(), b.classes.end());
  b.classes.erase(std::unique(b.classes.begin(), b.classes.end()), b.classes.end());
  for (const auto& l : ds.labels)
    b.y.push_back(static_cast<int>(std::lower_bound(b.classes.begin(), b.classes.end(), l) - b.classes.begin()));
  b.tree.n_features = ds.n_features();
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  b.build(all, 0);
  return b.tree;
}

}  // namespace onepath
