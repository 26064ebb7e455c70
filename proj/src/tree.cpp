#include "har/tree.hpp"

#include <algorithm>
#include <numeric>

#include "har/error.hpp"

namespace har {

namespace {

using Counts = std::array<std::size_t, kNumClasses>;

// Gains closer than this are treated as equal so tie-breaks stay deterministic.
constexpr double kGainEpsilon = 1e-12;

double sum_squares_over_n(const Counts& c, std::size_t n) {
  double s = 0.0;
  for (std::size_t v : c) s += static_cast<double>(v) * static_cast<double>(v);
  return s / static_cast<double>(n);
}

int majority(const Counts& c) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < c.size(); ++k) {
    if (c[k] > c[best]) best = k;
  }
  return static_cast<int>(best) + 1;
}

Counts count_rows(std::span<const int> labels, std::span<const std::size_t> rows) {
  Counts c{};
  for (std::size_t r : rows) ++c[static_cast<std::size_t>(labels[r] - 1)];
  return c;
}

std::optional<SplitChoice> search(const Matrix& x, std::span<const int> labels,
                                  std::span<const std::size_t> rows,
                                  std::span<const std::size_t> features) {
  const std::size_t n = rows.size();
  if (n < 2) return std::nullopt;
  const Counts parent = count_rows(labels, rows);
  const double parent_gini = 1.0 - sum_squares_over_n(parent, n) / static_cast<double>(n);

  std::optional<SplitChoice> best;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (std::size_t f : features) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = x(a, f);
      const double vb = x(b, f);
      return va < vb || (va == vb && a < b);
    });
    Counts left{};
    for (std::size_t i = 0; i + 1 < n; ++i) {
      ++left[static_cast<std::size_t>(labels[order[i]] - 1)];
      const double v = x(order[i], f);
      const double next = x(order[i + 1], f);
      if (v == next) continue;
      Counts right;
      for (std::size_t k = 0; k < kNumClasses; ++k) right[k] = parent[k] - left[k];
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      // n * weighted child impurity = n - sum(cl^2)/nl - sum(cr^2)/nr
      const double weighted =
          (static_cast<double>(n) - sum_squares_over_n(left, nl) - sum_squares_over_n(right, nr)) /
          static_cast<double>(n);
      const double gain = parent_gini - weighted;
      if (gain <= kGainEpsilon) continue;
      if (!best || gain > best->gain + kGainEpsilon) {
        double threshold = 0.5 * (v + next);
        if (!(threshold < next)) threshold = v;
        best = SplitChoice{f, threshold, gain};
      }
    }
  }
  return best;
}

struct Builder {
  const Matrix& x;
  std::span<const int> labels;
  const TreeConfig& cfg;
  std::vector<std::size_t> features;
  DecisionTree tree;

  int build(std::vector<std::size_t> rows, int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const Counts counts = count_rows(labels, rows);
    {
      TreeNode& node = tree.nodes.back();
      node.class_counts = counts;
      node.label = majority(counts);
    }
    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    const bool depth_reached = cfg.max_depth >= 0 && depth >= cfg.max_depth;
    if (pure || depth_reached || rows.size() < cfg.min_samples_split) return index;
    const auto split = search(x, labels, rows, features);
    if (!split) return index;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t r : rows) {
      (x(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int left = build(std::move(left_rows), depth + 1);
    const int right = build(std::move(right_rows), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = static_cast<int>(split->feature);
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return index;
  }
};

void check_labels(std::span<const int> labels) {
  for (int code : labels) {
    if (code < 1 || code > kNumClasses) {
      throw Error(ErrorKind::InvalidLabel, "label " + std::to_string(code));
    }
  }
}

}  // namespace

std::size_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::size_t deepest = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const TreeNode& node = nodes[static_cast<std::size_t>(i)];
    if (!node.is_leaf()) {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return deepest;
}

double gini(std::span<const std::size_t> counts) {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  if (n == 0) throw Error(ErrorKind::EmptyNode, "gini of an empty node");
  double s = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s += p * p;
  }
  return 1.0 - s;
}

std::optional<SplitChoice> best_split(const Matrix& x, std::span<const int> labels,
                                      std::span<const std::size_t> candidate_features) {
  if (x.rows() != labels.size()) throw Error(ErrorKind::ShapeMismatch, "X rows differ from labels");
  check_labels(labels);
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<std::size_t> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());
  return search(x, labels, rows, features);
}

DecisionTree fit_tree(const HarSplit& split, const TreeConfig& cfg) {
  return fit_tree(split.features, split.labels, cfg);
}

DecisionTree fit_tree(const Matrix& x, std::span<const int> labels, const TreeConfig& cfg) {
  if (labels.empty()) throw Error(ErrorKind::EmptyInput, "empty training split");
  if (x.rows() != labels.size()) throw Error(ErrorKind::ShapeMismatch, "X rows differ from labels");
  if (cfg.min_samples_split < 2) throw Error(ErrorKind::InvalidArgument, "min_samples_split must be >= 2");
  check_labels(labels);
  Builder builder{x, labels, cfg, {}, {}};
  builder.features.resize(x.cols());
  std::iota(builder.features.begin(), builder.features.end(), 0);
  builder.tree.feature_count = x.cols();
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  builder.build(std::move(rows), 0);
  return std::move(builder.tree);
}

int predict_tree(const DecisionTree& tree, std::span<const double> x) {
  if (x.size() != tree.feature_count) {
    throw Error(ErrorKind::ShapeMismatch, "feature vector has " + std::to_string(x.size()) +
                                              " entries, tree expects " +
                                              std::to_string(tree.feature_count));
  }
  if (tree.nodes.empty()) throw Error(ErrorKind::EmptyNode, "tree has no nodes");
  const TreeNode* node = &tree.nodes.front();
  while (!node->is_leaf()) {
    const int next = x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right;
    node = &tree.nodes[static_cast<std::size_t>(next)];
  }
  return node->label;
}

std::vector<int> predict_tree(const DecisionTree& tree, const Matrix& x) {
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_tree(tree, x.row(r));
  return out;
}

}  // namespace har
