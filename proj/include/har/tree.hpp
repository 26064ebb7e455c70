#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "har/data.hpp"
#include "har/numkit.hpp"

namespace har {

struct TreeConfig {
  /// Negative means unlimited.
  int max_depth = -1;
  std::size_t min_samples_split = 2;
};

/// Internal nodes route x[feature] <= threshold to `left`. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
  std::array<std::size_t, kNumClasses> class_counts{};

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Nodes stored flat; nodes[0] is the root.
struct DecisionTree {
  std::size_t feature_count = 0;
  std::vector<TreeNode> nodes;

  std::size_t depth() const;
  bool operator==(const DecisionTree&) const = default;
};

struct SplitChoice {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

/// 1 - sum_k (c_k / n)^2. Throws EmptyNode when all counts are zero.
double gini(std::span<const std::size_t> counts);

/// Exhaustive search over candidate features and midpoints between consecutive
/// distinct values. Returns nullopt when no split has positive gain. Ties go to
/// the lowest feature index, then the lowest threshold.
std::optional<SplitChoice> best_split(const Matrix& x, std::span<const int> labels,
                                      std::span<const std::size_t> candidate_features);

DecisionTree fit_tree(const HarSplit& split, const TreeConfig& cfg);
DecisionTree fit_tree(const Matrix& x, std::span<const int> labels, const TreeConfig& cfg);

int predict_tree(const DecisionTree& tree, std::span<const double> x);
std::vector<int> predict_tree(const DecisionTree& tree, const Matrix& x);

}  // namespace har
