#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "har/data.hpp"

namespace har {

/// counts[true-1][pred-1].
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t k) const;
  std::size_t col_sum(std::size_t k) const;
  double accuracy() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws LengthMismatch, InvalidCode.
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);
/// diagonal / row sum, 0/0 -> 0.
std::array<double, kNumClasses> per_class_recall(const ConfusionMatrix& cm);
/// diagonal / column sum, 0/0 -> 0.
std::array<double, kNumClasses> per_class_precision(const ConfusionMatrix& cm);

/// Validation folds: fold[f] lists the rows held out in fold f. Each class is
/// shuffled with the seed and dealt round-robin, so per-class fold sizes
/// differ by at most one.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels,
                                                       std::size_t folds, std::uint64_t seed);

using GridCell = std::map<std::string, double>;

struct GridSpec {
  std::map<std::string, std::vector<double>> axes;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
};

/// Predicts labels for every row of a split.
using Classifier = std::function<std::vector<int>(const HarSplit&)>;
using Trainer = std::function<Classifier(const GridCell&, const HarSplit&)>;

struct CvRow {
  GridCell cell;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
  bool failed = false;
  std::string error;
};

struct GridResult {
  GridCell best;
  std::vector<CvRow> table;  // canonical cell order
};

/// Every cell of the grid, axes in name order, values ascending.
std::vector<GridCell> enumerate_cells(const GridSpec& grid);

/// Stratified k-fold CV over `train` only. The best cell has the highest mean
/// accuracy; ties go to the lexicographically smallest cell. Trainer failures
/// mark the cell failed. Throws InvalidArgument when every cell failed.
GridResult grid_search(const Trainer& trainer, const GridSpec& grid, const HarSplit& train);

}  // namespace har
