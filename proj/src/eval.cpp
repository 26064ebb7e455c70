#include "har/eval.hpp"

#include <algorithm>
#include <exception>

#include "har/error.hpp"

namespace har {

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (const auto& row : counts) {
    for (std::size_t v : row) s += v;
  }
  return s;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t s = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) s += counts[k][k];
  return s;
}

std::size_t ConfusionMatrix::row_sum(std::size_t k) const {
  std::size_t s = 0;
  for (std::size_t v : counts[k]) s += v;
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t k) const {
  std::size_t s = 0;
  for (const auto& row : counts) s += row[k];
  return s;
}

double ConfusionMatrix::accuracy() const {
  const std::size_t n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(y_true.size()) + " true labels vs " +
                                               std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 1 || t > kNumClasses || p < 1 || p > kNumClasses) {
      throw Error(ErrorKind::InvalidCode, "pair (" + std::to_string(t) + "," + std::to_string(p) + ")");
    }
    ++cm.counts[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(p - 1)];
  }
  return cm;
}

std::array<double, kNumClasses> per_class_recall(const ConfusionMatrix& cm) {
  std::array<double, kNumClasses> out{};
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const std::size_t support = cm.row_sum(k);
    out[k] = support == 0 ? 0.0 : static_cast<double>(cm.counts[k][k]) / static_cast<double>(support);
  }
  return out;
}

std::array<double, kNumClasses> per_class_precision(const ConfusionMatrix& cm) {
  std::array<double, kNumClasses> out{};
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const std::size_t predicted = cm.col_sum(k);
    out[k] = predicted == 0 ? 0.0 : static_cast<double>(cm.counts[k][k]) / static_cast<double>(predicted);
  }
  return out;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels,
                                                       std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 folds");
  Rng rng(seed);
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int code = labels[i];
    if (code < 1 || code > kNumClasses) throw Error(ErrorKind::InvalidCode, "label " + std::to_string(code));
    by_class[static_cast<std::size_t>(code - 1)].push_back(i);
  }
  std::vector<std::vector<std::size_t>> out(folds);
  // Continue the round-robin across classes so fold sizes stay balanced overall.
  std::size_t next = 0;
  for (auto& rows : by_class) {
    rng.shuffle(rows);
    for (std::size_t r : rows) {
      out[next].push_back(r);
      next = (next + 1) % folds;
    }
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

std::vector<GridCell> enumerate_cells(const GridSpec& grid) {
  std::vector<GridCell> cells{GridCell{}};
  for (const auto& [name, raw_values] : grid.axes) {
    if (raw_values.empty()) throw Error(ErrorKind::InvalidArgument, "grid axis " + name + " is empty");
    std::vector<double> values = raw_values;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<GridCell> next;
    for (const GridCell& partial : cells) {
      for (double v : values) {
        GridCell cell = partial;
        cell[name] = v;
        next.push_back(std::move(cell));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

GridResult grid_search(const Trainer& trainer, const GridSpec& grid, const HarSplit& train) {
  if (grid.folds < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 folds");
  const std::vector<GridCell> cells = enumerate_cells(grid);
  const auto folds = stratified_folds(train.labels, grid.folds, grid.seed);

  // Fold train/validation splits are shared by every cell.
  std::vector<HarSplit> fold_train;
  std::vector<HarSplit> fold_valid;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<bool> held(train.size(), false);
    for (std::size_t r : folds[f]) held[r] = true;
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < train.size(); ++r) {
      if (!held[r]) keep.push_back(r);
    }
    fold_train.push_back(train.subset(keep));
    fold_valid.push_back(train.subset(folds[f]));
  }

  GridResult result;
  const CvRow* best = nullptr;
  for (const GridCell& cell : cells) {
    CvRow row;
    row.cell = cell;
    try {
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const Classifier classify = trainer(cell, fold_train[f]);
        const std::vector<int> predicted = classify(fold_valid[f]);
        row.fold_accuracy.push_back(confusion(fold_valid[f].labels, predicted).accuracy());
      }
      double sum = 0.0;
      for (double a : row.fold_accuracy) sum += a;
      row.mean_accuracy = sum / static_cast<double>(row.fold_accuracy.size());
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      row.mean_accuracy = 0.0;
    }
    result.table.push_back(std::move(row));
  }
  for (const CvRow& row : result.table) {
    if (row.failed) continue;
    if (best == nullptr || row.mean_accuracy > best->mean_accuracy) best = &row;
  }
  if (best == nullptr) throw Error(ErrorKind::InvalidArgument, "every grid cell failed");
  result.best = best->cell;
  return result;
}

}  // namespace har
