#include <doctest.h>

#include <cmath>
#include <set>

#include "har/error.hpp"
#include "har/eval.hpp"
#include "har/linear.hpp"

using namespace har;

namespace {

std::vector<int> random_codes(Rng& rng, std::size_t n) {
  std::vector<int> v(n);
  for (int& c : v) c = 1 + static_cast<int>(rng.below(6));
  return v;
}

// Predicts the most frequent training label everywhere.
Trainer majority_trainer() {
  return [](const GridCell&, const HarSplit& train) -> Classifier {
    const auto dist = class_distribution(train.labels);
    const int code = 1 + static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    return [code](const HarSplit& s) { return std::vector<int>(s.size(), code); };
  };
}

Trainer logreg_trainer() {
  return [](const GridCell& cell, const HarSplit& train) -> Classifier {
    LogRegConfig cfg;
    cfg.lambda = cell.at("lambda");
    cfg.epochs = 60;
    const LinearModel m = train_logreg(train, cfg);
    return [m](const HarSplit& s) { return predict(m, s.features); };
  };
}

}  // namespace

TEST_CASE("confusion matrix on a worked example") {
  const std::vector<int> t{1, 1, 2, 3, 3, 3, 6};
  const std::vector<int> p{1, 2, 2, 3, 1, 3, 5};
  const ConfusionMatrix cm = confusion(t, p);
  CHECK(cm.counts[0][0] == 1);
  CHECK(cm.counts[0][1] == 1);
  CHECK(cm.counts[2][0] == 1);
  CHECK(cm.counts[5][4] == 1);
  CHECK(cm.total() == 7);
  CHECK(cm.trace() == 4);
  CHECK(cm.accuracy() == doctest::Approx(4.0 / 7.0));
  const auto recall = per_class_recall(cm);
  CHECK(recall[0] == 0.5);
  CHECK(recall[2] == doctest::Approx(2.0 / 3.0));
  CHECK(recall[3] == 0.0);  // no SITTING rows: 0/0 reads as 0
  const auto precision = per_class_precision(cm);
  CHECK(precision[0] == 0.5);
  CHECK(precision[5] == 0.0);
}

TEST_CASE("confusion small cases") {
  const ConfusionMatrix one = confusion(std::vector<int>{4}, std::vector<int>{5});
  CHECK(one.counts[3][4] == 1);
  CHECK(one.total() == 1);
  std::vector<int> t(10, 2), p(10, 2);
  p[0] = p[1] = 6;
  CHECK(per_class_recall(confusion(t, p))[1] == doctest::Approx(0.8));
  const ConfusionMatrix diag = confusion(std::vector<int>{1, 2, 3, 4, 5, 6}, std::vector<int>{1, 2, 3, 4, 5, 6});
  CHECK(diag.accuracy() == 1.0);
  for (double r : per_class_recall(diag)) CHECK(r == 1.0);
}

TEST_CASE("confusion invariants on random labelings") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    const auto t = random_codes(rng, n);
    const auto p = random_codes(rng, n);
    const ConfusionMatrix cm = confusion(t, p);
    CHECK(cm.total() == n);
    const auto dist = class_distribution(t);
    for (std::size_t k = 0; k < kNumClasses; ++k) CHECK(cm.row_sum(k) == dist[k]);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < n; ++i) agree += t[i] == p[i];
    CHECK(cm.trace() == agree);
    CHECK(confusion(t, t).trace() == n);
  }
}

TEST_CASE("confusion rejects bad input") {
  CHECK_THROWS_AS(confusion(std::vector<int>{1, 2}, std::vector<int>{1}), Error);
  try {
    confusion(std::vector<int>{1}, std::vector<int>{0});
    FAIL("expected InvalidCode");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidCode);
  }
}

TEST_CASE("stratified folds partition the rows and balance each class") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30 + rng.below(200);
    const auto labels = random_codes(rng, n);
    const std::size_t k = 2 + rng.below(6);
    const auto folds = stratified_folds(labels, k, 7);
    REQUIRE(folds.size() == k);
    std::set<std::size_t> seen;
    for (const auto& f : folds) {
      for (std::size_t r : f) CHECK(seen.insert(r).second);
    }
    CHECK(seen.size() == n);
    for (int code = 1; code <= 6; ++code) {
      std::size_t lo = n, hi = 0;
      for (const auto& f : folds) {
        std::size_t c = 0;
        for (std::size_t r : f) c += labels[r] == code;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      CHECK(hi - lo <= 1);
    }
    CHECK(folds == stratified_folds(labels, k, 7));
  }
}

TEST_CASE("grid cells are enumerated in canonical order") {
  GridSpec g;
  g.axes["gamma"] = {1.0, 0.1};
  g.axes["c"] = {10.0, 1.0, 100.0};
  const auto cells = enumerate_cells(g);
  REQUIRE(cells.size() == 6);
  CHECK(cells[0] == GridCell{{"c", 1.0}, {"gamma", 0.1}});
  CHECK(cells[1] == GridCell{{"c", 1.0}, {"gamma", 1.0}});
  CHECK(cells[5] == GridCell{{"c", 100.0}, {"gamma", 1.0}});
}

TEST_CASE("grid search picks the better cell and reports every cell") {
  const HarDataset d = make_synthetic(13, 10);
  GridSpec g;
  g.axes["lambda"] = {1e-3, 1e6};
  g.folds = 3;
  // Large lambda: cells are scored by a majority vote instead, which must lose.
  const Trainer mixed = [](const GridCell& cell, const HarSplit& train) {
    return cell.at("lambda") > 1.0 ? majority_trainer()(cell, train) : logreg_trainer()(cell, train);
  };
  const GridResult r = grid_search(mixed, g, d.train);
  REQUIRE(r.table.size() == 2);
  CHECK(r.best.at("lambda") == 1e-3);
  for (const CvRow& row : r.table) CHECK(row.fold_accuracy.size() == 3);
  CHECK(r.table[0].mean_accuracy > r.table[1].mean_accuracy);

  SUBCASE("a single cell is returned as is") {
    GridSpec one;
    one.axes["lambda"] = {0.5};
    one.folds = 3;
    CHECK(grid_search(logreg_trainer(), one, d.train).best.at("lambda") == 0.5);
  }
  SUBCASE("axis value order does not matter") {
    GridSpec flipped = g;
    flipped.axes["lambda"] = {1e6, 1e-3};
    const GridResult f = grid_search(mixed, flipped, d.train);
    CHECK(f.best == r.best);
    CHECK(f.table[0].mean_accuracy == r.table[0].mean_accuracy);
  }
  SUBCASE("ties go to the smallest cell") {
    GridSpec tie;
    tie.axes["x"] = {3.0, 1.0, 2.0};
    tie.folds = 3;
    CHECK(grid_search(majority_trainer(), tie, d.train).best.at("x") == 1.0);
  }
}

TEST_CASE("failing cells are marked and skipped") {
  const HarDataset d = make_synthetic(14, 6);
  const Trainer flaky = [](const GridCell& cell, const HarSplit& train) -> Classifier {
    if (cell.at("x") > 1.5) throw Error(ErrorKind::DivergenceDetected, "boom");
    return majority_trainer()(cell, train);
  };
  GridSpec g;
  g.axes["x"] = {1.0, 2.0};
  g.folds = 2;
  const GridResult r = grid_search(flaky, g, d.train);
  CHECK(r.best.at("x") == 1.0);
  CHECK_FALSE(r.table[0].failed);
  CHECK(r.table[1].failed);
  CHECK(r.table[1].error.find("boom") != std::string::npos);

  GridSpec only_bad;
  only_bad.axes["x"] = {2.0};
  only_bad.folds = 2;
  CHECK_THROWS_AS(grid_search(flaky, only_bad, d.train), Error);
}

TEST_CASE("grid search never reads outside the training split") {
  // Training rows only are passed in; a poisoned copy of the test split
  // cannot change anything because the search has no handle on it.
  HarDataset d = make_synthetic(15, 10);
  GridSpec g;
  g.axes["lambda"] = {1e-3, 1e-1, 10.0};
  g.folds = 3;
  const GridResult before = grid_search(logreg_trainer(), g, d.train);
  for (double& v : d.test.features.data()) v = std::nan("");
  const GridResult after = grid_search(logreg_trainer(), g, d.train);
  CHECK(after.best == before.best);
  for (std::size_t i = 0; i < before.table.size(); ++i) {
    CHECK(after.table[i].fold_accuracy == before.table[i].fold_accuracy);
  }
}
