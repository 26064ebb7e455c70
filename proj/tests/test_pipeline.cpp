#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "har/error.hpp"
#include "har/pipeline.hpp"
#include "test_util.hpp"

using namespace har;

namespace {

// Tries every cut against every value: O(n^2).
double brute_threshold_accuracy(std::span<const double> v, std::span<const int> labels) {
  std::vector<double> cuts(v.begin(), v.end());
  cuts.push_back(*std::min_element(v.begin(), v.end()) - 1.0);
  double best = 0.0;
  for (double t : cuts) {
    for (bool below : {true, false}) {
      std::size_t right = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const bool predicted_static = below ? v[i] <= t : v[i] > t;
        right += predicted_static == is_static_activity(labels[i]);
      }
      best = std::max(best, static_cast<double>(right) / static_cast<double>(v.size()));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("static threshold matches the exhaustive sweep") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> v(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = 1 + static_cast<int>(rng.below(6));
      v[i] = trial % 2 ? static_cast<double>(rng.below(5)) : rng.gaussian() + (is_static_activity(labels[i]) ? -1 : 1);
    }
    const ThresholdRule rule = best_static_threshold(v, labels);
    CHECK(rule.accuracy == doctest::Approx(brute_threshold_accuracy(v, labels)));
    std::size_t right = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool predicted_static = rule.static_below ? v[i] <= rule.threshold : v[i] > rule.threshold;
      right += predicted_static == is_static_activity(labels[i]);
    }
    CHECK(static_cast<double>(right) / static_cast<double>(n) == doctest::Approx(rule.accuracy));
  }
  const std::vector<double> v{0.1, 0.2, 0.9, 1.0};
  const std::vector<int> labels{6, 4, 1, 3};
  const ThresholdRule r = best_static_threshold(v, labels);
  CHECK(r.static_below);
  CHECK(r.threshold == doctest::Approx(0.55));
  CHECK(r.accuracy == 1.0);
}

TEST_CASE("per-class summaries use interpolated quartiles") {
  const std::vector<double> v{1, 2, 3, 4, 10, 7};
  const std::vector<int> labels{1, 1, 1, 1, 2, 2};
  const auto s = summarize_by_class(v, labels);
  REQUIRE(s.size() == 6);
  CHECK(s[2].count == 0);
  CHECK(s[0].code == 1);
  CHECK(s[0].count == 4);
  CHECK(s[0].q1 == doctest::Approx(1.75));
  CHECK(s[0].median == doctest::Approx(2.5));
  CHECK(s[0].q3 == doctest::Approx(3.25));
  CHECK(s[0].mean == doctest::Approx(2.5));
  CHECK(s[1].min == 7);
  CHECK(s[1].max == 10);
  CHECK(s[1].median == doctest::Approx(8.5));
}

TEST_CASE("EDA on the synthetic fixture separates static activities") {
  const HarDataset d = make_synthetic(3, 12);
  const EdaResult e = run_eda(d);
  CHECK(e.rule.accuracy == 1.0);
  CHECK(e.rule.static_below);
  CHECK(e.class_counts_csv.rfind("split,code,activity,count\n", 0) == 0);
  CHECK(e.class_counts_csv.find("train,1,WALKING,12\n") != std::string::npos);
  CHECK(e.feature_summary_csv.rfind("code,activity,count,min,q1,median,q3,max,mean\n", 0) == 0);
}

TEST_CASE("tables CSV has the fixed header and alphabetical columns") {
  const std::vector<int> truth{1, 2, 3, 4, 5, 6};
  const std::vector<int> pred{1, 2, 3, 4, 5, 5};
  const Report r = make_report({"tree", {}, 1}, truth, pred, "fp");
  const std::string csv = tables_csv({{"tree", r}});
  CHECK(csv == std::string(kTablesHeader) + "\ntree,0.00,100.00,100.00,100.00,100.00,100.00,83.33\n");
}

TEST_CASE("subject holdout keeps subjects disjoint") {
  const HarDataset d = make_synthetic(5, 20);
  std::vector<std::size_t> fit;
  const auto val = subject_holdout(d.train, 0.2, 9, &fit);
  CHECK(std::is_sorted(val.begin(), val.end()));
  CHECK(val.size() + fit.size() == d.train.size());
  std::set<int> val_subjects, fit_subjects;
  for (std::size_t r : val) val_subjects.insert(d.train.subjects[r]);
  for (std::size_t r : fit) fit_subjects.insert(d.train.subjects[r]);
  for (int s : val_subjects) CHECK(fit_subjects.count(s) == 0);
  CHECK(!val.empty());
  CHECK(!fit.empty());
  CHECK(val == subject_holdout(d.train, 0.2, 9, nullptr));
}

TEST_CASE("train_and_evaluate on the synthetic fixture") {
  const HarDataset d = make_synthetic(6, 10);
  TrainOptions opt;
  opt.grid = true;
  opt.folds = 3;
  const TrainOutcome out = train_and_evaluate("tree", d, opt, "fp");
  REQUIRE(out.grid.has_value());
  CHECK(out.grid->table.size() == default_grid("tree", 0).axes.at("max_depth").size());
  CHECK(out.report.overall_accuracy >= 0.9);
  CHECK(out.report.model.kind == "tree");
  CHECK(out.report.model.hyperparameters == out.saved.descriptor.hyperparameters);
  CHECK(out.test_predictions.size() == d.test.size());
  CHECK(evaluate_saved(out.saved, d, "fp").confusion == out.report.confusion);

  TrainOptions pinned;
  pinned.overrides["max_depth"] = 2;
  const TrainOutcome shallow = train_and_evaluate("tree", d, pinned, "fp");
  CHECK(shallow.saved.descriptor.hyperparameters.at("max_depth") == 2);

  TrainOptions unknown;
  unknown.overrides["depth"] = 2;
  CHECK_THROWS_AS(train_and_evaluate("tree", d, unknown, "fp"), Error);
  CHECK_THROWS_AS(default_grid("gru", 0), Error);
}

TEST_CASE("recurrent training keeps the best seed") {
  const HarDataset d = make_synthetic(7, 8);
  TrainOptions opt;
  opt.seeds = {1, 2};
  opt.overrides = {{"epochs", 3}, {"hidden", 4}};
  const TrainOutcome out = train_and_evaluate("gru", d, opt, "fp");
  REQUIRE(out.runs.size() == 2);
  double best = 0.0;
  for (const RecurrentRun& run : out.runs) best = std::max(best, run.test_accuracy);
  CHECK(out.report.overall_accuracy == doctest::Approx(best));
}

TEST_CASE("verify_dataset checks row counts") {
  test_util::TempDir dir;
  const HarDataset d = make_synthetic(8, 3);
  write_uci_layout(d, dir.path);
  const VerifyReport ok = verify_dataset(dir.path, 18, 18);
  CHECK(ok.total_rows() == 36);
  CHECK(format_verify(ok).find("train rows: 18") != std::string::npos);
  try {
    verify_dataset(dir.path, 19, 18);
    FAIL("expected RowCountMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RowCountMismatch);
    CHECK(std::string(e.what()).find("X_train.txt") != std::string::npos);
  }
}

TEST_CASE("embedding CSV and SVG output") {
  const HarDataset d = make_synthetic(9, 5);
  TsneConfig cfg;
  cfg.perplexity = 5.0;
  cfg.iterations = 60;
  const TsneRun run = run_tsne(d.train, 24, cfg);
  CHECK(run.rows.size() == 24);
  const std::string csv = embedding_csv(run.embedding);
  CHECK(csv.rfind("x,y,label_code,label_name\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 25);
  const std::string svg = scatter_svg(run.embedding.points, run.embedding.labels, "t");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(confusion_svg(run.nn_confusion, "nn").find("</svg>") != std::string::npos);
}
