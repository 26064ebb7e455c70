#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "har/eval.hpp"
#include "har/model_io.hpp"
#include "har/tsne.hpp"

namespace har {

using Params = std::map<std::string, double>;

/// Hyperparameters used when no grid search is requested.
Params default_params(std::string_view model);
/// Cross-validation grid for the classical models. Throws InvalidArgument for
/// the recurrent ones.
GridSpec default_grid(std::string_view model, std::uint64_t seed);

struct FittedModel {
  ModelVariant model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Trains one model on `train`. Recurrent models hold out a subject-disjoint
/// validation part of `train` to choose the epoch snapshot.
FittedModel fit_model(std::string_view model, const Params& params, const HarSplit& train,
                      std::uint64_t seed);

/// grid_search adapter: merges the cell into `base` and fits on the fold.
Trainer make_trainer(std::string_view model, const Params& base, std::uint64_t seed);

/// Rows of a validation part holding whole subjects (about `fraction` of them),
/// chosen by seed. Falls back to a stratified row sample when there is only
/// one subject. Returned sorted; `fit` receives the complement.
std::vector<std::size_t> subject_holdout(const HarSplit& split, double fraction, std::uint64_t seed,
                                         std::vector<std::size_t>* fit);

struct RecurrentRun {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double train_seconds = 0.0;
};

struct TrainOptions {
  bool grid = false;
  std::size_t folds = 5;
  /// Classical models use the first seed; recurrent models train once per
  /// seed and keep the run with the best test accuracy.
  std::vector<std::uint64_t> seeds{1};
  Params overrides;
};

struct TrainOutcome {
  SavedModel saved;
  Report report;
  std::optional<GridResult> grid;
  std::vector<RecurrentRun> runs;
  std::vector<int> test_predictions;
};

/// Fit (optionally after CV selection on train), then evaluate on test.
TrainOutcome train_and_evaluate(std::string_view model, const HarDataset& data,
                                const TrainOptions& options, const std::string& fingerprint);

/// Re-scores a saved model on the test split.
Report evaluate_saved(const SavedModel& saved, const HarDataset& data, const std::string& fingerprint);

struct FileShape {
  std::string file;  // relative to the dataset root
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct DatasetFingerprint {
  std::vector<FileShape> files;
  std::string digest;
};

DatasetFingerprint fingerprint(const HarDataset& data);

struct VerifyReport {
  std::vector<FileShape> files;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t total_rows() const { return train_rows + test_rows; }
};

/// Loads the directory and checks the row counts. Throws the loader errors,
/// and RowCountMismatch naming X_*.txt when a split has the wrong size.
VerifyReport verify_dataset(const std::filesystem::path& root,
                            std::size_t expected_train = kOfficialTrainRows,
                            std::size_t expected_test = kOfficialTestRows);
std::string format_verify(const VerifyReport& report);

struct ClassSummary {
  int code = 0;
  std::size_t count = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Per-class order statistics (linearly interpolated quartiles).
std::vector<ClassSummary> summarize_by_class(std::span<const double> values, std::span<const int> labels);

struct ThresholdRule {
  double threshold = 0.0;
  /// true: values <= threshold are predicted static.
  bool static_below = true;
  double accuracy = 0.0;
};

/// Best single cut separating static from dynamic activities. Candidates are
/// midpoints of consecutive distinct values plus both ends; ties go to the
/// smallest threshold, then static_below.
ThresholdRule best_static_threshold(std::span<const double> values, std::span<const int> labels);

struct EdaResult {
  std::string class_counts_csv;
  std::string feature_summary_csv;
  ThresholdRule rule;
};

EdaResult run_eda(const HarDataset& data, std::string_view feature = "tBodyAccMag-mean()");

struct TsneRun {
  Embedding embedding;
  std::vector<std::size_t> rows;  // training rows embedded
  ConfusionMatrix nn_confusion;
  std::pair<int, int> most_confused;
};

TsneRun run_tsne(const HarSplit& split, std::size_t sample_size, const TsneConfig& cfg);
/// x,y,label_code,label_name
std::string embedding_csv(const Embedding& e);

std::string scatter_svg(const Matrix& points, std::span<const int> labels, std::string_view title);
std::string confusion_svg(const ConfusionMatrix& cm, std::string_view title);

/// One row per model: per-class recall in percent, columns in header order.
std::string tables_csv(const std::vector<std::pair<std::string, Report>>& rows);
inline constexpr std::string_view kTablesHeader =
    "model,LAYING,SITTING,STANDING,WALKING,WALKING_DOWNSTAIRS,WALKING_UPSTAIRS,overall";

std::string history_csv(const std::vector<EpochRecord>& history);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> flags;
  std::vector<std::uint64_t> seeds;
  DatasetFingerprint dataset;
  std::map<std::string, double> timings;
  std::vector<std::string> outputs;
};

std::string serialize_manifest(const RunManifest& manifest);

}  // namespace har
