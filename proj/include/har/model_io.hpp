#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "har/eval.hpp"
#include "har/kernel_svm.hpp"
#include "har/linear.hpp"
#include "har/recurrent.hpp"
#include "har/tree.hpp"

namespace har {

inline constexpr int kSchemaVersion = 1;

/// Model names accepted on the command line and written as "model_kind".
inline constexpr std::array<std::string_view, 8> kModelNames = {
    "logreg", "linearsvm", "rbfsvm", "tree", "rnn", "lstm", "bilstm", "gru"};

bool is_recurrent_model(std::string_view name);
/// Throws InvalidArgument for names outside kModelNames.
void check_model_name(std::string_view name);

struct ModelDescriptor {
  std::string kind;
  std::map<std::string, double> hyperparameters;
  std::uint64_t seed = 0;
  bool operator==(const ModelDescriptor&) const = default;
};

struct Timing {
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
  bool operator==(const Timing&) const = default;
};

struct Report {
  ModelDescriptor model;
  ConfusionMatrix confusion;
  double overall_accuracy = 0.0;
  std::array<double, kNumClasses> per_class_recall{};
  std::array<double, kNumClasses> per_class_precision{};
  Timing timing;
  std::string dataset_fingerprint;
  bool operator==(const Report&) const = default;
};

/// Fills the metric fields from the confusion matrix of (truth, predicted).
Report make_report(ModelDescriptor model, std::span<const int> truth, std::span<const int> predicted,
                   std::string dataset_fingerprint, Timing timing = {});

using ModelVariant = std::variant<LinearModel, MulticlassKernelSvm, DecisionTree, RecurrentModel>;

struct SavedModel {
  ModelDescriptor descriptor;
  ModelVariant model;
  std::vector<EpochRecord> history;  // recurrent models only
  int best_epoch = 0;
  std::string dataset_fingerprint;
};

/// Canonical JSON: sorted keys, shortest round-trip doubles, NaN as null.
std::string serialize_report(const Report& report);
/// Throws SchemaViolation.
Report parse_report(std::string_view text);

std::string serialize_model(const SavedModel& saved);
/// Throws SchemaViolation.
SavedModel parse_model(std::string_view text);

/// Six-by-six counts with a header row and a true-label column.
std::string confusion_csv(const ConfusionMatrix& cm);

/// Predictions on a split for whichever model the variant holds.
std::vector<int> predict_split(const ModelVariant& model, const HarSplit& split);

std::string read_text_file(const std::filesystem::path& file);
/// Creates parent directories. Throws InvalidArgument on I/O failure.
void write_text_file(const std::filesystem::path& file, std::string_view text);

}  // namespace har
