#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "har/numkit.hpp"

namespace har {

inline constexpr int kNumClasses = 6;
inline constexpr std::size_t kFeatureCount = 561;
inline constexpr std::size_t kChannels = 9;
inline constexpr std::size_t kSteps = 128;
inline constexpr std::size_t kOfficialTrainRows = 7352;
inline constexpr std::size_t kOfficialTestRows = 2947;

/// Activity codes as numbered in activity_labels.txt.
enum class Activity : int {
  Walking = 1,
  WalkingUpstairs = 2,
  WalkingDownstairs = 3,
  Sitting = 4,
  Standing = 5,
  Laying = 6,
};

std::string_view activity_name(int code);
/// Inverse of activity_name. Throws InvalidLabel.
int activity_code(std::string_view name);
bool is_static_activity(int code);

/// Channel file stems in window row order.
const std::array<std::string_view, kChannels>& channel_names();

enum class SplitKind { Train, Test };
std::string_view to_string(SplitKind which);

/// One split of the dataset. windows[i] is channels x steps (9 x 128 for UCI).
struct HarSplit {
  Matrix features;
  std::vector<Matrix> windows;
  std::vector<int> labels;
  std::vector<int> subjects;

  std::size_t size() const noexcept { return labels.size(); }
  /// Throws ShapeMismatch / InvalidLabel when the invariants are broken.
  void validate() const;
  HarSplit subset(std::span<const std::size_t> rows) const;
};

struct HarDataset {
  HarSplit train;
  HarSplit test;
  std::vector<std::string> feature_names;
};

/// Whitespace-separated numeric rows. Throws RowWidthMismatch, NonNumericToken.
Matrix parse_matrix(std::string_view text, std::size_t expected_cols);
Matrix parse_matrix_file(const std::filesystem::path& file, std::size_t expected_cols);
/// Inverse of parse_matrix at full double precision.
std::string format_matrix(const Matrix& m);

std::vector<std::string> load_feature_names(const std::filesystem::path& root);
/// Reads activity_labels.txt and checks it against the six known activities.
void check_activity_labels(const std::filesystem::path& root);

/// Throws MissingFile, RowCountMismatch and the parse errors.
HarSplit load_split(const std::filesystem::path& root, SplitKind which);
HarDataset load_dataset(const std::filesystem::path& root);

/// 0-based position of the first feature with this exact name. Throws UnknownFeature.
std::size_t feature_index(std::span<const std::string> names, std::string_view name);

/// counts[code-1]; all six present. Throws InvalidLabel on codes outside 1..6.
std::array<std::size_t, kNumClasses> class_distribution(std::span<const int> labels);

struct SyntheticOptions {
  std::size_t feature_dim = kFeatureCount;
  std::size_t channels = kChannels;
  std::size_t steps = kSteps;
  /// Per-coordinate noise std; centers are drawn so that any two sit at
  /// least 10 noise-ball radii apart.
  double feature_noise = 0.05;
  double window_noise = 0.05;
};

/// Six Gaussian feature clusters and six sinusoid families of windows.
/// Train and test each hold n_per_class rows per class, row order by class.
HarDataset make_synthetic(std::uint64_t seed, std::size_t n_per_class,
                          const SyntheticOptions& options = {});

/// Writes a dataset in the UCI HAR directory layout.
void write_uci_layout(const HarDataset& data, const std::filesystem::path& root);

/// FNV-1a over raw bytes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
/// Hex digest over both splits' numeric content, labels and subjects.
std::string content_digest(const HarDataset& data);

/// Stratified sample of up to `count` rows, proportional per class, seeded.
std::vector<std::size_t> stratified_sample(std::span<const int> labels, std::size_t count,
                                           std::uint64_t seed);

}  // namespace har
