#include "har/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numbers>
#include <sstream>

#include "har/error.hpp"

namespace har {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, kNumClasses> kActivityNames = {
    "WALKING", "WALKING_UPSTAIRS", "WALKING_DOWNSTAIRS", "SITTING", "STANDING", "LAYING"};

constexpr std::array<std::string_view, kChannels> kChannelNames = {
    "body_acc_x",  "body_acc_y",  "body_acc_z",  "body_gyro_x", "body_gyro_y",
    "body_gyro_z", "total_acc_x", "total_acc_y", "total_acc_z"};

// Index of "tBodyAccMag-mean()" in the shipped features.txt.
constexpr std::size_t kBodyAccMagMeanIndex = 200;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, file.filename().string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

fs::path split_dir(const fs::path& root, SplitKind which) { return root / to_string(which); }

std::vector<int> to_int_column(const Matrix& m, const fs::path& file) {
  std::vector<int> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double v = m(r, 0);
    if (v != std::floor(v)) {
      throw Error(ErrorKind::NonNumericToken,
                  file.filename().string() + " row " + std::to_string(r + 1) + " is not an integer");
    }
    out[r] = static_cast<int>(v);
  }
  return out;
}

void require_rows(const Matrix& m, std::size_t expected, const fs::path& file) {
  if (m.rows() != expected) {
    throw Error(ErrorKind::RowCountMismatch, file.filename().string() + " has " +
                                                 std::to_string(m.rows()) + " rows, expected " +
                                                 std::to_string(expected));
  }
}

}  // namespace

std::string_view activity_name(int code) {
  if (code < 1 || code > kNumClasses) {
    throw Error(ErrorKind::InvalidLabel, "activity code " + std::to_string(code));
  }
  return kActivityNames[static_cast<std::size_t>(code - 1)];
}

int activity_code(std::string_view name) {
  for (std::size_t i = 0; i < kActivityNames.size(); ++i) {
    if (kActivityNames[i] == name) return static_cast<int>(i) + 1;
  }
  throw Error(ErrorKind::InvalidLabel, "activity name " + std::string(name));
}

bool is_static_activity(int code) { return code >= 4; }

const std::array<std::string_view, kChannels>& channel_names() { return kChannelNames; }

std::string_view to_string(SplitKind which) { return which == SplitKind::Train ? "train" : "test"; }

void HarSplit::validate() const {
  const std::size_t n = labels.size();
  if (features.rows() != n || windows.size() != n || subjects.size() != n) {
    throw Error(ErrorKind::ShapeMismatch,
                "split collections differ in length: features " + std::to_string(features.rows()) +
                    ", windows " + std::to_string(windows.size()) + ", labels " +
                    std::to_string(n) + ", subjects " + std::to_string(subjects.size()));
  }
  for (int code : labels) {
    if (code < 1 || code > kNumClasses) {
      throw Error(ErrorKind::InvalidLabel, "label " + std::to_string(code));
    }
  }
  for (double v : features.data()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::ShapeMismatch, "non-finite feature value");
  }
  if (!windows.empty()) {
    const std::size_t ch = windows.front().rows();
    const std::size_t steps = windows.front().cols();
    for (const Matrix& w : windows) {
      if (w.rows() != ch || w.cols() != steps) {
        throw Error(ErrorKind::ShapeMismatch, "windows differ in shape");
      }
    }
  }
}

HarSplit HarSplit::subset(std::span<const std::size_t> rows) const {
  HarSplit out;
  out.features = Matrix(rows.size(), features.cols());
  out.windows.reserve(rows.size());
  out.labels.reserve(rows.size());
  out.subjects.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    std::copy(features.row(r).begin(), features.row(r).end(), out.features.row(i).begin());
    if (!windows.empty()) out.windows.push_back(windows[r]);
    out.labels.push_back(labels[r]);
    out.subjects.push_back(subjects.empty() ? 0 : subjects[r]);
  }
  return out;
}

Matrix parse_matrix(std::string_view text, std::size_t expected_cols) {
  if (expected_cols == 0) throw Error(ErrorKind::InvalidArgument, "expected_cols must be > 0");
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;

    std::size_t cols = 0;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_space(line[i])) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !is_space(line[j])) ++j;
      std::string_view token = line.substr(i, j - i);
      if (!token.empty() && token.front() == '+') token.remove_prefix(1);
      double v = 0.0;
      const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || end != token.data() + token.size() || !std::isfinite(v)) {
        throw Error(ErrorKind::NonNumericToken,
                    "row " + std::to_string(rows + 1) + ", col " + std::to_string(cols + 1));
      }
      values.push_back(v);
      ++cols;
      i = j;
    }
    if (cols == 0) continue;  // blank line
    ++rows;
    if (cols != expected_cols) {
      throw Error(ErrorKind::RowWidthMismatch, "row " + std::to_string(rows) + ": found " +
                                                   std::to_string(cols) + ", expected " +
                                                   std::to_string(expected_cols));
    }
  }
  if (rows == 0) throw Error(ErrorKind::EmptyInput, "no numeric rows");
  return Matrix(rows, expected_cols, std::move(values));
}

Matrix parse_matrix_file(const fs::path& file, std::size_t expected_cols) {
  try {
    return parse_matrix(read_file(file), expected_cols);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MissingFile) throw;
    throw Error(e.kind(), file.filename().string() + ": " +
                              std::string(e.what()).substr(to_string(e.kind()).size() + 2));
  }
}

std::string format_matrix(const Matrix& m) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const int len = std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      if (c) out.push_back(' ');
      out.append(buf, static_cast<std::size_t>(len));
    }
    out.push_back('\n');
  }
  return out;
}

std::vector<std::string> load_feature_names(const fs::path& root) {
  const std::string text = read_file(root / "features.txt");
  std::vector<std::string> names;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    long index = 0;
    std::string name;
    if (!(ls >> index >> name)) continue;
    if (index != static_cast<long>(names.size()) + 1) {
      throw Error(ErrorKind::RowCountMismatch,
                  "features.txt index " + std::to_string(index) + " out of sequence");
    }
    names.push_back(std::move(name));
  }
  if (names.size() != kFeatureCount) {
    throw Error(ErrorKind::RowCountMismatch, "features.txt has " + std::to_string(names.size()) +
                                                 " rows, expected " + std::to_string(kFeatureCount));
  }
  return names;
}

void check_activity_labels(const fs::path& root) {
  const std::string text = read_file(root / "activity_labels.txt");
  std::istringstream in(text);
  int code = 0;
  std::string name;
  std::size_t seen = 0;
  while (in >> code >> name) {
    if (code < 1 || code > kNumClasses || activity_name(code) != name) {
      throw Error(ErrorKind::InvalidLabel,
                  "activity_labels.txt maps " + std::to_string(code) + " to " + name);
    }
    ++seen;
  }
  if (seen != static_cast<std::size_t>(kNumClasses)) {
    throw Error(ErrorKind::RowCountMismatch, "activity_labels.txt has " + std::to_string(seen) +
                                                 " rows, expected 6");
  }
}

HarSplit load_split(const fs::path& root, SplitKind which) {
  const std::string tag(to_string(which));
  const fs::path dir = split_dir(root, which);
  const fs::path x_file = dir / ("X_" + tag + ".txt");
  const fs::path y_file = dir / ("y_" + tag + ".txt");
  const fs::path s_file = dir / ("subject_" + tag + ".txt");
  std::vector<fs::path> channel_files;
  for (std::string_view ch : kChannelNames) {
    channel_files.push_back(dir / "Inertial Signals" / (std::string(ch) + "_" + tag + ".txt"));
  }
  // Report absent files before spending time on parsing.
  for (const fs::path& f : {x_file, y_file, s_file}) {
    if (!fs::exists(f)) throw Error(ErrorKind::MissingFile, f.filename().string());
  }
  for (const fs::path& f : channel_files) {
    if (!fs::exists(f)) throw Error(ErrorKind::MissingFile, f.filename().string());
  }

  std::vector<std::future<Matrix>> channels;
  for (const fs::path& f : channel_files) {
    channels.push_back(std::async(std::launch::async, [f] { return parse_matrix_file(f, kSteps); }));
  }

  HarSplit split;
  split.features = parse_matrix_file(x_file, kFeatureCount);
  const std::size_t n = split.features.rows();
  const Matrix y = parse_matrix_file(y_file, 1);
  require_rows(y, n, y_file);
  split.labels = to_int_column(y, y_file);
  const Matrix s = parse_matrix_file(s_file, 1);
  require_rows(s, n, s_file);
  split.subjects = to_int_column(s, s_file);
  for (int subject : split.subjects) {
    if (subject < 1 || subject > 30) {
      throw Error(ErrorKind::InvalidLabel, "subject id " + std::to_string(subject));
    }
  }

  std::vector<Matrix> signals;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    signals.push_back(channels[c].get());
    require_rows(signals.back(), n, channel_files[c]);
  }
  split.windows.assign(n, Matrix(kChannels, kSteps));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < kChannels; ++c) {
      const auto src = signals[c].row(i);
      std::copy(src.begin(), src.end(), split.windows[i].row(c).begin());
    }
  }
  split.validate();
  return split;
}

HarDataset load_dataset(const fs::path& root) {
  HarDataset data;
  data.feature_names = load_feature_names(root);
  check_activity_labels(root);
  data.train = load_split(root, SplitKind::Train);
  data.test = load_split(root, SplitKind::Test);
  return data;
}

std::size_t feature_index(std::span<const std::string> names, std::string_view name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorKind::UnknownFeature, std::string(name));
  return static_cast<std::size_t>(it - names.begin());
}

std::array<std::size_t, kNumClasses> class_distribution(std::span<const int> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (int code : labels) {
    if (code < 1 || code > kNumClasses) {
      throw Error(ErrorKind::InvalidLabel, "label " + std::to_string(code));
    }
    ++counts[static_cast<std::size_t>(code - 1)];
  }
  return counts;
}

HarDataset make_synthetic(std::uint64_t seed, std::size_t n_per_class,
                          const SyntheticOptions& options) {
  if (n_per_class == 0) throw Error(ErrorKind::InvalidArgument, "n_per_class must be >= 1");
  Rng rng(seed);
  const std::size_t d = options.feature_dim;

  Matrix centers(kNumClasses, d);
  for (double& v : centers.data()) v = rng.uniform(-0.6, 0.6);
  if (d > kBodyAccMagMeanIndex) {
    // Static activities sit low on the body-acceleration magnitude feature.
    for (int k = 0; k < kNumClasses; ++k) {
      centers(static_cast<std::size_t>(k), kBodyAccMagMeanIndex) =
          is_static_activity(k + 1) ? -0.95 + 0.02 * k : -0.4 + 0.1 * k;
    }
  }

  struct Family {
    double frequency;
    double amplitude;
    std::array<double, kChannels> offset;
  };
  std::vector<Family> families;
  for (int k = 0; k < kNumClasses; ++k) {
    Family f{};
    f.frequency = 1.0 + 1.5 * k;
    f.amplitude = is_static_activity(k + 1) ? 0.1 : 0.6;
    for (std::size_t c = 0; c < kChannels; ++c) {
      f.offset[c] = 0.8 * std::cos(1.3 * k + 0.7 * static_cast<double>(c));
    }
    families.push_back(f);
  }

  auto make_split = [&](HarSplit& split) {
    const std::size_t n = n_per_class * kNumClasses;
    split.features = Matrix(n, d);
    split.windows.reserve(n);
    std::size_t row = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      const Family& fam = families[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
        for (std::size_t c = 0; c < d; ++c) {
          const double v = centers(static_cast<std::size_t>(k), c) + rng.gaussian(0.0, options.feature_noise);
          split.features(row, c) = std::clamp(v, -1.0, 1.0);
        }
        Matrix w(options.channels, options.steps);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t c = 0; c < options.channels; ++c) {
          const double offset = fam.offset[c % kChannels];
          for (std::size_t t = 0; t < options.steps; ++t) {
            const double arg = 2.0 * std::numbers::pi * fam.frequency * static_cast<double>(t) /
                                   static_cast<double>(options.steps) +
                               phase + 0.3 * static_cast<double>(c);
            w(c, t) = offset + fam.amplitude * std::sin(arg) + rng.gaussian(0.0, options.window_noise);
          }
        }
        split.windows.push_back(std::move(w));
        split.labels.push_back(k + 1);
        split.subjects.push_back(static_cast<int>(1 + (i % 30)));
      }
    }
  };

  HarDataset data;
  make_split(data.train);
  make_split(data.test);
  data.feature_names.reserve(d);
  for (std::size_t c = 0; c < d; ++c) data.feature_names.push_back("feature" + std::to_string(c + 1));
  if (d > kBodyAccMagMeanIndex) data.feature_names[kBodyAccMagMeanIndex] = "tBodyAccMag-mean()";
  return data;
}

void write_uci_layout(const HarDataset& data, const fs::path& root) {
  auto write = [](const fs::path& file, const std::string& text) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(ErrorKind::MissingFile, "cannot write " + file.string());
    out << text;
  };
  {
    std::string text;
    for (std::size_t i = 0; i < data.feature_names.size(); ++i) {
      text += std::to_string(i + 1) + " " + data.feature_names[i] + "\n";
    }
    write(root / "features.txt", text);
  }
  {
    std::string text;
    for (int k = 1; k <= kNumClasses; ++k) {
      text += std::to_string(k) + " " + std::string(activity_name(k)) + "\n";
    }
    write(root / "activity_labels.txt", text);
  }
  for (SplitKind which : {SplitKind::Train, SplitKind::Test}) {
    const HarSplit& split = which == SplitKind::Train ? data.train : data.test;
    const std::string tag(to_string(which));
    const fs::path dir = split_dir(root, which);
    write(dir / ("X_" + tag + ".txt"), format_matrix(split.features));
    std::string y;
    std::string s;
    for (std::size_t i = 0; i < split.size(); ++i) {
      y += std::to_string(split.labels[i]) + "\n";
      s += std::to_string(split.subjects[i]) + "\n";
    }
    write(dir / ("y_" + tag + ".txt"), y);
    write(dir / ("subject_" + tag + ".txt"), s);
    if (split.windows.empty()) continue;
    const std::size_t steps = split.windows.front().cols();
    for (std::size_t c = 0; c < kChannels; ++c) {
      Matrix m(split.size(), steps);
      for (std::size_t i = 0; i < split.size(); ++i) {
        const auto src = split.windows[i].row(c);
        std::copy(src.begin(), src.end(), m.row(i).begin());
      }
      write(dir / "Inertial Signals" / (std::string(kChannelNames[c]) + "_" + tag + ".txt"),
            format_matrix(m));
    }
  }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string content_digest(const HarDataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    h = fnv1a(std::string_view(static_cast<const char*>(p), n), h);
  };
  for (const HarSplit* split : {&data.train, &data.test}) {
    const std::uint64_t n = split->size();
    mix(&n, sizeof n);
    mix(split->features.data().data(), split->features.size() * sizeof(double));
    mix(split->labels.data(), split->labels.size() * sizeof(int));
    mix(split->subjects.data(), split->subjects.size() * sizeof(int));
    for (const Matrix& w : split->windows) mix(w.data().data(), w.size() * sizeof(double));
  }
  return hex64(h);
}

std::vector<std::size_t> stratified_sample(std::span<const int> labels, std::size_t count,
                                           std::uint64_t seed) {
  if (count >= labels.size()) {
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  Rng rng(seed);
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i] - 1)].push_back(i);
  }
  // Largest-remainder allocation of `count` across classes.
  std::array<std::size_t, kNumClasses> take{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const double exact = static_cast<double>(count) * static_cast<double>(by_class[k].size()) /
                         static_cast<double>(labels.size());
    take[k] = static_cast<std::size_t>(std::floor(exact));
    remainder[k] = exact - static_cast<double>(take[k]);
    assigned += take[k];
  }
  while (assigned < count) {
    std::size_t best = 0;
    double best_rem = -1.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      if (take[k] < by_class[k].size() && remainder[k] > best_rem) {
        best = k;
        best_rem = remainder[k];
      }
    }
    ++take[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    rng.shuffle(by_class[k]);
    out.insert(out.end(), by_class[k].begin(), by_class[k].begin() + static_cast<long>(take[k]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace har
