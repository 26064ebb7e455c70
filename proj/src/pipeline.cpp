#include "har/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "har/error.hpp"

#ifndef HAR_VERSION
#define HAR_VERSION "0.0.0"
#endif

namespace har {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double param(const Params& p, const char* key) {
  const auto it = p.find(key);
  if (it == p.end()) throw Error(ErrorKind::InvalidArgument, std::string("missing hyperparameter ") + key);
  return it->second;
}

int int_param(const Params& p, const char* key) {
  const double v = param(p, key);
  if (v != std::floor(v)) throw Error(ErrorKind::InvalidArgument, std::string(key) + " must be an integer");
  return static_cast<int>(v);
}

std::vector<double> decades(int lo, int hi) {
  std::vector<double> out;
  for (int e = lo; e <= hi; ++e) out.push_back(std::pow(10.0, e));
  return out;
}

Params merged(const Params& base, const GridCell& cell) {
  Params out = base;
  for (const auto& [k, v] : cell) out[k] = v;
  return out;
}

// Expected per-file shapes for a loaded dataset, in a fixed listing order.
std::vector<FileShape> file_shapes(const HarDataset& data) {
  std::vector<FileShape> files{{"activity_labels.txt", static_cast<std::size_t>(kNumClasses), 2},
                               {"features.txt", data.feature_names.size(), 2}};
  for (SplitKind which : {SplitKind::Train, SplitKind::Test}) {
    const HarSplit& s = which == SplitKind::Train ? data.train : data.test;
    const std::string name(to_string(which));
    files.push_back({name + "/X_" + name + ".txt", s.size(), s.features.cols()});
    files.push_back({name + "/y_" + name + ".txt", s.size(), 1});
    files.push_back({name + "/subject_" + name + ".txt", s.size(), 1});
    const std::size_t steps = s.windows.empty() ? 0 : s.windows.front().cols();
    for (std::string_view ch : channel_names()) {
      files.push_back({name + "/Inertial Signals/" + std::string(ch) + "_" + name + ".txt", s.size(), steps});
    }
  }
  return files;
}

}  // namespace

Params default_params(std::string_view model) {
  check_model_name(model);
  if (model == "logreg") return {{"lambda", 1e-2}, {"epochs", 500}, {"learning_rate", 0.0}};
  // C weighs the summed hinge loss; the objective's mean-form c is C * n.
  if (model == "linearsvm") return {{"C", 1.0}, {"epochs", 100}, {"learning_rate", 0.0}};
  if (model == "rbfsvm") return {{"C", 10.0}, {"gamma", 1e-2}, {"tol", 1e-3}};
  if (model == "tree") return {{"max_depth", 8}, {"min_samples_split", 2}};
  return {{"hidden", 32},       {"epochs", 30},  {"batch_size", 32},
          {"learning_rate", 1e-3}, {"dropout", 0.5}, {"clip_norm", 5.0},
          {"standardize", 1},   {"validation_fraction", 0.2}};
}

GridSpec default_grid(std::string_view model, std::uint64_t seed) {
  check_model_name(model);
  GridSpec g;
  g.seed = seed;
  if (model == "logreg") {
    g.axes["lambda"] = decades(-4, 2);
  } else if (model == "linearsvm") {
    g.axes["C"] = decades(-4, 2);
  } else if (model == "rbfsvm") {
    g.axes["C"] = decades(-1, 3);
    g.axes["gamma"] = decades(-3, 1);
  } else if (model == "tree") {
    g.axes["max_depth"] = {4, 6, 8, 10, 12, -1};
  } else {
    throw Error(ErrorKind::InvalidArgument, "grid search is available for logreg, linearsvm, rbfsvm and tree");
  }
  return g;
}

std::vector<std::size_t> subject_holdout(const HarSplit& split, double fraction, std::uint64_t seed,
                                         std::vector<std::size_t>* fit) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorKind::InvalidArgument, "validation fraction must be in (0,1)");
  std::vector<int> subjects(split.subjects.begin(), split.subjects.end());
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  std::vector<std::size_t> held;
  if (subjects.size() >= 2) {
    Rng rng(seed);
    rng.shuffle(subjects);
    const auto take = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(fraction * static_cast<double>(subjects.size()))), 1,
        subjects.size() - 1);
    const std::set<int> chosen(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t r = 0; r < split.size(); ++r) {
      if (chosen.count(split.subjects[r])) held.push_back(r);
    }
  } else {
    held = stratified_sample(split.labels,
                             static_cast<std::size_t>(std::lround(fraction * static_cast<double>(split.size()))), seed);
  }
  if (fit) {
    fit->clear();
    std::size_t h = 0;
    for (std::size_t r = 0; r < split.size(); ++r) {
      if (h < held.size() && held[h] == r) {
        ++h;
      } else {
        fit->push_back(r);
      }
    }
  }
  return held;
}

FittedModel fit_model(std::string_view model, const Params& p, const HarSplit& train, std::uint64_t seed) {
  check_model_name(model);
  FittedModel out;
  if (model == "logreg") {
    LogRegConfig cfg;
    cfg.lambda = param(p, "lambda");
    cfg.epochs = int_param(p, "epochs");
    cfg.learning_rate = param(p, "learning_rate");
    cfg.seed = seed;
    out.model = train_logreg(train, cfg);
  } else if (model == "linearsvm") {
    LinearSvmConfig cfg;
    cfg.c = param(p, "C") * static_cast<double>(train.size());
    cfg.epochs = int_param(p, "epochs");
    cfg.learning_rate = param(p, "learning_rate");
    cfg.seed = seed;
    out.model = train_linear_svm(train, cfg);
  } else if (model == "rbfsvm") {
    SmoOptions options;
    options.tol = param(p, "tol");
    out.model = train_ovo(train, param(p, "C"), RbfParams{param(p, "gamma")}, options);
  } else if (model == "tree") {
    TreeConfig cfg;
    cfg.max_depth = int_param(p, "max_depth");
    const int min_split = int_param(p, "min_samples_split");
    if (min_split < 2) throw Error(ErrorKind::InvalidArgument, "min_samples_split must be >= 2");
    cfg.min_samples_split = static_cast<std::size_t>(min_split);
    out.model = fit_tree(train, cfg);
  } else {
    TrainConfig cfg;
    cfg.epochs = int_param(p, "epochs");
    const int batch = int_param(p, "batch_size");
    const int hidden = int_param(p, "hidden");
    if (batch < 1 || hidden < 1) throw Error(ErrorKind::InvalidArgument, "batch_size and hidden must be >= 1");
    cfg.batch_size = static_cast<std::size_t>(batch);
    cfg.hidden = static_cast<std::size_t>(hidden);
    cfg.learning_rate = param(p, "learning_rate");
    cfg.dropout_rate = param(p, "dropout");
    cfg.gradient_clip_norm = param(p, "clip_norm");
    cfg.standardize_inputs = param(p, "standardize") != 0.0;
    cfg.seed = seed;
    std::vector<std::size_t> fit_rows;
    const auto held = subject_holdout(train, param(p, "validation_fraction"), seed, &fit_rows);
    const HarSplit fit = train.subset(fit_rows);
    const HarSplit validation = train.subset(held);
    TrainResult result = train_recurrent(fit, &validation, parse_cell_kind(model), cfg);
    out.model = std::move(result.model);
    out.history = std::move(result.history);
    out.best_epoch = result.best_epoch;
  }
  return out;
}

Trainer make_trainer(std::string_view model, const Params& base, std::uint64_t seed) {
  const std::string name(model);
  return [name, base, seed](const GridCell& cell, const HarSplit& fold_train) -> Classifier {
    auto fitted = std::make_shared<FittedModel>(fit_model(name, merged(base, cell), fold_train, seed));
    return [fitted](const HarSplit& split) { return predict_split(fitted->model, split); };
  };
}

TrainOutcome train_and_evaluate(std::string_view model, const HarDataset& data, const TrainOptions& options,
                                const std::string& fingerprint_digest) {
  check_model_name(model);
  if (options.seeds.empty()) throw Error(ErrorKind::InvalidArgument, "at least one seed is required");
  Params params = default_params(model);
  for (const auto& [k, v] : options.overrides) {
    if (!params.count(k)) throw Error(ErrorKind::InvalidArgument, "unknown hyperparameter " + k + " for " + std::string(model));
    params[k] = v;
  }
  TrainOutcome out;
  const auto start = Clock::now();

  if (!is_recurrent_model(model)) {
    const std::uint64_t seed = options.seeds.front();
    if (options.grid) {
      GridSpec grid = default_grid(model, seed);
      grid.folds = options.folds;
      // Explicit overrides pin an axis to one value.
      for (auto& [axis, values] : grid.axes) {
        if (options.overrides.count(axis)) values = {options.overrides.at(axis)};
      }
      out.grid = grid_search(make_trainer(model, params, seed), grid, data.train);
      params = merged(params, out.grid->best);
    }
    FittedModel fitted = fit_model(model, params, data.train, seed);
    const double train_seconds = seconds_since(start);
    const auto predict_start = Clock::now();
    out.test_predictions = predict_split(fitted.model, data.test);
    const Timing timing{train_seconds, seconds_since(predict_start)};
    ModelDescriptor descriptor{std::string(model), params, seed};
    out.report = make_report(descriptor, data.test.labels, out.test_predictions, fingerprint_digest, timing);
    out.saved = SavedModel{descriptor, std::move(fitted.model), {}, 0, fingerprint_digest};
    return out;
  }

  if (options.grid) default_grid(model, 0);  // throws: no grid for recurrent models
  std::optional<FittedModel> best;
  std::uint64_t best_seed = 0;
  double best_accuracy = -1.0;
  for (std::uint64_t seed : options.seeds) {
    const auto seed_start = Clock::now();
    FittedModel fitted = fit_model(model, params, data.train, seed);
    const double seed_seconds = seconds_since(seed_start);
    const std::vector<int> predicted = predict_split(fitted.model, data.test);
    const double accuracy = confusion(data.test.labels, predicted).accuracy();
    out.runs.push_back(RecurrentRun{seed, accuracy, fitted.history, fitted.best_epoch, seed_seconds});
    if (accuracy > best_accuracy) {
      best_accuracy = accuracy;
      best_seed = seed;
      out.test_predictions = predicted;
      best = std::move(fitted);
    }
  }
  const Timing timing{seconds_since(start), 0.0};
  ModelDescriptor descriptor{std::string(model), params, best_seed};
  out.report = make_report(descriptor, data.test.labels, out.test_predictions, fingerprint_digest, timing);
  out.saved = SavedModel{descriptor, std::move(best->model), best->history, best->best_epoch, fingerprint_digest};
  return out;
}

Report evaluate_saved(const SavedModel& saved, const HarDataset& data, const std::string& fingerprint_digest) {
  const auto start = Clock::now();
  const std::vector<int> predicted = predict_split(saved.model, data.test);
  return make_report(saved.descriptor, data.test.labels, predicted, fingerprint_digest,
                     Timing{0.0, seconds_since(start)});
}

DatasetFingerprint fingerprint(const HarDataset& data) { return {file_shapes(data), content_digest(data)}; }

VerifyReport verify_dataset(const std::filesystem::path& root, std::size_t expected_train, std::size_t expected_test) {
  const HarDataset data = load_dataset(root);
  for (SplitKind which : {SplitKind::Train, SplitKind::Test}) {
    const std::size_t found = which == SplitKind::Train ? data.train.size() : data.test.size();
    const std::size_t expected = which == SplitKind::Train ? expected_train : expected_test;
    if (found != expected) {
      const std::string name(to_string(which));
      throw Error(ErrorKind::RowCountMismatch, name + "/X_" + name + ".txt: found " + std::to_string(found) +
                                                   " rows, expected " + std::to_string(expected));
    }
  }
  for (const HarSplit* s : {&data.train, &data.test}) {
    if (s->features.cols() != kFeatureCount) {
      throw Error(ErrorKind::RowWidthMismatch, "expected " + std::to_string(kFeatureCount) + " feature columns");
    }
    for (const Matrix& w : s->windows) {
      if (w.rows() != kChannels || w.cols() != kSteps) {
        throw Error(ErrorKind::RowWidthMismatch, "inertial windows must be 9 x 128");
      }
    }
  }
  return VerifyReport{file_shapes(data), data.train.size(), data.test.size()};
}

std::string format_verify(const VerifyReport& report) {
  std::ostringstream out;
  for (const FileShape& f : report.files) out << f.file << ": " << f.rows << " x " << f.cols << '\n';
  out << "train rows: " << report.train_rows << '\n'
      << "test rows: " << report.test_rows << '\n'
      << "total rows: " << report.total_rows() << '\n'
      << "features: " << kFeatureCount << '\n'
      << "windows: " << kChannels << " x " << kSteps << '\n';
  return out.str();
}

std::vector<ClassSummary> summarize_by_class(std::span<const double> values, std::span<const int> labels) {
  if (values.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "values vs labels");
  std::vector<ClassSummary> out;
  for (int code = 1; code <= kNumClasses; ++code) {
    std::vector<double> v;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (labels[i] == code) v.push_back(values[i]);
    }
    ClassSummary s;
    s.code = code;
    s.count = v.size();
    if (!v.empty()) {
      std::sort(v.begin(), v.end());
      auto quantile = [&](double q) {
        const double h = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
      };
      s.min = v.front();
      s.max = v.back();
      s.q1 = quantile(0.25);
      s.median = quantile(0.5);
      s.q3 = quantile(0.75);
      s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    }
    out.push_back(s);
  }
  return out;
}

ThresholdRule best_static_threshold(std::span<const double> values, std::span<const int> labels) {
  if (values.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "values vs labels");
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "no values to threshold");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::size_t static_total = 0;
  for (int code : labels) static_total += is_static_activity(code);
  const std::size_t n = values.size();
  const std::size_t dynamic_total = n - static_total;

  ThresholdRule best;
  best.accuracy = -1.0;
  std::size_t static_le = 0;
  std::size_t dynamic_le = 0;
  auto consider = [&](double threshold) {
    const double below = static_cast<double>(static_le + (dynamic_total - dynamic_le)) / static_cast<double>(n);
    const double above = static_cast<double>(dynamic_le + (static_total - static_le)) / static_cast<double>(n);
    if (below > best.accuracy) best = {threshold, true, below};
    if (above > best.accuracy) best = {threshold, false, above};
  };
  consider(values[order.front()] - 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    (is_static_activity(labels[order[i]]) ? static_le : dynamic_le) += 1;
    const double v = values[order[i]];
    if (i + 1 < n && values[order[i + 1]] == v) continue;
    consider(i + 1 < n ? 0.5 * (v + values[order[i + 1]]) : v + 1.0);
  }
  return best;
}

EdaResult run_eda(const HarDataset& data, std::string_view feature) {
  EdaResult out;
  std::ostringstream counts;
  counts << "split,code,activity,count\n";
  for (SplitKind which : {SplitKind::Train, SplitKind::Test}) {
    const auto dist = class_distribution(which == SplitKind::Train ? data.train.labels : data.test.labels);
    for (int code = 1; code <= kNumClasses; ++code) {
      counts << to_string(which) << ',' << code << ',' << activity_name(code) << ','
             << dist[static_cast<std::size_t>(code - 1)] << '\n';
    }
  }
  out.class_counts_csv = counts.str();

  const std::size_t column = feature_index(data.feature_names, feature);
  std::vector<double> values(data.train.size());
  for (std::size_t r = 0; r < values.size(); ++r) values[r] = data.train.features(r, column);
  std::ostringstream summary;
  summary << "code,activity,count,min,q1,median,q3,max,mean\n";
  for (const ClassSummary& s : summarize_by_class(values, data.train.labels)) {
    summary << s.code << ',' << activity_name(s.code) << ',' << s.count;
    for (double v : {s.min, s.q1, s.median, s.q3, s.max, s.mean}) summary << ',' << fmt("%.17g", v);
    summary << '\n';
  }
  out.feature_summary_csv = summary.str();
  out.rule = best_static_threshold(values, data.train.labels);
  return out;
}

TsneRun run_tsne(const HarSplit& split, std::size_t sample_size, const TsneConfig& cfg) {
  TsneRun out;
  out.rows = stratified_sample(split.labels, std::min(sample_size, split.size()), cfg.seed);
  Matrix x(out.rows.size(), split.features.cols());
  std::vector<int> labels;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const auto src = split.features.row(out.rows[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
    labels.push_back(split.labels[out.rows[i]]);
  }
  out.embedding = embed(x, labels, cfg);
  out.nn_confusion = nearest_neighbor_confusion(out.embedding.points, labels);
  out.most_confused = most_confused_pair(out.nn_confusion);
  return out;
}

std::string embedding_csv(const Embedding& e) {
  std::ostringstream out;
  out << "x,y,label_code,label_name\n";
  for (std::size_t i = 0; i < e.points.rows(); ++i) {
    const int code = e.labels.empty() ? 0 : e.labels[i];
    out << fmt("%.17g", e.points(i, 0)) << ',' << fmt("%.17g", e.points(i, 1)) << ',' << code << ','
        << (code >= 1 && code <= kNumClasses ? activity_name(code) : "") << '\n';
  }
  return out.str();
}

namespace {

constexpr std::array<const char*, kNumClasses> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                                            "#d62728", "#9467bd", "#8c564b"};

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string scatter_svg(const Matrix& points, std::span<const int> labels, std::string_view title) {
  if (points.cols() != 2 || points.rows() != labels.size()) throw Error(ErrorKind::ShapeMismatch, "scatter needs n x 2 points and n labels");
  constexpr double size = 600.0;
  constexpr double margin = 40.0;
  double lo_x = 0.0, hi_x = 1.0, lo_y = 0.0, hi_y = 1.0;
  if (points.rows() > 0) {
    lo_x = hi_x = points(0, 0);
    lo_y = hi_y = points(0, 1);
    for (std::size_t i = 0; i < points.rows(); ++i) {
      lo_x = std::min(lo_x, points(i, 0));
      hi_x = std::max(hi_x, points(i, 0));
      lo_y = std::min(lo_y, points(i, 1));
      hi_y = std::max(hi_y, points(i, 1));
    }
  }
  const double span_x = hi_x > lo_x ? hi_x - lo_x : 1.0;
  const double span_y = hi_y > lo_y ? hi_y - lo_y : 1.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"820\" height=\"680\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << margin << "\" y=\"24\" font-size=\"16\">" << escape_xml(title) << "</text>\n";
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const int code = labels[i];
    const double px = margin + (points(i, 0) - lo_x) / span_x * size;
    const double py = margin + size - (points(i, 1) - lo_y) / span_y * size;
    const char* colour = code >= 1 && code <= kNumClasses ? kPalette[static_cast<std::size_t>(code - 1)] : "#000000";
    out << "<circle cx=\"" << fmt("%.2f", px) << "\" cy=\"" << fmt("%.2f", py) << "\" r=\"2.5\" fill=\"" << colour
        << "\" fill-opacity=\"0.8\"/>\n";
  }
  for (int code = 1; code <= kNumClasses; ++code) {
    const double y = margin + 20.0 * code;
    out << "<rect x=\"660\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[static_cast<std::size_t>(code - 1)] << "\"/>\n"
        << "<text x=\"678\" y=\"" << y << "\" font-size=\"12\">" << activity_name(code) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string confusion_svg(const ConfusionMatrix& cm, std::string_view title) {
  constexpr double cell = 70.0;
  constexpr double left = 170.0;
  constexpr double top = 150.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + cell * kNumClasses + 20 << "\" height=\""
      << top + cell * kNumClasses + 40 << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"10\" y=\"24\" font-size=\"16\">" << escape_xml(title) << "</text>\n"
      << "<text x=\"10\" y=\"44\" font-size=\"11\">rows: true label, columns: predicted; shade: row fraction</text>\n";
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const std::string name(activity_name(static_cast<int>(k) + 1));
    const double cx = left + cell * static_cast<double>(k) + cell / 2;
    out << "<text x=\"" << cx << "\" y=\"" << top - 8 << "\" font-size=\"10\" transform=\"rotate(-40 " << cx << ' '
        << top - 8 << ")\">" << name << "</text>\n"
        << "<text x=\"" << left - 6 << "\" y=\"" << top + cell * static_cast<double>(k) + cell / 2 + 4
        << "\" font-size=\"10\" text-anchor=\"end\">" << name << "</text>\n";
  }
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    const std::size_t support = cm.row_sum(t);
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      const double fraction =
          support == 0 ? 0.0 : static_cast<double>(cm.counts[t][p]) / static_cast<double>(support);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - fraction)));
      const double x = left + cell * static_cast<double>(p);
      const double y = top + cell * static_cast<double>(t);
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" stroke=\"#999999\" fill=\"rgb(" << shade << ',' << shade << ",255)\"/>\n"
          << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" font-size=\"13\" text-anchor=\"middle\""
          << (fraction > 0.5 ? " fill=\"white\"" : "") << ">" << cm.counts[t][p] << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string tables_csv(const std::vector<std::pair<std::string, Report>>& rows) {
  static constexpr std::array<std::string_view, kNumClasses> columns = {
      "LAYING", "SITTING", "STANDING", "WALKING", "WALKING_DOWNSTAIRS", "WALKING_UPSTAIRS"};
  std::ostringstream out;
  out << kTablesHeader << '\n';
  for (const auto& [name, report] : rows) {
    out << name;
    for (std::string_view column : columns) {
      const auto k = static_cast<std::size_t>(activity_code(column) - 1);
      out << ',' << fmt("%.2f", 100.0 * report.per_class_recall[k]);
    }
    out << ',' << fmt("%.2f", 100.0 * report.overall_accuracy) << '\n';
  }
  return out.str();
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,eval_accuracy\n";
  for (const EpochRecord& e : history) {
    out << e.epoch << ',' << fmt("%.17g", e.train_loss) << ',' << fmt("%.17g", e.eval_accuracy) << '\n';
  }
  return out.str();
}

std::string serialize_manifest(const RunManifest& m) {
  using Json = nlohmann::json;
  Json files = Json::array();
  for (const FileShape& f : m.dataset.files) files.push_back(Json{{"file", f.file}, {"rows", f.rows}, {"cols", f.cols}});
  Json timings = Json::object();
  for (const auto& [k, v] : m.timings) timings[k] = v;
  const Json j{{"schema_version", kSchemaVersion},
               {"command", m.command},
               {"flags", m.flags},
               {"seeds", m.seeds},
               {"dataset", Json{{"files", files}, {"digest", m.dataset.digest}}},
               {"tool_version", HAR_VERSION},
               {"timings", timings},
               {"outputs", m.outputs}};
  return j.dump(2) + "\n";
}

}  // namespace har
