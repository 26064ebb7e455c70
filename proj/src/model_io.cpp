#include "har/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "har/error.hpp"

namespace har {

using Json = nlohmann::json;

namespace {

[[noreturn]] void violation(const std::string& what) { throw Error(ErrorKind::SchemaViolation, what); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) violation(std::string("expected an object holding \"") + key + "\"");
  const auto it = j.find(key);
  if (it == j.end()) violation(std::string("missing \"") + key + "\"");
  return *it;
}

// null stands for NaN; JSON has no spelling for it.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double get_double(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) violation(std::string("\"") + key + "\" must be a number");
  return v.get<double>();
}

std::int64_t get_int(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_integer()) violation(std::string("\"") + key + "\" must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t get_uint(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_unsigned()) violation(std::string("\"") + key + "\" must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string get_string(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_string()) violation(std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

std::vector<double> get_doubles(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_array()) violation(std::string("\"") + key + "\" must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const Json& e : v) {
    if (e.is_null()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    } else if (e.is_number()) {
      out.push_back(e.get<double>());
    } else {
      violation(std::string("\"") + key + "\" must hold numbers");
    }
  }
  return out;
}

template <std::size_t N>
std::array<double, N> get_fixed(const Json& j, const char* key) {
  const std::vector<double> v = get_doubles(j, key);
  if (v.size() != N) violation(std::string("\"") + key + "\" must have " + std::to_string(N) + " entries");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

Json doubles_json(std::span<const double> v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

Json matrix_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", doubles_json(m.data())}};
}

Matrix get_matrix(const Json& j, const char* key) {
  const Json& m = field(j, key);
  const auto rows = get_uint(m, "rows");
  const auto cols = get_uint(m, "cols");
  std::vector<double> data = get_doubles(m, "data");
  if (data.size() != rows * cols) violation(std::string("\"") + key + "\" data length disagrees with its shape");
  return Matrix(rows, cols, std::move(data));
}

Json descriptor_json(const ModelDescriptor& d) {
  Json hp = Json::object();
  for (const auto& [name, value] : d.hyperparameters) hp[name] = number(value);
  return Json{{"kind", d.kind}, {"hyperparameters", hp}, {"seed", d.seed}};
}

ModelDescriptor get_descriptor(const Json& j) {
  ModelDescriptor d;
  d.kind = get_string(j, "kind");
  const Json& hp = field(j, "hyperparameters");
  if (!hp.is_object()) violation("\"hyperparameters\" must be an object");
  for (const auto& [name, value] : hp.items()) {
    if (value.is_null()) {
      d.hyperparameters[name] = std::numeric_limits<double>::quiet_NaN();
    } else if (value.is_number()) {
      d.hyperparameters[name] = value.get<double>();
    } else {
      violation("hyperparameter " + name + " must be a number");
    }
  }
  d.seed = get_uint(j, "seed");
  return d;
}

Json confusion_json(const ConfusionMatrix& cm) {
  Json rows = Json::array();
  for (const auto& row : cm.counts) rows.push_back(Json(std::vector<std::size_t>(row.begin(), row.end())));
  return rows;
}

ConfusionMatrix get_confusion(const Json& j) {
  const Json& rows = field(j, "confusion");
  if (!rows.is_array() || rows.size() != kNumClasses) violation("\"confusion\" must be 6 rows");
  ConfusionMatrix cm;
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    const Json& row = rows[r];
    if (!row.is_array() || row.size() != kNumClasses) violation("\"confusion\" rows must have 6 counts");
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (!row[c].is_number_unsigned()) violation("confusion counts must be non-negative integers");
      cm.counts[r][c] = row[c].get<std::size_t>();
    }
  }
  return cm;
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    violation(std::string("malformed JSON: ") + e.what());
  }
}

void check_header(const Json& j, std::string_view what) {
  if (!j.is_object()) violation(std::string(what) + " must be a JSON object");
  if (get_int(j, "schema_version") != kSchemaVersion) {
    violation("unsupported schema_version " + field(j, "schema_version").dump());
  }
}

Json linear_json(const LinearModel& m) {
  return Json{{"loss", m.kind == LinearKind::Logistic ? "logistic" : "hinge"},
              {"weights", matrix_json(m.weights)},
              {"bias", doubles_json(m.bias)}};
}

LinearModel get_linear(const Json& j) {
  LinearModel m;
  const std::string loss = get_string(j, "loss");
  if (loss == "logistic") {
    m.kind = LinearKind::Logistic;
  } else if (loss == "hinge") {
    m.kind = LinearKind::Hinge;
  } else {
    violation("unknown linear loss " + loss);
  }
  m.weights = get_matrix(j, "weights");
  m.bias = get_doubles(j, "bias");
  if (m.weights.rows() != kNumClasses || m.bias.size() != kNumClasses) {
    violation("linear model must have 6 weight rows and 6 biases");
  }
  return m;
}

Json svm_json(const MulticlassKernelSvm& m) {
  Json machines = Json::array();
  for (const BinarySvm& b : m.machines) {
    machines.push_back(Json{{"positive_code", b.positive_code},
                            {"negative_code", b.negative_code},
                            {"gamma", b.params.gamma},
                            {"c", b.c},
                            {"bias", b.bias},
                            {"alphas_signed", doubles_json(b.alphas_signed)},
                            {"support_vectors", matrix_json(b.support_vectors)}});
  }
  return Json{{"machines", machines}};
}

MulticlassKernelSvm get_svm(const Json& j) {
  const Json& machines = field(j, "machines");
  if (!machines.is_array() || machines.empty()) violation("\"machines\" must be a non-empty array");
  MulticlassKernelSvm m;
  for (const Json& e : machines) {
    BinarySvm b;
    b.positive_code = static_cast<int>(get_int(e, "positive_code"));
    b.negative_code = static_cast<int>(get_int(e, "negative_code"));
    b.params.gamma = get_double(e, "gamma");
    b.c = get_double(e, "c");
    b.bias = get_double(e, "bias");
    b.alphas_signed = get_doubles(e, "alphas_signed");
    b.support_vectors = get_matrix(e, "support_vectors");
    if (b.support_vectors.rows() != b.alphas_signed.size()) violation("one alpha per support vector required");
    for (int code : {b.positive_code, b.negative_code}) {
      if (code < 1 || code > kNumClasses) violation("machine class code out of range");
    }
    m.machines.push_back(std::move(b));
  }
  return m;
}

Json node_json(const DecisionTree& tree, int index, int depth) {
  if (index < 0 || static_cast<std::size_t>(index) >= tree.nodes.size()) violation("tree child index out of range");
  if (depth > static_cast<int>(tree.nodes.size())) violation("tree contains a cycle");
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
  Json out{{"label", n.label},
           {"class_counts", std::vector<std::size_t>(n.class_counts.begin(), n.class_counts.end())}};
  if (!n.is_leaf()) {
    out["feature"] = n.feature;
    out["threshold"] = n.threshold;
    out["left"] = node_json(tree, n.left, depth + 1);
    out["right"] = node_json(tree, n.right, depth + 1);
  }
  return out;
}

// Rebuilds the flat vector in preorder, the order fit_tree produces.
int read_node(const Json& j, DecisionTree& tree, int depth) {
  if (depth > 10000) violation("tree nesting too deep");
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  {
    TreeNode& n = tree.nodes.back();
    n.label = static_cast<int>(get_int(j, "label"));
    const Json& counts = field(j, "class_counts");
    if (!counts.is_array() || counts.size() != kNumClasses) violation("\"class_counts\" must have 6 entries");
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      if (!counts[k].is_number_unsigned()) violation("class counts must be non-negative integers");
      n.class_counts[k] = counts[k].get<std::size_t>();
    }
    if (n.label < 1 || n.label > kNumClasses) violation("node label out of range");
  }
  if (j.contains("feature")) {
    const int feature = static_cast<int>(get_int(j, "feature"));
    if (feature < 0 || static_cast<std::size_t>(feature) >= tree.feature_count) violation("split feature out of range");
    const double threshold = get_double(j, "threshold");
    const int left = read_node(field(j, "left"), tree, depth + 1);
    const int right = read_node(field(j, "right"), tree, depth + 1);
    TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
    n.feature = feature;
    n.threshold = threshold;
    n.left = left;
    n.right = right;
  }
  return index;
}

Json tree_json(const DecisionTree& t) {
  if (t.nodes.empty()) violation("cannot serialize an empty tree");
  return Json{{"feature_count", t.feature_count}, {"root", node_json(t, 0, 0)}};
}

DecisionTree get_tree(const Json& j) {
  DecisionTree t;
  t.feature_count = get_uint(j, "feature_count");
  read_node(field(j, "root"), t, 0);
  return t;
}

Json recurrent_json(const RecurrentModel& m) {
  return Json{{"cell", std::string(to_string(m.kind()))},
              {"input", m.shape().input},
              {"hidden", m.shape().hidden},
              {"classes", m.shape().classes},
              {"params", doubles_json(m.params())},
              {"input_mean", doubles_json(m.input_mean)},
              {"input_std", doubles_json(m.input_std)}};
}

RecurrentModel get_recurrent(const Json& j) {
  CellKind kind;
  try {
    kind = parse_cell_kind(get_string(j, "cell"));
  } catch (const Error& e) {
    violation(e.what());
  }
  RecurrentShape shape{get_uint(j, "input"), get_uint(j, "hidden"), get_uint(j, "classes")};
  if (shape.input == 0 || shape.hidden == 0 || shape.classes != kNumClasses) violation("bad recurrent shape");
  RecurrentModel m(kind, shape);
  const std::vector<double> params = get_doubles(j, "params");
  if (params.size() != m.params().size()) {
    violation("expected " + std::to_string(m.params().size()) + " parameters, found " + std::to_string(params.size()));
  }
  std::copy(params.begin(), params.end(), m.params().begin());
  m.input_mean = get_doubles(j, "input_mean");
  m.input_std = get_doubles(j, "input_std");
  const bool normalized = !m.input_mean.empty();
  if (normalized && (m.input_mean.size() != shape.input || m.input_std.size() != shape.input)) {
    violation("input statistics must have one entry per channel");
  }
  return m;
}

}  // namespace

bool is_recurrent_model(std::string_view name) {
  return name == "rnn" || name == "lstm" || name == "bilstm" || name == "gru";
}

void check_model_name(std::string_view name) {
  if (std::find(kModelNames.begin(), kModelNames.end(), name) == kModelNames.end()) {
    throw Error(ErrorKind::InvalidArgument,
                "unknown model " + std::string(name) + " (logreg|linearsvm|rbfsvm|tree|rnn|lstm|bilstm|gru)");
  }
}

Report make_report(ModelDescriptor model, std::span<const int> truth, std::span<const int> predicted,
                   std::string dataset_fingerprint, Timing timing) {
  Report r;
  r.model = std::move(model);
  r.confusion = confusion(truth, predicted);
  r.overall_accuracy = r.confusion.accuracy();
  r.per_class_recall = per_class_recall(r.confusion);
  r.per_class_precision = per_class_precision(r.confusion);
  r.timing = timing;
  r.dataset_fingerprint = std::move(dataset_fingerprint);
  return r;
}

std::string serialize_report(const Report& r) {
  Json labels = Json::array();
  for (int k = 1; k <= kNumClasses; ++k) labels.push_back(std::string(activity_name(k)));
  const Json j{{"schema_version", kSchemaVersion},
               {"model", descriptor_json(r.model)},
               {"class_order", labels},
               {"confusion", confusion_json(r.confusion)},
               {"overall_accuracy", number(r.overall_accuracy)},
               {"per_class_recall", doubles_json(r.per_class_recall)},
               {"per_class_precision", doubles_json(r.per_class_precision)},
               {"per_class_accuracy_means", "recall"},
               {"timing", Json{{"train_seconds", number(r.timing.train_seconds)},
                               {"predict_seconds", number(r.timing.predict_seconds)}}},
               {"dataset_fingerprint", r.dataset_fingerprint}};
  return j.dump(2) + "\n";
}

Report parse_report(std::string_view text) {
  const Json j = parse_json(text);
  check_header(j, "report");
  Report r;
  r.model = get_descriptor(field(j, "model"));
  r.confusion = get_confusion(j);
  r.overall_accuracy = get_double(j, "overall_accuracy");
  r.per_class_recall = get_fixed<kNumClasses>(j, "per_class_recall");
  r.per_class_precision = get_fixed<kNumClasses>(j, "per_class_precision");
  const Json& timing = field(j, "timing");
  r.timing.train_seconds = get_double(timing, "train_seconds");
  r.timing.predict_seconds = get_double(timing, "predict_seconds");
  r.dataset_fingerprint = get_string(j, "dataset_fingerprint");
  return r;
}

std::string serialize_model(const SavedModel& s) {
  Json j{{"schema_version", kSchemaVersion},
         {"model_kind", s.descriptor.kind},
         {"model", descriptor_json(s.descriptor)},
         {"dataset_fingerprint", s.dataset_fingerprint}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          j["linear"] = linear_json(m);
        } else if constexpr (std::is_same_v<T, MulticlassKernelSvm>) {
          j["kernel_svm"] = svm_json(m);
        } else if constexpr (std::is_same_v<T, DecisionTree>) {
          j["tree"] = tree_json(m);
        } else {
          j["recurrent"] = recurrent_json(m);
          Json history = Json::array();
          for (const EpochRecord& e : s.history) {
            history.push_back(Json{{"epoch", e.epoch},
                                   {"train_loss", number(e.train_loss)},
                                   {"eval_accuracy", number(e.eval_accuracy)}});
          }
          j["history"] = history;
          j["best_epoch"] = s.best_epoch;
        }
      },
      s.model);
  return j.dump(2) + "\n";
}

SavedModel parse_model(std::string_view text) {
  const Json j = parse_json(text);
  check_header(j, "model file");
  SavedModel s;
  const std::string kind = get_string(j, "model_kind");
  try {
    check_model_name(kind);
  } catch (const Error& e) {
    violation(e.what());
  }
  s.descriptor = get_descriptor(field(j, "model"));
  if (s.descriptor.kind != kind) violation("model_kind disagrees with model.kind");
  s.dataset_fingerprint = get_string(j, "dataset_fingerprint");
  if (kind == "logreg" || kind == "linearsvm") {
    LinearModel m = get_linear(field(j, "linear"));
    if ((kind == "logreg") != (m.kind == LinearKind::Logistic)) violation("loss does not match model_kind");
    s.model = std::move(m);
  } else if (kind == "rbfsvm") {
    s.model = get_svm(field(j, "kernel_svm"));
  } else if (kind == "tree") {
    s.model = get_tree(field(j, "tree"));
  } else {
    RecurrentModel m = get_recurrent(field(j, "recurrent"));
    if (to_string(m.kind()) != kind) violation("cell does not match model_kind");
    s.model = std::move(m);
    const Json& history = field(j, "history");
    if (!history.is_array()) violation("\"history\" must be an array");
    for (const Json& e : history) {
      s.history.push_back(EpochRecord{static_cast<int>(get_int(e, "epoch")), get_double(e, "train_loss"),
                                      get_double(e, "eval_accuracy")});
    }
    s.best_epoch = static_cast<int>(get_int(j, "best_epoch"));
  }
  return s;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\predicted";
  for (int k = 1; k <= kNumClasses; ++k) out << ',' << activity_name(k);
  out << '\n';
  for (int t = 1; t <= kNumClasses; ++t) {
    out << activity_name(t);
    for (std::size_t p = 0; p < kNumClasses; ++p) out << ',' << cm.counts[static_cast<std::size_t>(t - 1)][p];
    out << '\n';
  }
  return out.str();
}

std::vector<int> predict_split(const ModelVariant& model, const HarSplit& split) {
  return std::visit(
      [&](const auto& m) -> std::vector<int> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return predict(m, split.features);
        } else if constexpr (std::is_same_v<T, MulticlassKernelSvm>) {
          return predict_ovo(m, split.features);
        } else if constexpr (std::is_same_v<T, DecisionTree>) {
          return predict_tree(m, split.features);
        } else {
          return predict(m, split.windows);
        }
      },
      model);
}

std::string read_text_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& file, std::string_view text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + file.string());
}

}  // namespace har
