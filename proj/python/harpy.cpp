// Python bindings: dataset access, training, evaluation and t-SNE.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "har/data.hpp"
#include "har/error.hpp"
#include "har/eval.hpp"
#include "har/model_io.hpp"
#include "har/pipeline.hpp"
#include "har/recurrent.hpp"
#include "har/tsne.hpp"

namespace py = pybind11;
using namespace har;

namespace {

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

Matrix from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::ShapeMismatch, "expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

// n x channels x steps
py::array_t<double> windows_to_numpy(const std::vector<Matrix>& windows) {
  const std::size_t n = windows.size();
  const std::size_t c = n ? windows[0].rows() : kChannels;
  const std::size_t t = n ? windows[0].cols() : kSteps;
  py::array_t<double> out({n, c, t});
  double* dst = out.mutable_data();
  for (const Matrix& w : windows) dst = std::copy(w.data().begin(), w.data().end(), dst);
  return out;
}

py::dict outcome_dict(const TrainOutcome& o) {
  py::dict d;
  d["report"] = serialize_report(o.report);
  d["model"] = serialize_model(o.saved);
  d["predictions"] = o.test_predictions;
  d["accuracy"] = o.report.overall_accuracy;
  py::list runs;
  for (const RecurrentRun& r : o.runs) {
    py::dict run;
    run["seed"] = r.seed;
    run["test_accuracy"] = r.test_accuracy;
    run["best_epoch"] = r.best_epoch;
    runs.append(run);
  }
  d["runs"] = runs;
  return d;
}

}  // namespace

PYBIND11_MODULE(_harpy, m) {
  m.doc() = "Human activity recognition on UCI HAR";

  // The message starts with the error kind, e.g. "MissingFile: features.txt".
  py::register_exception<Error>(m, "HarError", PyExc_RuntimeError);

  py::class_<HarSplit>(m, "Split")
      .def_property_readonly("features", [](const HarSplit& s) { return to_numpy(s.features); })
      .def_property_readonly("windows", [](const HarSplit& s) { return windows_to_numpy(s.windows); })
      .def_readonly("labels", &HarSplit::labels)
      .def_readonly("subjects", &HarSplit::subjects)
      .def("__len__", &HarSplit::size);

  py::class_<HarDataset>(m, "Dataset")
      .def_readonly("train", &HarDataset::train)
      .def_readonly("test", &HarDataset::test)
      .def_readonly("feature_names", &HarDataset::feature_names)
      .def("digest", [](const HarDataset& d) { return content_digest(d); });

  m.def("load_dataset", &load_dataset, py::arg("root"));
  m.def("make_synthetic", [](std::uint64_t seed, std::size_t n) { return make_synthetic(seed, n); },
        py::arg("seed"), py::arg("n_per_class"));
  m.def("write_uci_layout", &write_uci_layout, py::arg("dataset"), py::arg("root"));
  m.def("verify", [](const std::filesystem::path& root, std::size_t train_rows, std::size_t test_rows) {
          return format_verify(verify_dataset(root, train_rows, test_rows));
        },
        py::arg("root"), py::arg("train_rows") = kOfficialTrainRows, py::arg("test_rows") = kOfficialTestRows);

  m.def("activity_name", [](int code) { return std::string(activity_name(code)); });
  m.def("activity_code", [](const std::string& name) { return activity_code(name); });
  m.def("count_params",
        [](const std::string& kind, std::size_t hidden, std::size_t input, std::size_t classes) {
          return count_params(parse_cell_kind(kind), hidden, input, classes);
        },
        py::arg("kind"), py::arg("hidden") = 32, py::arg("input") = kChannels, py::arg("classes") = kNumClasses);

  m.def("confusion", [](const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    return confusion(y_true, y_pred).counts;
  });

  m.def("default_params", [](const std::string& model) { return default_params(model); });
  m.def("train",
        [](const std::string& model, const HarDataset& data, bool grid, std::vector<std::uint64_t> seeds,
           const Params& params, std::size_t folds) {
          check_model_name(model);
          TrainOptions opt;
          opt.grid = grid;
          opt.seeds = std::move(seeds);
          opt.overrides = params;
          opt.folds = folds;
          TrainOutcome o;
          {
            py::gil_scoped_release release;
            o = train_and_evaluate(model, data, opt, content_digest(data));
          }
          return outcome_dict(o);
        },
        py::arg("model"), py::arg("dataset"), py::arg("grid") = false,
        py::arg("seeds") = std::vector<std::uint64_t>{1}, py::arg("params") = Params{}, py::arg("folds") = 5);
  m.def("evaluate",
        [](const std::string& model_json, const HarDataset& data) {
          return serialize_report(evaluate_saved(parse_model(model_json), data, content_digest(data)));
        },
        py::arg("model_json"), py::arg("dataset"));

  m.def("tsne",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, const std::vector<int>& labels,
           double perplexity, int iterations, std::uint64_t seed) {
          TsneConfig cfg;
          cfg.perplexity = perplexity;
          cfg.iterations = iterations;
          cfg.seed = seed;
          const Matrix input = from_numpy(x);
          const Embedding e = embed(input, labels, cfg);
          return py::make_tuple(to_numpy(e.points), e.final_kl);
        },
        py::arg("x"), py::arg("labels"), py::arg("perplexity") = 30.0, py::arg("iterations") = 1000,
        py::arg("seed") = 1);

  m.attr("__version__") = HAR_VERSION;
}
