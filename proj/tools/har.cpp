// har: command-line driver for the activity-recognition toolkit.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "har/error.hpp"
#include "har/pipeline.hpp"

namespace fs = std::filesystem;
using namespace har;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RowWidthMismatch:
    case ErrorKind::NonNumericToken:
    case ErrorKind::MissingFile:
    case ErrorKind::RowCountMismatch:
    case ErrorKind::UnknownFeature:
    case ErrorKind::InvalidLabel:
    case ErrorKind::EmptyInput:
      return 2;
    case ErrorKind::SchemaViolation:
    case ErrorKind::ShapeMismatch:
      return 3;
    case ErrorKind::DivergenceDetected:
    case ErrorKind::NonFiniteGradient:
    case ErrorKind::NotConverged:
    case ErrorKind::NonFiniteConfiguration:
      return 4;
    default:
      return 1;
  }
}

std::string resolve_data(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("HAR_DATA_DIR"); env && *env) return env;
  throw Error(ErrorKind::MissingFile, "no dataset directory: pass --data or set HAR_DATA_DIR");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "no seeds given");
  return seeds;
}

Params parse_params(const std::string& text) {
  Params out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "expected key=value, got '" + item + "'");
    try {
      out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "bad value in '" + item + "'");
    }
  }
  return out;
}

std::string cv_table_csv(const GridResult& grid) {
  std::ostringstream out;
  if (grid.table.empty()) return "";
  for (const auto& [axis, value] : grid.table.front().cell) out << axis << ',';
  out << "mean_accuracy,fold_accuracies,failed,error\n";
  for (const CvRow& row : grid.table) {
    for (const auto& [axis, value] : row.cell) out << nlohmann::json(value).dump() << ',';
    out << nlohmann::json(row.mean_accuracy).dump() << ',';
    for (std::size_t f = 0; f < row.fold_accuracy.size(); ++f) {
      out << (f ? ";" : "") << nlohmann::json(row.fold_accuracy[f]).dump();
    }
    std::string error = row.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << ',' << (row.failed ? 1 : 0) << ',' << error << '\n';
  }
  return out.str();
}

// Writes the primary outputs of one trained model into `dir`; returns their names.
std::vector<std::string> write_training_outputs(const fs::path& dir, const TrainOutcome& outcome) {
  std::vector<std::string> written{"model.json", "report.json", "confusion.csv", "confusion.svg"};
  write_text_file(dir / "model.json", serialize_model(outcome.saved));
  write_text_file(dir / "report.json", serialize_report(outcome.report));
  write_text_file(dir / "confusion.csv", confusion_csv(outcome.report.confusion));
  write_text_file(dir / "confusion.svg", confusion_svg(outcome.report.confusion, outcome.saved.descriptor.kind));
  if (outcome.grid) {
    write_text_file(dir / "cv_table.csv", cv_table_csv(*outcome.grid));
    written.push_back("cv_table.csv");
  }
  for (const RecurrentRun& run : outcome.runs) {
    const std::string name = "history_seed" + std::to_string(run.seed) + ".csv";
    write_text_file(dir / name, history_csv(run.history));
    written.push_back(name);
  }
  if (!outcome.runs.empty()) {
    std::ostringstream runs;
    runs << "seed,test_accuracy,best_epoch\n";
    for (const RecurrentRun& run : outcome.runs) {
      runs << run.seed << ',' << nlohmann::json(run.test_accuracy).dump() << ',' << run.best_epoch << '\n';
    }
    write_text_file(dir / "seed_runs.csv", runs.str());
    written.push_back("seed_runs.csv");
  }
  return written;
}

void write_manifest(const fs::path& dir, RunManifest manifest) {
  manifest.outputs.push_back("manifest.json");
  write_text_file(dir / "manifest.json", serialize_manifest(manifest));
}

void print_report(const std::string& name, const Report& r) {
  std::printf("%s: overall accuracy %.2f%%\n", name.c_str(), 100.0 * r.overall_accuracy);
  std::printf("  %-20s %8s %9s\n", "activity", "recall", "precision");
  for (int k = 1; k <= kNumClasses; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    std::printf("  %-20s %7.2f%% %8.2f%%\n", std::string(activity_name(k)).c_str(), 100.0 * r.per_class_recall[i],
                100.0 * r.per_class_precision[i]);
  }
  std::printf("  (per-class accuracy is reported as recall: diagonal / true-class support)\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human activity recognition on UCI HAR: verify, explore, train, evaluate, reproduce."};
  app.require_subcommand(1);

  std::string data_flag;
  std::string out_dir;

  auto* verify = app.add_subcommand("verify", "Check that every dataset file parses with the expected shape");
  std::size_t expect_train = kOfficialTrainRows;
  std::size_t expect_test = kOfficialTestRows;
  verify->add_option("--data", data_flag, "Dataset root (default: $HAR_DATA_DIR)");
  verify->add_option("--train-rows", expect_train, "Expected training rows")->capture_default_str();
  verify->add_option("--test-rows", expect_test, "Expected test rows")->capture_default_str();

  auto* eda = app.add_subcommand("eda", "Class distribution and the static/dynamic threshold on tBodyAccMag-mean()");
  eda->add_option("--data", data_flag, "Dataset root (default: $HAR_DATA_DIR)");
  eda->add_option("--out", out_dir, "Output directory")->required();

  auto* tsne = app.add_subcommand("tsne", "t-SNE embedding of a stratified training subsample");
  TsneConfig tsne_cfg;
  std::size_t sample_size = 1500;
  tsne->add_option("--data", data_flag, "Dataset root (default: $HAR_DATA_DIR)");
  tsne->add_option("--out", out_dir, "Output directory")->required();
  tsne->add_option("--perplexity", tsne_cfg.perplexity)->capture_default_str();
  tsne->add_option("--iters", tsne_cfg.iterations)->capture_default_str();
  tsne->add_option("--sample-size", sample_size)->capture_default_str();
  tsne->add_option("--seed", tsne_cfg.seed)->capture_default_str();

  auto* train = app.add_subcommand("train", "Train one model and report on the test split");
  std::string model_name;
  bool use_grid = false;
  std::string params_text;
  std::string seeds_text = "1";
  std::size_t folds = 5;
  train->add_option("--data", data_flag, "Dataset root (default: $HAR_DATA_DIR)");
  train->add_option("--model", model_name, "logreg|linearsvm|rbfsvm|tree|rnn|lstm|bilstm|gru")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_flag("--grid", use_grid, "Select hyperparameters by stratified k-fold CV on the training split");
  train->add_option("--params", params_text, "Hyperparameter overrides, key=value[,key=value...]");
  train->add_option("--seed", seeds_text, "Seed, or comma-separated seeds for recurrent models")->capture_default_str();
  train->add_option("--folds", folds, "CV folds for --grid")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on the test split");
  std::string model_file;
  evaluate->add_option("--model", model_file, "Model JSON written by train")->required();
  evaluate->add_option("--data", data_flag, "Dataset root (default: $HAR_DATA_DIR)");
  evaluate->add_option("--out", out_dir, "Output directory")->required();

  auto* reproduce = app.add_subcommand("reproduce", "Train all eight models and write tables1_2.csv");
  std::size_t seed_count = 3;
  std::string models_text = "logreg,linearsvm,rbfsvm,tree,rnn,lstm,bilstm,gru";
  std::string reproduce_params;
  reproduce->add_option("--data", data_flag, "Dataset root (default: $HAR_DATA_DIR)");
  reproduce->add_option("--out", out_dir, "Output directory")->required();
  reproduce->add_option("--seeds", seed_count, "Seeds 1..k for the recurrent models")->capture_default_str();
  reproduce->add_option("--models", models_text, "Comma-separated subset of models")->capture_default_str();
  reproduce->add_flag("--grid", use_grid, "CV-select the classical models' hyperparameters");
  reproduce->add_option("--params", reproduce_params, "Overrides applied to every model that has the key");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto start = Clock::now();
    if (*verify) {
      const VerifyReport report = verify_dataset(resolve_data(data_flag), expect_train, expect_test);
      std::cout << format_verify(report) << "ok\n";
      return 0;
    }

    const fs::path data_root = resolve_data(data_flag);
    const fs::path out = out_dir;
    fs::create_directories(out);
    const HarDataset data = load_dataset(data_root);
    const DatasetFingerprint print = fingerprint(data);
    RunManifest manifest;
    manifest.dataset = print;
    manifest.flags["data"] = data_root.string();
    manifest.flags["out"] = out.string();

    if (*eda) {
      const EdaResult result = run_eda(data);
      write_text_file(out / "class_counts.csv", result.class_counts_csv);
      write_text_file(out / "feature_summary.csv", result.feature_summary_csv);
      const nlohmann::json rule{{"feature", "tBodyAccMag-mean()"},
                                {"threshold", result.rule.threshold},
                                {"static_below", result.rule.static_below},
                                {"train_accuracy", result.rule.accuracy}};
      write_text_file(out / "threshold.json", rule.dump(2) + "\n");
      std::cout << result.class_counts_csv << result.feature_summary_csv;
      std::printf("static if tBodyAccMag-mean() %s %.6g: train accuracy %.4f\n", result.rule.static_below ? "<=" : ">",
                  result.rule.threshold, result.rule.accuracy);
      manifest.command = "eda";
      manifest.outputs = {"class_counts.csv", "feature_summary.csv", "threshold.json"};
      manifest.timings["total_seconds"] = seconds_since(start);
      write_manifest(out, manifest);
      return 0;
    }

    if (*tsne) {
      const TsneRun run = run_tsne(data.train, sample_size, tsne_cfg);
      write_text_file(out / "embedding.csv", embedding_csv(run.embedding));
      write_text_file(out / "embedding.svg", scatter_svg(run.embedding.points, run.embedding.labels,
                                                         "t-SNE of the 561 expert features"));
      write_text_file(out / "nn_confusion.csv", confusion_csv(run.nn_confusion));
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& [iter, kl] : run.embedding.kl_trace) trace.push_back({iter, kl});
      const nlohmann::json summary{
          {"final_kl", run.embedding.final_kl},
          {"most_confused_pair",
           {std::string(activity_name(run.most_confused.first)), std::string(activity_name(run.most_confused.second))}},
          {"kl_trace", trace}};
      write_text_file(out / "tsne_summary.json", summary.dump(2) + "\n");
      std::printf("final KL %.6f\nmost confused pair in 1-NN: %s / %s\n", run.embedding.final_kl,
                  std::string(activity_name(run.most_confused.first)).c_str(),
                  std::string(activity_name(run.most_confused.second)).c_str());
      std::cout << confusion_csv(run.nn_confusion);
      manifest.command = "tsne";
      manifest.flags["perplexity"] = std::to_string(tsne_cfg.perplexity);
      manifest.flags["iters"] = std::to_string(tsne_cfg.iterations);
      manifest.flags["sample-size"] = std::to_string(sample_size);
      manifest.seeds = {tsne_cfg.seed};
      manifest.outputs = {"embedding.csv", "embedding.svg", "nn_confusion.csv", "tsne_summary.json"};
      manifest.timings["total_seconds"] = seconds_since(start);
      write_manifest(out, manifest);
      return 0;
    }

    if (*train) {
      check_model_name(model_name);
      TrainOptions options;
      options.grid = use_grid;
      options.folds = folds;
      options.seeds = parse_seeds(seeds_text);
      options.overrides = parse_params(params_text);
      if (options.seeds.size() > 1 && !is_recurrent_model(model_name)) {
        throw Error(ErrorKind::InvalidArgument, "multiple seeds apply to recurrent models only");
      }
      const TrainOutcome outcome = train_and_evaluate(model_name, data, options, print.digest);
      manifest.command = "train";
      manifest.flags["model"] = model_name;
      manifest.flags["grid"] = use_grid ? "true" : "false";
      manifest.flags["params"] = params_text;
      manifest.flags["folds"] = std::to_string(folds);
      manifest.seeds = options.seeds;
      manifest.outputs = write_training_outputs(out, outcome);
      manifest.timings["train_seconds"] = outcome.report.timing.train_seconds;
      manifest.timings["total_seconds"] = seconds_since(start);
      write_manifest(out, manifest);
      print_report(model_name, outcome.report);
      return 0;
    }

    if (*evaluate) {
      const SavedModel saved = parse_model(read_text_file(model_file));
      if (saved.dataset_fingerprint != print.digest) {
        std::cerr << "warning: dataset fingerprint mismatch: model trained on " << saved.dataset_fingerprint
                  << ", evaluating on " << print.digest << "\n";
      }
      const Report report = evaluate_saved(saved, data, print.digest);
      write_text_file(out / "report.json", serialize_report(report));
      write_text_file(out / "confusion.csv", confusion_csv(report.confusion));
      write_text_file(out / "confusion.svg", confusion_svg(report.confusion, saved.descriptor.kind));
      manifest.command = "evaluate";
      manifest.flags["model"] = model_file;
      manifest.seeds = {saved.descriptor.seed};
      manifest.outputs = {"report.json", "confusion.csv", "confusion.svg"};
      manifest.timings["total_seconds"] = seconds_since(start);
      write_manifest(out, manifest);
      print_report(saved.descriptor.kind, report);
      return 0;
    }

    if (*reproduce) {
      if (seed_count < 1) throw Error(ErrorKind::InvalidArgument, "--seeds must be >= 1");
      std::vector<std::string> models;
      {
        std::stringstream in(models_text);
        std::string m;
        while (std::getline(in, m, ',')) {
          check_model_name(m);
          models.push_back(m);
        }
      }
      const Params shared = parse_params(reproduce_params);
      std::vector<std::uint64_t> seeds;
      for (std::size_t s = 1; s <= seed_count; ++s) seeds.push_back(s);
      std::vector<std::pair<std::string, Report>> rows;
      std::vector<std::string> failures;
      int worst = 0;
      for (const std::string& m : models) {
        const auto model_start = Clock::now();
        std::fprintf(stderr, "[reproduce] %s ...\n", m.c_str());
        try {
          TrainOptions options;
          options.grid = use_grid && !is_recurrent_model(m);
          options.seeds = is_recurrent_model(m) ? seeds : std::vector<std::uint64_t>{1};
          const Params defaults = default_params(m);
          for (const auto& [k, v] : shared) {
            if (defaults.count(k)) options.overrides[k] = v;
          }
          const TrainOutcome outcome = train_and_evaluate(m, data, options, print.digest);
          RunManifest model_manifest = manifest;
          model_manifest.command = "reproduce/" + m;
          model_manifest.flags["grid"] = options.grid ? "true" : "false";
          model_manifest.seeds = options.seeds;
          model_manifest.outputs = write_training_outputs(out / m, outcome);
          model_manifest.timings["total_seconds"] = seconds_since(model_start);
          write_manifest(out / m, model_manifest);
          rows.emplace_back(m, outcome.report);
          std::fprintf(stderr, "[reproduce] %s: %.2f%% in %.1fs\n", m.c_str(), 100.0 * outcome.report.overall_accuracy,
                       seconds_since(model_start));
        } catch (const Error& e) {
          failures.push_back(m + ": " + e.what());
          worst = std::max(worst, exit_code(e.kind()));
          std::fprintf(stderr, "[reproduce] %s failed: %s\n", m.c_str(), e.what());
        }
      }
      write_text_file(out / "tables1_2.csv", tables_csv(rows));
      std::string failure_text;
      for (const std::string& f : failures) failure_text += f + "\n";
      write_text_file(out / "failures.txt", failure_text);
      std::cout << tables_csv(rows);
      manifest.command = "reproduce";
      manifest.flags["models"] = models_text;
      manifest.flags["grid"] = use_grid ? "true" : "false";
      manifest.flags["params"] = reproduce_params;
      manifest.seeds = seeds;
      manifest.outputs = {"tables1_2.csv", "failures.txt"};
      manifest.timings["total_seconds"] = seconds_since(start);
      write_manifest(out, manifest);
      return failures.empty() ? 0 : std::max(worst, 1);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
