#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "har/data.hpp"
#include "har/numkit.hpp"

namespace har {

enum class LinearKind { Logistic, Hinge };

/// One-vs-rest linear classifier: row k of `weights` scores class code k+1.
struct LinearModel {
  LinearKind kind = LinearKind::Logistic;
  Matrix weights;             // 6 x d
  std::vector<double> bias;   // 6
};

struct LogRegConfig {
  double lambda = 1e-2;
  /// 0 selects 1/L, with L the Lipschitz constant of the loss gradient.
  double learning_rate = 0.0;
  int epochs = 500;
  std::uint64_t seed = 0;
};

struct LinearSvmConfig {
  double c = 1.0;
  /// First per-sample step on the 1/c-scaled objective; steps then decay as
  /// 1/(lambda (t + t0)). 0 picks 1 / mean |x|^2.
  double learning_rate = 0.0;
  int epochs = 100;
  /// Visit order of the samples in each epoch.
  std::uint64_t seed = 0;
};

/// Per-class objective value after each epoch.
struct LinearTrace {
  std::array<std::vector<double>, kNumClasses> objective;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

/// sum_i log(1 + exp(-y_i (w.x_i + b))) + lambda w.w  with y in {-1,+1}.
double logistic_loss(std::span<const double> w, double b, const Matrix& x,
                     std::span<const double> y, double lambda);
LossAndGradient logistic_loss_gradient(std::span<const double> w, double b, const Matrix& x,
                                       std::span<const double> y, double lambda);

/// 0.5 |w|^2 + c/n sum_i max(0, 1 - y_i (w.x_i + b)).
double hinge_objective(std::span<const double> w, double b, const Matrix& x,
                       std::span<const double> y, double c);
/// Subgradient; points exactly on the margin contribute zero.
LossAndGradient hinge_subgradient(std::span<const double> w, double b, const Matrix& x,
                                  std::span<const double> y, double c);

/// +1 for rows of class `code`, -1 otherwise.
std::vector<double> one_vs_rest_targets(std::span<const int> labels, int code);

LinearModel train_logreg(const HarSplit& split, const LogRegConfig& cfg,
                         LinearTrace* trace = nullptr);
LinearModel train_linear_svm(const HarSplit& split, const LinearSvmConfig& cfg,
                             LinearTrace* trace = nullptr);

std::array<double, kNumClasses> decision_scores(const LinearModel& model,
                                                std::span<const double> x);
/// Per-class sigmoid of the decision scores (not normalized across classes).
std::array<double, kNumClasses> predict_proba(const LinearModel& model, std::span<const double> x);

/// Label code of the maximal score; ties go to the lowest code.
int argmax_label(std::span<const double> scores);
int predict(const LinearModel& model, std::span<const double> x);
std::vector<int> predict(const LinearModel& model, const Matrix& x);

}  // namespace har
