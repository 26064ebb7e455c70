#include "har/linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "har/error.hpp"

namespace har {

namespace {

void check_problem(std::span<const double> w, const Matrix& x, std::span<const double> y) {
  if (x.rows() != y.size()) {
    throw Error(ErrorKind::ShapeMismatch, "X has " + std::to_string(x.rows()) + " rows, y has " +
                                              std::to_string(y.size()));
  }
  if (x.cols() != w.size()) {
    throw Error(ErrorKind::ShapeMismatch, "X has " + std::to_string(x.cols()) +
                                              " columns, w has " + std::to_string(w.size()));
  }
}

void check_split(const HarSplit& split) {
  if (split.size() == 0) throw Error(ErrorKind::EmptyInput, "empty training split");
  if (split.features.rows() != split.size()) {
    throw Error(ErrorKind::ShapeMismatch, "features and labels differ in length");
  }
}

// S = X W^T + b, n x 6.
Matrix class_scores(const Matrix& x, const Matrix& w, std::span<const double> b) {
  Matrix s(x.rows(), w.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    for (std::size_t k = 0; k < w.rows(); ++k) s(r, k) = dot(w.row(k), xr) + b[k];
  }
  return s;
}

// G = C^T X where C is n x 6 coefficients; returns 6 x d.
Matrix weighted_row_sums(const Matrix& coeff, const Matrix& x) {
  Matrix g(coeff.cols(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    for (std::size_t k = 0; k < coeff.cols(); ++k) {
      const double a = coeff(r, k);
      if (a == 0.0) continue;
      auto gk = g.row(k);
      for (std::size_t c = 0; c < xr.size(); ++c) gk[c] += a * xr[c];
    }
  }
  return g;
}

Matrix ovr_targets(std::span<const int> labels) {
  Matrix y(labels.size(), kNumClasses, -1.0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int code = labels[r];
    if (code < 1 || code > kNumClasses) {
      throw Error(ErrorKind::InvalidLabel, "label " + std::to_string(code));
    }
    y(r, static_cast<std::size_t>(code - 1)) = 1.0;
  }
  return y;
}

std::vector<double> y_column(const Matrix& y, std::size_t k) {
  std::vector<double> out(y.rows());
  for (std::size_t r = 0; r < y.rows(); ++r) out[r] = y(r, k);
  return out;
}

}  // namespace

double logistic_loss(std::span<const double> w, double b, const Matrix& x,
                     std::span<const double> y, double lambda) {
  check_problem(w, x, y);
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) loss += softplus(-y[r] * (dot(w, x.row(r)) + b));
  return loss + lambda * dot(w, w);
}

LossAndGradient logistic_loss_gradient(std::span<const double> w, double b, const Matrix& x,
                                       std::span<const double> y, double lambda) {
  check_problem(w, x, y);
  LossAndGradient out;
  out.grad_w.assign(w.size(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    const double margin = y[r] * (dot(w, xr) + b);
    out.loss += softplus(-margin);
    // d/dm log(1+e^-m) = -sigmoid(-m)
    const double coeff = -y[r] * sigmoid(-margin);
    for (std::size_t c = 0; c < xr.size(); ++c) out.grad_w[c] += coeff * xr[c];
    out.grad_b += coeff;
  }
  out.loss += lambda * dot(w, w);
  for (std::size_t c = 0; c < w.size(); ++c) out.grad_w[c] += 2.0 * lambda * w[c];
  return out;
}

double hinge_objective(std::span<const double> w, double b, const Matrix& x,
                       std::span<const double> y, double c) {
  check_problem(w, x, y);
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "C must be > 0");
  double slack = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    slack += std::max(0.0, 1.0 - y[r] * (dot(w, x.row(r)) + b));
  }
  return 0.5 * dot(w, w) + c * slack / static_cast<double>(x.rows());
}

LossAndGradient hinge_subgradient(std::span<const double> w, double b, const Matrix& x,
                                  std::span<const double> y, double c) {
  check_problem(w, x, y);
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "C must be > 0");
  LossAndGradient out;
  out.grad_w.assign(w.begin(), w.end());
  const double scale = c / static_cast<double>(x.rows());
  double slack = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    const double gap = 1.0 - y[r] * (dot(w, xr) + b);
    if (gap <= 0.0) continue;
    slack += gap;
    for (std::size_t k = 0; k < xr.size(); ++k) out.grad_w[k] -= scale * y[r] * xr[k];
    out.grad_b -= scale * y[r];
  }
  out.loss = 0.5 * dot(w, w) + scale * slack;
  return out;
}

std::vector<double> one_vs_rest_targets(std::span<const int> labels, int code) {
  std::vector<double> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == code ? 1.0 : -1.0;
  return y;
}

LinearModel train_logreg(const HarSplit& split, const LogRegConfig& cfg, LinearTrace* trace) {
  check_split(split);
  if (!(cfg.lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be >= 0");
  if (cfg.epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
  const Matrix& x = split.features;
  const std::size_t d = x.cols();
  const Matrix y = ovr_targets(split.labels);

  double lr = cfg.learning_rate;
  if (lr <= 0.0) {
    // Hessian of the sum-form loss is bounded by ||[X 1]||^2 / 4 + 2 lambda.
    const double lipschitz = 1.05 * gram_spectral_norm(x, true) / 4.0 + 2.0 * cfg.lambda;
    lr = 1.0 / lipschitz;
  }

  LinearModel model{LinearKind::Logistic, Matrix(kNumClasses, d), std::vector<double>(kNumClasses)};
  Matrix coeff(x.rows(), kNumClasses);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Matrix s = class_scores(x, model.weights, model.bias);
    std::array<double, kNumClasses> loss{};
    std::array<double, kNumClasses> grad_b{};
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t k = 0; k < kNumClasses; ++k) {
        const double margin = y(r, k) * s(r, k);
        loss[k] += softplus(-margin);
        coeff(r, k) = -y(r, k) * sigmoid(-margin);
        grad_b[k] += coeff(r, k);
      }
    }
    const Matrix grad = weighted_row_sums(coeff, x);
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      auto wk = model.weights.row(k);
      loss[k] += cfg.lambda * dot(wk, wk);
      if (!std::isfinite(loss[k])) {
        throw Error(ErrorKind::DivergenceDetected,
                    "logistic loss non-finite at epoch " + std::to_string(epoch));
      }
      if (trace) trace->objective[k].push_back(loss[k]);
      const auto gk = grad.row(k);
      for (std::size_t c = 0; c < d; ++c) wk[c] -= lr * (gk[c] + 2.0 * cfg.lambda * wk[c]);
      model.bias[k] -= lr * grad_b[k];
    }
  }
  return model;
}

LinearModel train_linear_svm(const HarSplit& split, const LinearSvmConfig& cfg, LinearTrace* trace) {
  check_split(split);
  if (!(cfg.c > 0.0)) throw Error(ErrorKind::InvalidArgument, "C must be > 0");
  if (cfg.epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (!(cfg.learning_rate >= 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be >= 0");
  const Matrix& x = split.features;
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const Matrix y = ovr_targets(split.labels);
  const double lambda = 1.0 / cfg.c;

  // Per-sample steps on lambda/2 |w|^2 + hinge_i: eta_t = 1 / (lambda (t + t0)), with t0
  // chosen so the first step equals eta0. The default eta0 = 1 / mean |x|^2 keeps a single
  // update from overshooting the margin.
  double eta0 = cfg.learning_rate;
  if (eta0 == 0.0) {
    double sq = 0.0;
    for (double v : x.data()) sq += v * v;
    eta0 = sq > 0.0 ? static_cast<double>(n) / sq : 1.0;
  }
  const double t0 = std::max(1.0, 1.0 / (lambda * eta0));

  std::vector<std::size_t> order(n);
  for (std::size_t r = 0; r < n; ++r) order[r] = r;
  Rng rng(cfg.seed);

  // w_k = scale_k * v_k so the shrink step costs O(1).
  Matrix v(kNumClasses, d);
  std::array<double, kNumClasses> wscale;
  wscale.fill(1.0);
  std::vector<double> bias(kNumClasses, 0.0);
  // Average of end-of-epoch iterates over the second half of training.
  Matrix avg_w(kNumClasses, d);
  std::vector<double> avg_b(kNumClasses, 0.0);
  std::size_t averaged = 0;
  const int average_from = cfg.epochs / 2;

  LinearModel best{LinearKind::Hinge, Matrix(kNumClasses, d), std::vector<double>(kNumClasses)};
  std::array<double, kNumClasses> best_objective;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    best_objective[k] = hinge_objective(best.weights.row(k), 0.0, x, y_column(y, k), cfg.c);
  }
  LinearModel current = best;
  auto consider = [&](const LinearModel& candidate, std::size_t k, double objective) {
    if (objective < best_objective[k]) {
      best_objective[k] = objective;
      std::copy(candidate.weights.row(k).begin(), candidate.weights.row(k).end(), best.weights.row(k).begin());
      best.bias[k] = candidate.bias[k];
    }
  };

  double t = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    const double t_start = t;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      auto vk = v.row(k);
      double& a = wscale[k];
      t = t_start;
      for (std::size_t r : order) {
        const double eta = 1.0 / (lambda * (t + t0));
        t += 1.0;
        const auto xr = x.row(r);
        const double margin = y(r, k) * (a * dot(vk, xr) + bias[k]);
        a *= 1.0 - eta * lambda;
        if (margin < 1.0) {
          const double g = eta * y(r, k) / a;
          for (std::size_t c = 0; c < d; ++c) vk[c] += g * xr[c];
          bias[k] += eta * y(r, k);
        }
        if (a < 1e-9) {
          for (double& e : vk) e *= a;
          a = 1.0;
        }
      }
    }
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      auto wk = current.weights.row(k);
      const auto vk = v.row(k);
      for (std::size_t c = 0; c < d; ++c) wk[c] = wscale[k] * vk[c];
      current.bias[k] = bias[k];
    }
    if (epoch >= average_from) {
      ++averaged;
      const double mix = 1.0 / static_cast<double>(averaged);
      for (std::size_t i = 0; i < avg_w.size(); ++i) {
        avg_w.data()[i] += mix * (current.weights.data()[i] - avg_w.data()[i]);
      }
      for (std::size_t k = 0; k < kNumClasses; ++k) avg_b[k] += mix * (current.bias[k] - avg_b[k]);
    }
    const LinearModel averaged_model{LinearKind::Hinge, avg_w, avg_b};
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const auto yk = y_column(y, k);
      const double objective = hinge_objective(current.weights.row(k), current.bias[k], x, yk, cfg.c);
      if (!std::isfinite(objective)) {
        throw Error(ErrorKind::DivergenceDetected,
                    "hinge objective non-finite at epoch " + std::to_string(epoch));
      }
      if (trace) trace->objective[k].push_back(objective);
      consider(current, k, objective);
      if (averaged > 0) {
        consider(averaged_model, k, hinge_objective(avg_w.row(k), avg_b[k], x, yk, cfg.c));
      }
    }
  }
  return best;
}

std::array<double, kNumClasses> decision_scores(const LinearModel& model,
                                                std::span<const double> x) {
  if (x.size() != model.weights.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "feature vector has " + std::to_string(x.size()) +
                                              " entries, model expects " +
                                              std::to_string(model.weights.cols()));
  }
  std::array<double, kNumClasses> scores{};
  for (std::size_t k = 0; k < kNumClasses; ++k) scores[k] = dot(model.weights.row(k), x) + model.bias[k];
  return scores;
}

std::array<double, kNumClasses> predict_proba(const LinearModel& model, std::span<const double> x) {
  auto scores = decision_scores(model, x);
  for (double& s : scores) s = sigmoid(s);
  return scores;
}

int argmax_label(std::span<const double> scores) {
  return static_cast<int>(argmax_index(scores)) + 1;
}

int predict(const LinearModel& model, std::span<const double> x) {
  const auto scores = decision_scores(model, x);
  return argmax_label(scores);
}

std::vector<int> predict(const LinearModel& model, const Matrix& x) {
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(model, x.row(r));
  return out;
}

}  // namespace har
