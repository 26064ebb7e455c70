#include "har/kernel_svm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "har/error.hpp"

namespace har {

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
  if (x.size() != z.size()) {
    throw Error(ErrorKind::ShapeMismatch, "kernel arguments differ in length");
  }
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be > 0");
  return std::exp(-gamma * squared_distance(x, z));
}

CachedRbfKernel::CachedRbfKernel(const Matrix& points, double gamma)
    : points_(points), gamma_(gamma), rows_(points.rows()) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be > 0");
}

std::span<const double> CachedRbfKernel::row(std::size_t i) {
  std::vector<double>& r = rows_[i];
  if (r.empty()) {
    r.resize(points_.rows());
    const auto xi = points_.row(i);
    for (std::size_t k = 0; k < points_.rows(); ++k) {
      r[k] = k == i ? 1.0 : std::exp(-gamma_ * squared_distance(xi, points_.row(k)));
    }
    ++computed_;
  }
  return r;
}

namespace {

bool in_up(double alpha, double y, double c) { return (y > 0 && alpha < c) || (y < 0 && alpha > 0); }
bool in_low(double alpha, double y, double c) { return (y > 0 && alpha > 0) || (y < 0 && alpha < c); }

double objective_from_outputs(std::span<const double> alpha, std::span<const double> y,
                              std::span<const double> u) {
  double linear = 0.0;
  double quad = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    linear += alpha[k];
    quad += alpha[k] * y[k] * u[k];
  }
  return linear - 0.5 * quad;
}

}  // namespace

SmoResult smo_solve(const Matrix& kernel, std::span<const double> y, double c,
                    const SmoOptions& options) {
  if (kernel.rows() != kernel.cols()) {
    throw Error(ErrorKind::KernelNotSymmetric, "kernel matrix is not square");
  }
  for (std::size_t i = 0; i < kernel.rows(); ++i) {
    for (std::size_t j = i + 1; j < kernel.cols(); ++j) {
      if (std::abs(kernel(i, j) - kernel(j, i)) > 1e-8) {
        throw Error(ErrorKind::KernelNotSymmetric,
                    "K(" + std::to_string(i) + "," + std::to_string(j) + ") != K(" +
                        std::to_string(j) + "," + std::to_string(i) + ")");
      }
    }
  }
  DenseKernel source(kernel);
  return smo_solve(source, y, c, options);
}

SmoResult smo_solve(KernelSource& kernel, std::span<const double> y, double c,
                    const SmoOptions& options) {
  const std::size_t m = kernel.size();
  if (y.size() != m) throw Error(ErrorKind::ShapeMismatch, "labels do not match kernel size");
  if (m == 0) throw Error(ErrorKind::EmptyInput, "no training points");
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "C must be > 0");
  if (!(options.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be > 0");
  for (double v : y) {
    if (v != 1.0 && v != -1.0) throw Error(ErrorKind::InvalidArgument, "labels must be +-1");
  }
  const std::int64_t max_iterations =
      options.max_iterations > 0 ? options.max_iterations
                                 : std::max<std::int64_t>(1'000'000, 200 * static_cast<std::int64_t>(m));

  SmoResult result;
  std::vector<double>& alpha = result.alpha;
  alpha.assign(m, 0.0);
  // u_k = sum_j alpha_j y_j K_kj; the bias-free error is E_k = u_k - y_k.
  std::vector<double> u(m, 0.0);
  const double snap = 1e-12 * c;

  auto select = [&](std::size_t& i, std::size_t& j, double& up, double& low) {
    up = -std::numeric_limits<double>::infinity();
    low = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      const double score = y[k] - u[k];  // -E_k
      if (in_up(alpha[k], y[k], c) && score > up) {
        up = score;
        i = k;
      }
      if (in_low(alpha[k], y[k], c) && score < low) {
        low = score;
        j = k;
      }
    }
  };

  while (true) {
    std::size_t i = 0;
    std::size_t j = 0;
    double up = 0.0;
    double low = 0.0;
    select(i, j, up, low);
    if (up - low < options.tol) break;
    if (result.iterations >= max_iterations) {
      throw Error(ErrorKind::NotConverged, "SMO exceeded " + std::to_string(max_iterations) +
                                               " iterations (gap " + std::to_string(up - low) + ")");
    }

    const auto ki = kernel.row(i);
    const auto kj = kernel.row(j);
    const double ai = alpha[i];
    const double aj = alpha[j];
    const double s = y[i] * y[j];
    double lo;
    double hi;
    if (s < 0) {
      lo = std::max(0.0, aj - ai);
      hi = std::min(c, c + aj - ai);
    } else {
      lo = std::max(0.0, ai + aj - c);
      hi = std::min(c, ai + aj);
    }
    const double eta = std::max(kernel.diagonal(i) + kernel.diagonal(j) - 2.0 * ki[j], 1e-12);
    const double ei = u[i] - y[i];
    const double ej = u[j] - y[j];
    double aj_new = std::clamp(aj + y[j] * (ei - ej) / eta, lo, hi);
    double ai_new = ai + s * (aj - aj_new);
    if (ai_new < snap) ai_new = 0.0;
    if (ai_new > c - snap) ai_new = c;
    if (aj_new < snap) aj_new = 0.0;
    if (aj_new > c - snap) aj_new = c;

    const double di = (ai_new - ai) * y[i];
    const double dj = (aj_new - aj) * y[j];
    alpha[i] = ai_new;
    alpha[j] = aj_new;
    for (std::size_t k = 0; k < m; ++k) u[k] += di * ki[k] + dj * kj[k];
    ++result.iterations;
    if (options.record_objective) result.objective_trace.push_back(objective_from_outputs(alpha, y, u));
  }

  // Recompute outputs exactly to shed accumulated rounding before fixing the bias.
  std::fill(u.begin(), u.end(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    if (alpha[j] == 0.0) continue;
    const auto kj = kernel.row(j);
    for (std::size_t k = 0; k < m; ++k) u[k] += alpha[j] * y[j] * kj[k];
  }
  double free_sum = 0.0;
  std::size_t free_count = 0;
  double up = -std::numeric_limits<double>::infinity();
  double low = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) {
    const double score = y[k] - u[k];
    if (alpha[k] > 0.0 && alpha[k] < c) {
      free_sum += score;
      ++free_count;
    }
    if (in_up(alpha[k], y[k], c)) up = std::max(up, score);
    if (in_low(alpha[k], y[k], c)) low = std::min(low, score);
  }
  if (free_count > 0) {
    result.bias = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(up) && std::isfinite(low)) {
    result.bias = 0.5 * (up + low);
  } else {
    result.bias = std::isfinite(up) ? up : low;
  }
  return result;
}

double dual_objective(const Matrix& kernel, std::span<const double> alpha,
                      std::span<const double> y) {
  double linear = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    linear += alpha[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < alpha.size(); ++j) quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel(i, j);
  }
  return linear - 0.5 * quad;
}

double kkt_violation(double alpha, double y, double decision, double c, double tol) {
  const double margin = y * decision;
  if (alpha <= 0.0) return std::max(0.0, (1.0 - tol) - margin);
  if (alpha >= c) return std::max(0.0, margin - (1.0 + tol));
  return std::max(0.0, std::abs(margin - 1.0) - tol);
}

double BinarySvm::decision(std::span<const double> x) const {
  if (x.size() != support_vectors.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "feature vector has " + std::to_string(x.size()) +
                                              " entries, machine expects " +
                                              std::to_string(support_vectors.cols()));
  }
  double f = bias;
  for (std::size_t i = 0; i < support_vectors.rows(); ++i) {
    f += alphas_signed[i] * std::exp(-params.gamma * squared_distance(support_vectors.row(i), x));
  }
  return f;
}

BinarySvm train_binary(const Matrix& x, std::span<const int> labels, int positive_code,
                       int negative_code, double c, RbfParams params, const SmoOptions& options) {
  std::vector<std::size_t> rows;
  std::vector<double> y;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] == positive_code || labels[r] == negative_code) {
      rows.push_back(r);
      y.push_back(labels[r] == positive_code ? 1.0 : -1.0);
    }
  }
  if (rows.empty()) {
    throw Error(ErrorKind::EmptyInput, "no rows for pair (" + std::to_string(positive_code) + "," +
                                           std::to_string(negative_code) + ")");
  }
  Matrix points(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), points.row(i).begin());
  }
  CachedRbfKernel kernel(points, params.gamma);
  const SmoResult solved = smo_solve(kernel, y, c, options);

  BinarySvm machine;
  machine.positive_code = positive_code;
  machine.negative_code = negative_code;
  machine.bias = solved.bias;
  machine.params = params;
  machine.c = c;
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (solved.alpha[i] > kSupportThreshold) support.push_back(i);
  }
  machine.support_vectors = Matrix(support.size(), x.cols());
  for (std::size_t s = 0; s < support.size(); ++s) {
    const std::size_t i = support[s];
    std::copy(points.row(i).begin(), points.row(i).end(), machine.support_vectors.row(s).begin());
    machine.alphas_signed.push_back(solved.alpha[i] * y[i]);
  }
  return machine;
}

MulticlassKernelSvm train_ovo(const HarSplit& split, double c, RbfParams params,
                              const SmoOptions& options) {
  if (split.size() == 0) throw Error(ErrorKind::EmptyInput, "empty training split");
  MulticlassKernelSvm model;
  for (int a = 1; a <= kNumClasses; ++a) {
    for (int b = a + 1; b <= kNumClasses; ++b) {
      model.machines.push_back(train_binary(split.features, split.labels, a, b, c, params, options));
    }
  }
  return model;
}

int predict_ovo(const MulticlassKernelSvm& model, std::span<const double> x) {
  // Index machines by pair so the result does not depend on their storage order.
  std::array<std::array<const BinarySvm*, kNumClasses>, kNumClasses> by_pair{};
  for (const BinarySvm& m : model.machines) {
    const int a = std::min(m.positive_code, m.negative_code);
    const int b = std::max(m.positive_code, m.negative_code);
    by_pair[static_cast<std::size_t>(a - 1)][static_cast<std::size_t>(b - 1)] = &m;
  }
  std::array<int, kNumClasses> votes{};
  std::array<double, kNumClasses> strength{};
  for (std::size_t a = 0; a < kNumClasses; ++a) {
    for (std::size_t b = a + 1; b < kNumClasses; ++b) {
      const BinarySvm* m = by_pair[a][b];
      if (m == nullptr) continue;
      const double f = m->decision(x);
      const int winner = f >= 0.0 ? m->positive_code : m->negative_code;
      ++votes[static_cast<std::size_t>(winner - 1)];
      strength[static_cast<std::size_t>(winner - 1)] += std::abs(f);
    }
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumClasses; ++k) {
    if (votes[k] > votes[best] || (votes[k] == votes[best] && strength[k] > strength[best])) best = k;
  }
  return static_cast<int>(best) + 1;
}

std::vector<int> predict_ovo(const MulticlassKernelSvm& model, const Matrix& x) {
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_ovo(model, x.row(r));
  return out;
}

}  // namespace har
