#include "har/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "har/error.hpp"

namespace har {

namespace {

constexpr double kFloor = 1e-12;

// KL is evaluated only where requested; the gradient always.
KlGradient kl_gradient_impl(const Matrix& p, const Matrix& y, bool want_kl) {
  const std::size_t n = y.rows();
  if (p.rows() != n || p.cols() != n || y.cols() != 2) {
    throw Error(ErrorKind::ShapeMismatch, "P must be n x n and Y n x 2");
  }
  Matrix num(n, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y(i, 0) - y(j, 0);
      const double dy = y(i, 1) - y(j, 1);
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num(i, j) = v;
      num(j, i) = v;
      sum += 2.0 * v;
    }
  }
  KlGradient out{0.0, Matrix(n, 2)};
  for (std::size_t i = 0; i < n; ++i) {
    double gx = 0.0;
    double gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double q = num(i, j) / sum;
      const double coeff = (p(i, j) - q) * num(i, j);
      gx += coeff * (y(i, 0) - y(j, 0));
      gy += coeff * (y(i, 1) - y(j, 1));
      if (want_kl && p(i, j) > 0.0) out.kl += p(i, j) * std::log(p(i, j) / std::max(q, kFloor));
    }
    out.grad(i, 0) = 4.0 * gx;
    out.grad(i, 1) = 4.0 * gy;
  }
  return out;
}

}  // namespace

Matrix pairwise_sq_dists(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = squared_distance(x.row(i), x.row(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

ConditionalRow cond_probs_for_perplexity(std::span<const double> dists, double perplexity,
                                         double tol, int max_iter) {
  if (dists.empty()) throw Error(ErrorKind::EmptyInput, "no neighbours");
  if (!(perplexity > 0.0)) throw Error(ErrorKind::InvalidArgument, "perplexity must be > 0");
  const double dmin = *std::min_element(dists.begin(), dists.end());
  ConditionalRow row;
  row.p.resize(dists.size());
  double beta = 1.0;  // precision 1 / (2 sigma^2)
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  row.converged = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    double total = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < dists.size(); ++j) {
      const double shifted = dists[j] - dmin;
      row.p[j] = std::exp(-beta * shifted);
      total += row.p[j];
      weighted += row.p[j] * shifted;
    }
    const double entropy = std::log(total) + beta * weighted / total;  // nats
    for (double& v : row.p) v /= total;
    const double achieved = std::exp(entropy);  // == 2^(entropy in bits)
    if (std::abs(achieved - perplexity) <= tol) {
      row.converged = true;
      break;
    }
    if (achieved > perplexity) {
      lo = beta;
      beta = std::isinf(hi) ? 2.0 * beta : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
  }
  row.sigma = std::sqrt(1.0 / (2.0 * beta));
  return row;
}

Matrix conditional_affinities(const Matrix& x, double perplexity) {
  const std::size_t n = x.rows();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 points");
  if (!(perplexity > 1.0 && perplexity < static_cast<double>(n))) {
    throw Error(ErrorKind::InvalidArgument, "perplexity must lie in (1, n)");
  }
  const Matrix d = pairwise_sq_dists(x);
  Matrix cond(n, n);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) row[k++] = d(i, j);
    }
    const ConditionalRow solved = cond_probs_for_perplexity(row, perplexity);
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) cond(i, j) = solved.p[k++];
    }
  }
  return cond;
}

Matrix symmetrize_p(const Matrix& conditionals) {
  const std::size_t n = conditionals.rows();
  if (conditionals.cols() != n) throw Error(ErrorKind::ShapeMismatch, "conditionals must be square");
  Matrix p(n, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = std::max((conditionals(i, j) + conditionals(j, i)) / (2.0 * static_cast<double>(n)), kFloor);
      p(i, j) = v;
      total += v;
    }
  }
  for (double& v : p.data()) v /= total;
  return p;
}

KlGradient kl_and_gradient(const Matrix& p, const Matrix& y) { return kl_gradient_impl(p, y, true); }

Embedding embed(const Matrix& x, std::span<const int> labels, const TsneConfig& cfg) {
  Rng rng(cfg.seed);
  Matrix initial(x.rows(), 2);
  for (double& v : initial.data()) v = rng.gaussian(0.0, 1e-2);
  return embed_from(x, labels, std::move(initial), cfg);
}

Embedding embed_from(const Matrix& x, std::span<const int> labels, Matrix initial,
                     const TsneConfig& cfg) {
  const std::size_t n = x.rows();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 points");
  if (!labels.empty() && labels.size() != n) throw Error(ErrorKind::LengthMismatch, "labels vs rows");
  if (initial.rows() != n || initial.cols() != 2) {
    throw Error(ErrorKind::ShapeMismatch, "initial layout must be n x 2");
  }
  if (cfg.iterations < 1) throw Error(ErrorKind::InvalidArgument, "iterations must be >= 1");

  const Matrix p = symmetrize_p(conditional_affinities(x, cfg.perplexity));
  Matrix exaggerated = p;
  for (double& v : exaggerated.data()) v *= cfg.early_exaggeration;

  Embedding out;
  out.points = std::move(initial);
  out.labels.assign(labels.begin(), labels.end());
  Matrix update(n, 2);
  Matrix gains(n, 2, 1.0);
  const int trace_from = std::max(0, cfg.iterations - 100);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const bool exaggerating = iter < cfg.exaggeration_iterations;
    const bool want_kl = !exaggerating && (iter >= trace_from || iter % 50 == 0);
    const KlGradient kg = kl_gradient_impl(exaggerating ? exaggerated : p, out.points, want_kl);
    const double momentum = iter < cfg.momentum_switch_iteration ? cfg.initial_momentum : cfg.final_momentum;
    auto y = out.points.data();
    auto u = update.data();
    auto g = gains.data();
    const auto grad = kg.grad.data();
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (cfg.adaptive_gains) {
        g[k] = (grad[k] > 0.0) != (u[k] > 0.0) ? g[k] + 0.2 : g[k] * 0.8;
        g[k] = std::max(g[k], 0.01);
      }
      u[k] = momentum * u[k] - cfg.learning_rate * g[k] * grad[k];
      y[k] += u[k];
      if (!std::isfinite(y[k])) {
        throw Error(ErrorKind::NonFiniteConfiguration, "embedding diverged at iteration " + std::to_string(iter));
      }
    }
    if (want_kl) out.kl_trace.emplace_back(iter, kg.kl);
  }
  out.final_kl = kl_gradient_impl(p, out.points, true).kl;
  return out;
}

ConfusionMatrix nearest_neighbor_confusion(const Matrix& points, std::span<const int> labels) {
  if (points.rows() != labels.size()) throw Error(ErrorKind::LengthMismatch, "points vs labels");
  if (points.rows() < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 points");
  std::vector<int> predicted(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t nearest = i;
    for (std::size_t j = 0; j < points.rows(); ++j) {
      if (j == i) continue;
      const double d = squared_distance(points.row(i), points.row(j));
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    predicted[i] = labels[nearest];
  }
  return confusion(labels, predicted);
}

std::pair<int, int> most_confused_pair(const ConfusionMatrix& cm) {
  std::pair<int, int> best{1, 2};
  std::size_t best_mass = 0;
  bool found = false;
  for (std::size_t a = 0; a < kNumClasses; ++a) {
    for (std::size_t b = a + 1; b < kNumClasses; ++b) {
      const std::size_t mass = cm.counts[a][b] + cm.counts[b][a];
      if (!found || mass > best_mass) {
        best = {static_cast<int>(a) + 1, static_cast<int>(b) + 1};
        best_mass = mass;
        found = true;
      }
    }
  }
  return best;
}

}  // namespace har
