#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "har/eval.hpp"
#include "har/numkit.hpp"

namespace har {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 4.0;
  int exaggeration_iterations = 100;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iteration = 250;
  /// Per-coordinate adaptive gains (+0.2 / x0.8, floor 0.01).
  bool adaptive_gains = true;
  std::uint64_t seed = 1;
};

struct Embedding {
  Matrix points;  // n x 2
  std::vector<int> labels;
  double final_kl = 0.0;
  /// (iteration, KL) samples; every iteration of the final 100 is included.
  std::vector<std::pair<int, double>> kl_trace;
};

/// Symmetric, zero diagonal.
Matrix pairwise_sq_dists(const Matrix& x);

struct ConditionalRow {
  std::vector<double> p;
  double sigma = 0.0;
  bool converged = true;  // false: perplexity unreachable, boundary sigma returned
};

/// Binary search on the Gaussian precision so that 2^H(p) matches the
/// perplexity within tol. `dists` are squared distances to the other points.
ConditionalRow cond_probs_for_perplexity(std::span<const double> dists, double perplexity,
                                         double tol = 1e-4, int max_iter = 50);

/// n x n conditionals p_{j|i} (zero diagonal) for every row of x.
Matrix conditional_affinities(const Matrix& x, double perplexity);

/// P_ij = (p_{j|i} + p_{i|j}) / 2n with off-diagonal entries floored at 1e-12,
/// renormalized to sum 1.
Matrix symmetrize_p(const Matrix& conditionals);

struct KlGradient {
  double kl = 0.0;
  Matrix grad;  // n x 2
};

/// Student-t Q; gradient 4 sum_j (P_ij - Q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1.
KlGradient kl_and_gradient(const Matrix& p, const Matrix& y);

/// Exact t-SNE. Throws NonFiniteConfiguration, InvalidArgument.
Embedding embed(const Matrix& x, std::span<const int> labels, const TsneConfig& cfg);
/// Same optimization from a caller-supplied initial layout (n x 2).
Embedding embed_from(const Matrix& x, std::span<const int> labels, Matrix initial,
                     const TsneConfig& cfg);

/// Leave-one-out 1-NN prediction in the embedding, tabulated against the labels.
ConfusionMatrix nearest_neighbor_confusion(const Matrix& points, std::span<const int> labels);

/// Unordered class pair (a < b, codes) with the largest off-diagonal mass
/// counts[a][b] + counts[b][a]; ties go to the lexicographically smallest pair.
std::pair<int, int> most_confused_pair(const ConfusionMatrix& cm);

}  // namespace har
