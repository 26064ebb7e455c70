#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "har/data.hpp"
#include "har/numkit.hpp"

namespace har {

/// K(x, z) = exp(-gamma |x - z|^2); gamma = 1 / (2 sigma^2).
struct RbfParams {
  double gamma = 1e-2;
};

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma);

/// Row access to a symmetric kernel matrix.
class KernelSource {
 public:
  virtual ~KernelSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::span<const double> row(std::size_t i) = 0;
  virtual double diagonal(std::size_t i) = 0;
};

/// Precomputed dense Gram matrix.
class DenseKernel final : public KernelSource {
 public:
  explicit DenseKernel(const Matrix& k) : k_(k) {}
  std::size_t size() const override { return k_.rows(); }
  std::span<const double> row(std::size_t i) override { return k_.row(i); }
  double diagonal(std::size_t i) override { return k_(i, i); }

 private:
  const Matrix& k_;
};

/// RBF rows over a set of points, computed on first use and kept.
class CachedRbfKernel final : public KernelSource {
 public:
  CachedRbfKernel(const Matrix& points, double gamma);
  std::size_t size() const override { return points_.rows(); }
  std::span<const double> row(std::size_t i) override;
  double diagonal(std::size_t) override { return 1.0; }
  std::size_t rows_computed() const noexcept { return computed_; }

 private:
  const Matrix& points_;
  double gamma_;
  std::vector<std::vector<double>> rows_;
  std::size_t computed_ = 0;
};

struct SmoOptions {
  double tol = 1e-3;
  /// Pair updates allowed before NotConverged; 0 picks max(1e6, 200 m).
  std::int64_t max_iterations = 0;
  bool record_objective = false;
};

struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;
  std::int64_t iterations = 0;
  /// Dual objective after every accepted update when recording.
  std::vector<double> objective_trace;
};

/// Maximizes sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij  s.t. 0 <= a <= c, y.a = 0.
/// Working pair: the maximal KKT violating pair. Throws NotConverged,
/// KernelNotSymmetric (dense overload only).
SmoResult smo_solve(const Matrix& kernel, std::span<const double> y, double c,
                    const SmoOptions& options = {});
SmoResult smo_solve(KernelSource& kernel, std::span<const double> y, double c,
                    const SmoOptions& options = {});

double dual_objective(const Matrix& kernel, std::span<const double> alpha,
                      std::span<const double> y);

/// How far one point is from its KKT condition beyond `tol` (0 when satisfied).
/// decision is f(x_i) including the bias.
double kkt_violation(double alpha, double y, double decision, double c, double tol);

struct BinarySvm {
  int positive_code = 0;  // y = +1
  int negative_code = 0;  // y = -1
  Matrix support_vectors;
  std::vector<double> alphas_signed;  // alpha_i y_i
  double bias = 0.0;
  RbfParams params;
  double c = 1.0;

  double decision(std::span<const double> x) const;
};

struct MulticlassKernelSvm {
  std::vector<BinarySvm> machines;  // pairs (a, b), a < b, lexicographic
};

/// Alphas at or below this count as zero when extracting support vectors.
inline constexpr double kSupportThreshold = 1e-8;

BinarySvm train_binary(const Matrix& x, std::span<const int> labels, int positive_code,
                       int negative_code, double c, RbfParams params,
                       const SmoOptions& options = {});
MulticlassKernelSvm train_ovo(const HarSplit& split, double c, RbfParams params,
                              const SmoOptions& options = {});

/// Plurality vote; ties by summed |decision| of the votes won, then lowest code.
int predict_ovo(const MulticlassKernelSvm& model, std::span<const double> x);
std::vector<int> predict_ovo(const MulticlassKernelSvm& model, const Matrix& x);

}  // namespace har
