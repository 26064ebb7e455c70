#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace har {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Repository-wide PRNG.
///
/// Engine: std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniforms take the top 53 bits: u = (x >> 11) * 2^-53, in [0,1).
/// Gaussians use the Box-Muller transform on two uniforms (the first mapped
/// to (0,1] as 1-u), emitting the cosine branch and caching the sine branch.
/// std::*_distribution is avoided because its output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }
  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::size_t below(std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates, highest index first.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
/// Index of the first maximal entry.
std::size_t argmax_index(std::span<const double> v);

/// Numerically stable softmax (max-subtracted). Throws EmptyInput.
std::vector<double> softmax(std::span<const double> v);
double sigmoid(double x);
/// log(1 + exp(x)) without overflow for large |x|.
double softplus(double x);

enum class InitScheme { Xavier, He };

/// fan_out x fan_in matrix. Xavier: U(+-sqrt(6/(fan_in+fan_out))). He: N(0, 2/fan_in).
Matrix init_weights(Rng& rng, std::size_t fan_in, std::size_t fan_out, InitScheme scheme);

struct Standardized {
  Matrix values;
  std::vector<double> means;
  std::vector<double> stds;  // population std; constant columns clamped to 1
};

Standardized standardize(const Matrix& x);
/// Apply previously computed column statistics to new rows.
Matrix apply_standardization(const Matrix& x, std::span<const double> means,
                             std::span<const double> stds);

using ScalarFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// Max componentwise relative error |a-n|/max(1,|a|,|n|) between the analytic
/// gradient and central differences. Throws NonFiniteEvaluation.
double check_gradient(const ScalarFn& f, const GradientFn& g, std::span<const double> point,
                      double step = 1e-5);

/// Largest eigenvalue of X^T X (with an appended ones column when
/// with_bias) by power iteration. Used for step-size bounds.
double gram_spectral_norm(const Matrix& x, bool with_bias, int iterations = 100);

}  // namespace har
