#include "har/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "har/error.hpp"

namespace har {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RowWidthMismatch: return "RowWidthMismatch";
    case ErrorKind::NonNumericToken: return "NonNumericToken";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::RowCountMismatch: return "RowCountMismatch";
    case ErrorKind::UnknownFeature: return "UnknownFeature";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::KernelNotSymmetric: return "KernelNotSymmetric";
    case ErrorKind::EmptyNode: return "EmptyNode";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::SearchFailed: return "SearchFailed";
    case ErrorKind::NonFiniteConfiguration: return "NonFiniteConfiguration";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidCode: return "InvalidCode";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorKind::ShapeMismatch, "matrix data length " + std::to_string(data_.size()) +
                                              " != " + std::to_string(rows) + "x" +
                                              std::to_string(cols));
  }
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t Rng::below(std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::size_t argmax_index(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorKind::EmptyInput, "softmax of empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (double& o : out) o /= total;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Matrix init_weights(Rng& rng, std::size_t fan_in, std::size_t fan_out, InitScheme scheme) {
  if (fan_in == 0 || fan_out == 0) {
    throw Error(ErrorKind::InvalidArgument, "init_weights needs positive fan_in and fan_out");
  }
  Matrix w(fan_out, fan_in);
  if (scheme == InitScheme::Xavier) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
  } else {
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : w.data()) v = rng.gaussian(0.0, stddev);
  }
  return w;
}

Standardized standardize(const Matrix& x) {
  if (x.rows() < 2) throw Error(ErrorKind::InvalidArgument, "standardize needs at least 2 rows");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Standardized out{Matrix(n, d), std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) out.means[c] += x(r, c);
  }
  for (double& m : out.means) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = x(r, c) - out.means[c];
      out.stds[c] += dev * dev;
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::sqrt(out.stds[c] / static_cast<double>(n));
    // Relative threshold: a column whose spread is pure rounding noise is constant.
    const double scale = std::max(1.0, std::abs(out.means[c]));
    out.stds[c] = sd > 1e-12 * scale ? sd : 1.0;
  }
  out.values = apply_standardization(x, out.means, out.stds);
  return out;
}

Matrix apply_standardization(const Matrix& x, std::span<const double> means,
                             std::span<const double> stds) {
  if (means.size() != x.cols() || stds.size() != x.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "standardization statistics do not match columns");
  }
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - means[c]) / stds[c];
  }
  return out;
}

double check_gradient(const ScalarFn& f, const GradientFn& g, std::span<const double> point,
                      double step) {
  if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "gradient check step must be > 0");
  const std::vector<double> analytic = g(point);
  if (analytic.size() != point.size()) {
    throw Error(ErrorKind::ShapeMismatch, "analytic gradient length differs from point");
  }
  std::vector<double> probe(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = f(probe);
    probe[i] = saved - step;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic[i])) {
      throw Error(ErrorKind::NonFiniteEvaluation, "component " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

double gram_spectral_norm(const Matrix& x, bool with_bias, int iterations) {
  const std::size_t d = x.cols() + (with_bias ? 1 : 0);
  std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  std::vector<double> xv(x.rows());
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double s = dot(x.row(r), std::span<const double>(v.data(), x.cols()));
      if (with_bias) s += v.back();
      xv[r] = s;
    }
    std::vector<double> next(d, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto row = x.row(r);
      for (std::size_t c = 0; c < x.cols(); ++c) next[c] += row[c] * xv[r];
      if (with_bias) next.back() += xv[r];
    }
    const double nrm = norm2(next);
    if (nrm == 0.0) return 0.0;
    lambda = nrm;
    for (std::size_t i = 0; i < d; ++i) v[i] = next[i] / nrm;
  }
  return lambda;
}

}  // namespace har
