#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gfp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixF = Eigen::MatrixXf;
using Index = Eigen::Index;

/// Bad input, bad shape, bad config. CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated on-disk data.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Non-finite values in activations, gradients, or parameters.
/// Carries the registry path (or layer tag) where the failure surfaced.
/// CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& msg, std::string path)
      : std::runtime_error(msg + " [at " + path + "]"), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// API misuse, e.g. backward before forward.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

// FNV-1a, used for config hashing and parameter-bank fingerprints.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = 14695981039346656037ull) {
  return fnv1a(s.data(), s.size(), h);
}

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Counter-based random stream. A stream is fully determined by
/// (seed, tag, a, b), so parallel call sites can carve out disjoint
/// streams without sharing mutable state, and a stream can be
/// reconstructed from its key alone (checkpoints only store the key).
class RngStream {
 public:
  RngStream(uint64_t seed, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = fnv1a(tag);
    h = fnv1a(&seed, sizeof(seed), h);
    h = fnv1a(&a, sizeof(a), h);
    h = fnv1a(&b, sizeof(b), h);
    base_ = h;
  }

  uint64_t next_u64() { return detail::splitmix64(base_ + counter_++ * 0x9e3779b97f4a7c15ull); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
  int64_t uniform_int(int64_t n) {
    require(n > 0, "uniform_int: n must be positive");
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
  }

  /// Box-Muller, one value per call so the draw count stays predictable.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    u1 = std::max(u1, 0x1.0p-53);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Standard normal truncated to [-2, 2] by rejection.
  double truncated_normal() {
    for (;;) {
      double z = normal();
      if (std::abs(z) <= 2.0) return z;
    }
  }

  /// Standard Gumbel draw, -log(-log(U)).
  double gumbel() {
    double u = std::min(std::max(uniform(), 0x1.0p-53), 1.0 - 0x1.0p-53);
    return -std::log(-std::log(u));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t base_ = 0;
  uint64_t counter_ = 0;
};

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

}  // namespace gfp
