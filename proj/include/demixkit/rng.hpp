#pragma once

#include "demixkit/core.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace demixkit {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Combine a base seed with a tuple of indices into an independent stream key.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = detail::mix64(seed + detail::kGolden);
  for (auto p : parts) h = detail::mix64(h ^ (detail::mix64(p + detail::kGolden) + (h << 6) + (h >> 2)));
  return h;
}

/// Counter-based generator: the n-th draw is a pure function of (seed, n).
/// Integer arithmetic only up to the uniform stage, so streams agree across
/// platforms and standard libraries.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(seed) {}

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform in (0, 1), never exactly 0 or 1.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("CounterRng::below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  Matrix gaussian_matrix(std::ptrdiff_t rows, std::ptrdiff_t cols) {
    Matrix m(rows, cols);
    for (std::ptrdiff_t j = 0; j < cols; ++j)
      for (std::ptrdiff_t i = 0; i < rows; ++i) m(i, j) = gaussian();
    return m;
  }

  Vector gaussian_vector(std::ptrdiff_t d) { return gaussian_matrix(d, 1); }

  /// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::ptrdiff_t> choose(std::ptrdiff_t n, std::ptrdiff_t k) {
    if (k < 0 || k > n) throw InvalidArgument("CounterRng::choose: need 0 <= k <= n");
    std::vector<std::ptrdiff_t> idx(static_cast<std::size_t>(n));
    for (std::ptrdiff_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (std::ptrdiff_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::ptrdiff_t>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
  }

  /// d-vector with k nonzeros on a uniform support, standard Gaussian values.
  Vector sparse_gaussian(std::ptrdiff_t d, std::ptrdiff_t k) {
    Vector v = Vector::Zero(d);
    for (auto i : choose(d, k)) v(i) = gaussian();
    return v;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace demixkit
