#pragma once

// Statistical dimension of convex cones and the phase-transition prediction
// built on it.

#include "demixkit/core.hpp"
#include "demixkit/parallel.hpp"
#include "demixkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace demixkit {

struct SubspaceCone {
  std::ptrdiff_t k = 0;
  std::ptrdiff_t d = 1;
};

struct OrthantCone {
  std::ptrdiff_t d = 1;
};

/// Descent cone of the l1 norm at a point with the given sign pattern
/// (entries in {-1, 0, +1}; zeros are off the support).
struct DescentL1Cone {
  std::vector<int> signs;
  std::ptrdiff_t d() const { return static_cast<std::ptrdiff_t>(signs.size()); }
  std::ptrdiff_t sparsity() const {
    return std::count_if(signs.begin(), signs.end(), [](int s) { return s != 0; });
  }
};

class ConeModel {
 public:
  using Variant = std::variant<SubspaceCone, OrthantCone, DescentL1Cone>;

  static ConeModel subspace(std::ptrdiff_t k, std::ptrdiff_t d) {
    if (d < 1 || k < 0 || k > d) throw InvalidArgument("subspace cone needs 0 <= k <= d, d >= 1");
    return ConeModel(SubspaceCone{k, d});
  }
  static ConeModel orthant(std::ptrdiff_t d) {
    if (d < 1) throw InvalidArgument("orthant cone needs d >= 1");
    return ConeModel(OrthantCone{d});
  }
  static ConeModel descent_l1(std::vector<int> signs) {
    if (signs.empty()) throw InvalidArgument("descent cone needs a nonempty sign pattern");
    for (int s : signs)
      if (s < -1 || s > 1) throw InvalidArgument("sign pattern entries must be -1, 0 or +1");
    return ConeModel(DescentL1Cone{std::move(signs)});
  }
  /// Descent cone at an s-sparse vector; the first s signs are +1. The
  /// statistical dimension depends only on (d, s).
  static ConeModel descent_l1_sparsity(std::ptrdiff_t d, std::ptrdiff_t s) {
    if (d < 1 || s < 0 || s > d) throw InvalidArgument("descent cone needs 0 <= s <= d");
    std::vector<int> signs(static_cast<std::size_t>(d), 0);
    std::fill_n(signs.begin(), s, 1);
    return descent_l1(std::move(signs));
  }

  std::ptrdiff_t ambient_dim() const {
    return std::visit(
        [](const auto& c) -> std::ptrdiff_t {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, DescentL1Cone>) return c.d();
          else return c.d;
        },
        cone_);
  }

  std::string name() const {
    return std::visit(
        [](const auto& c) -> std::string {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, SubspaceCone>) return "subspace(k=" + std::to_string(c.k) + ")";
          else if constexpr (std::is_same_v<T, OrthantCone>) return "orthant";
          else return "descent_l1(s=" + std::to_string(c.sparsity()) + ")";
        },
        cone_);
  }

  const Variant& variant() const { return cone_; }

 private:
  explicit ConeModel(Variant v) : cone_(std::move(v)) {}
  Variant cone_;
};

/// dist^2(g, polar of the l1 descent cone) = min_{t >= 0} F(t) with
///   F(t) = sum_{supp} (g_i - t s_i)^2 + sum_{off} ((|g_i| - t)_+)^2.
/// F is a convex piecewise quadratic with breakpoints at the off-support
/// magnitudes, so each piece is minimized in closed form.
inline double polar_distance_l1(std::span<const double> g, std::span<const int> signs) {
  if (g.size() != signs.size())
    throw InvalidArgument("polar_distance_l1: sign pattern length does not match g");

  double sum_gs = 0.0;   // sum over support of g_i s_i
  double sum_g2s = 0.0;  // sum over support of g_i^2
  double n_supp = 0.0;
  std::vector<double> off;
  off.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (signs[i] != 0) {
      sum_gs += g[i] * signs[i];
      sum_g2s += g[i] * g[i];
      n_supp += 1.0;
    } else {
      off.push_back(std::abs(g[i]));
    }
  }
  std::sort(off.begin(), off.end());

  // Suffix sums over the off-support magnitudes still above t.
  double act_sum = 0.0, act_sq = 0.0;
  for (double a : off) {
    act_sum += a;
    act_sq += a * a;
  }
  double n_act = static_cast<double>(off.size());

  auto piece_value = [&](double t) {
    return sum_g2s - 2.0 * t * sum_gs + n_supp * t * t + act_sq - 2.0 * t * act_sum + n_act * t * t;
  };

  double best = std::numeric_limits<double>::infinity();
  double lo = 0.0;
  for (std::size_t j = 0; j <= off.size(); ++j) {
    const double hi = j < off.size() ? off[j] : std::numeric_limits<double>::infinity();
    const double curv = n_supp + n_act;
    double t;
    if (curv > 0.0) {
      t = std::clamp((sum_gs + act_sum) / curv, lo, hi);
    } else {
      t = lo;  // F is constant (zero) on this piece
    }
    if (std::isfinite(t)) best = std::min(best, piece_value(t));
    if (j < off.size()) {
      act_sum -= off[j];
      act_sq -= off[j] * off[j];
      n_act -= 1.0;
      lo = hi;
    }
  }
  return std::max(best, 0.0);
}

inline double polar_distance_l1(const Vector& g, const std::vector<int>& signs) {
  return polar_distance_l1(std::span<const double>(g.data(), static_cast<std::size_t>(g.size())),
                           std::span<const int>(signs));
}

/// Squared norm of the projection of g onto the cone.
inline double projected_sq_norm(const ConeModel& cone, const Vector& g) {
  return std::visit(
      [&](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, SubspaceCone>) {
          return g.head(c.k).squaredNorm();
        } else if constexpr (std::is_same_v<T, OrthantCone>) {
          return g.cwiseMax(0.0).squaredNorm();
        } else {
          // Moreau: ||Proj_C g||^2 = dist^2(g, C polar).
          return polar_distance_l1(g, c.signs);
        }
      },
      cone.variant());
}

struct SdimEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
};

inline constexpr std::int64_t kSdimShardSize = 1000;

/// Monte Carlo estimate of E ||Proj_C(g)||^2. Samples are split into fixed
/// shards seeded by (seed, shard), so the result does not depend on `threads`.
inline SdimEstimate sdim_monte_carlo(const ConeModel& cone, std::int64_t samples,
                                     std::uint64_t seed, unsigned threads = 1) {
  if (samples < 100) throw InvalidArgument("sdim_monte_carlo: need at least 100 samples");
  const std::int64_t shards = (samples + kSdimShardSize - 1) / kSdimShardSize;
  const std::ptrdiff_t d = cone.ambient_dim();
  std::vector<double> sum(static_cast<std::size_t>(shards)), sum_sq(static_cast<std::size_t>(shards));

  auto run_shard = [&](std::int64_t s) {
    CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    const std::int64_t n = std::min(kSdimShardSize, samples - s * kSdimShardSize);
    double a = 0.0, b = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const Vector g = rng.gaussian_vector(d);
      const double v = projected_sq_norm(cone, g);
      a += v;
      b += v * v;
    }
    sum[static_cast<std::size_t>(s)] = a;
    sum_sq[static_cast<std::size_t>(s)] = b;
  };

  parallel_for(static_cast<std::size_t>(shards), threads,
               [&](std::size_t s) { run_shard(static_cast<std::int64_t>(s)); });

  double a = 0.0, b = 0.0;
  for (std::int64_t s = 0; s < shards; ++s) {
    a += sum[static_cast<std::size_t>(s)];
    b += sum_sq[static_cast<std::size_t>(s)];
  }
  const double n = static_cast<double>(samples);
  const double mean = a / n;
  const double var = std::max(0.0, (b - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), samples};
}

/// Normalized total statistical dimension (sum of deltas) / d.
inline double total_delta(std::ptrdiff_t d, std::span<const double> deltas) {
  if (d < 1) throw InvalidArgument("total_delta: d must be positive");
  double s = 0.0;
  for (double v : deltas) s += v;
  return s / static_cast<double>(d);
}

inline double total_delta(std::ptrdiff_t d, std::span<const ConeModel> cones,
                          std::int64_t samples, std::uint64_t seed) {
  std::vector<double> deltas;
  for (std::size_t i = 0; i < cones.size(); ++i) {
    if (cones[i].ambient_dim() != d)
      throw InvalidArgument("total_delta: cone " + std::to_string(i) + " has ambient dimension " +
                            std::to_string(cones[i].ambient_dim()) + ", expected " +
                            std::to_string(d));
    deltas.push_back(sdim_monte_carlo(cones[i], samples, derive_seed(seed, {i})).mean);
  }
  return total_delta(d, deltas);
}

enum class Prediction { LikelySuccess, LikelyFailure, Indeterminate };

inline std::string_view to_string(Prediction p) {
  switch (p) {
    case Prediction::LikelySuccess: return "likely_success";
    case Prediction::LikelyFailure: return "likely_failure";
    case Prediction::Indeterminate: return "indeterminate";
  }
  return "?";
}

/// Three-way classification by the band 1 -/+ C / sqrt(d) around delta = 1.
inline Prediction predict_success(double delta, std::ptrdiff_t d, double margin_constant = 1.0) {
  if (d < 1) throw InvalidArgument("predict_success: d must be positive");
  if (!(margin_constant > 0.0)) throw InvalidArgument("predict_success: C must be positive");
  const double band = margin_constant / std::sqrt(static_cast<double>(d));
  if (delta <= 1.0 - band) return Prediction::LikelySuccess;
  if (delta >= 1.0 + band) return Prediction::LikelyFailure;
  return Prediction::Indeterminate;
}

}  // namespace demixkit
