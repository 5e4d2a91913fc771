#pragma once

// Direction-of-arrival estimation: array simulation, MUSIC, and covariance
// demixing into PSD low-rank + diagonal + small residual.

#include "demixkit/atoms.hpp"
#include "demixkit/rng.hpp"
#include "demixkit/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace demixkit {

struct DoaScenario {
  int n = 10;  // real sensor channels (n/2 complex elements, cos and sin stacked)
  int r = 2;
  std::vector<double> bearings_deg{-10.0, 15.0};
  int snapshots = 200;
  double snr_db = 5.0;
  std::uint64_t seed = 0;
  // Per-sensor noise variances are log-uniform on [1, noise_spread], drawn
  // once per seed. SNR is measured against the quietest possible sensor
  // (variance 1). noise_spread = 1 gives white noise.
  double noise_spread = 100.0;

  void validate() const {
    if (n < 2 || n % 2 != 0) throw InvalidArgument("doa: n must be an even number >= 2");
    if (r < 1 || r >= n) throw InvalidArgument("doa: need 1 <= r < n");
    if (static_cast<int>(bearings_deg.size()) != r)
      throw InvalidArgument("doa: number of bearings must equal r");
    for (double b : bearings_deg)
      if (!(b > -90.0 && b < 90.0)) throw InvalidArgument("doa: bearings must lie in (-90, 90)");
    if (snapshots < 1) throw InvalidArgument("doa: snapshots must be >= 1");
    if (!(noise_spread >= 1.0)) throw InvalidArgument("doa: noise_spread must be >= 1");
  }
};

/// Real embedding of the half-wavelength ULA steering vector:
/// [cos(pi k sin t); sin(pi k sin t)], k = 0 .. n/2 - 1.
inline Vector steering_vector(int n, double theta_deg) {
  const int half = n / 2;
  const double u = std::sin(theta_deg * std::numbers::pi / 180.0);
  Vector a(n);
  for (int k = 0; k < half; ++k) {
    a(k) = std::cos(std::numbers::pi * k * u);
    a(half + k) = std::sin(std::numbers::pi * k * u);
  }
  return a;
}

inline Vector sensor_noise_variances(const DoaScenario& s) {
  CounterRng rng(derive_seed(s.seed, {0x6e015eULL}));
  Vector v(s.n);
  for (int i = 0; i < s.n; ++i) v(i) = std::pow(s.noise_spread, rng.uniform());
  return v;
}

struct DoaData {
  Matrix covariance;          // empirical covariance Z0
  Matrix source_covariance;   // A0 A0^T (expected signal part)
  Vector noise_variances;     // diagonal of Y0
};

/// Real zero-mean Gaussian sources with per-sensor signal power 10^(snr/10).
inline DoaData simulate_doa(const DoaScenario& s) {
  s.validate();
  CounterRng rng(s.seed);
  Matrix a(s.n, s.r);
  for (int j = 0; j < s.r; ++j) a.col(j) = steering_vector(s.n, s.bearings_deg[static_cast<std::size_t>(j)]);
  // ||a||^2 = n/2, so per-sensor power of a unit-variance source is 1/2.
  const double source_sd = std::sqrt(2.0 * std::pow(10.0, s.snr_db / 10.0));
  const Vector noise_var = sensor_noise_variances(s);
  const Vector noise_sd = noise_var.cwiseSqrt();

  Matrix z = Matrix::Zero(s.n, s.n);
  for (int t = 0; t < s.snapshots; ++t) {
    Vector src(s.r);
    for (int j = 0; j < s.r; ++j) src(j) = source_sd * rng.gaussian();
    Vector x = a * src;
    for (int i = 0; i < s.n; ++i) x(i) += noise_sd(i) * rng.gaussian();
    z.noalias() += x * x.transpose();
  }
  z /= s.snapshots;
  return {z, source_sd * source_sd * a * a.transpose(), noise_var};
}

inline std::vector<double> music_grid() {
  std::vector<double> g;
  for (int i = -180; i <= 180; ++i) g.push_back(0.5 * i);
  return g;
}

/// P(theta) = 1 / ||E_n^T a(theta)||^2 with E_n the eigenvectors beyond the top r.
inline std::vector<double> music_pseudospectrum(const Matrix& cov, int r,
                                                const std::vector<double>& grid) {
  const auto es = detail::checked_eigh(detail::symmetric_part(cov));
  const auto n = cov.rows();
  // Eigen sorts eigenvalues ascending; the noise subspace is the first n - r.
  const Matrix noise = es.eigenvectors().leftCols(n - r);
  std::vector<double> p;
  p.reserve(grid.size());
  for (double theta : grid) {
    const double proj = (noise.transpose() * steering_vector(static_cast<int>(n), theta)).squaredNorm();
    p.push_back(1.0 / std::max(proj, 1e-300));
  }
  return p;
}

/// Bearings of the r largest local maxima, sorted ascending. If fewer than r
/// maxima exist the strongest one is repeated.
inline std::vector<double> music_peaks(const std::vector<double>& p, const std::vector<double>& grid,
                                       int r) {
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool left = i == 0 || p[i] > p[i - 1];
    const bool right = i + 1 == p.size() || p[i] >= p[i + 1];
    if (left && right) peaks.push_back(i);
  }
  std::stable_sort(peaks.begin(), peaks.end(), [&](auto a, auto b) { return p[a] > p[b]; });
  std::vector<double> out;
  for (std::size_t k = 0; k < peaks.size() && static_cast<int>(out.size()) < r; ++k)
    out.push_back(grid[peaks[k]]);
  while (static_cast<int>(out.size()) < r && !out.empty()) out.push_back(out.front());
  std::sort(out.begin(), out.end());
  return out;
}

struct CovarianceSplit {
  Matrix low_rank;  // X hat, PSD
  Matrix diagonal;  // Y hat
  Matrix residual;  // E hat
  SolveResult solve;
};

/// minimize ||X||_{S1+} + ||Y||_diag + lambda ||E||_F^2  s.t.  X + Y + E = Z0.
/// Z0 is normalized by its mean diagonal before solving so lambda is
/// scale-free; outputs are returned in the original scale.
inline CovarianceSplit demix_covariance(const Matrix& z0, double lambda, const SolverOptions& opts) {
  const auto n = z0.rows();
  const double scale = std::max(z0.trace() / static_cast<double>(n), 1e-300);
  const Matrix zn = detail::symmetric_part(z0) / scale;
  DemixProblem p{zn, LinearOp::identity(Shape::matrix(n, n)),
                 {Component{GaugeSpec::matrix(GaugeKind::PsdTrace, n, n), 1.0, std::nullopt},
                  Component{GaugeSpec::matrix(GaugeKind::DiagIndicator, n, n), 1.0, std::nullopt}},
                 lambda};
  SolveResult res = decomposition_demix(p, opts);
  CovarianceSplit out{res.components[0] * scale, res.components[1] * scale,
                      res.components[2] * scale, {}};
  out.solve = std::move(res);
  return out;
}

}  // namespace demixkit
