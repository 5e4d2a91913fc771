#pragma once

// Application demos: spikes + sines, texture repair, DOA with MUSIC, and
// blind deconvolution by lifting.

#include "demixkit/doa.hpp"
#include "demixkit/operators.hpp"
#include "demixkit/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace demixkit {

// ---------------------------------------------------------------- spikes + sines

struct SpikesSinesReport {
  Vector z0, x0, y0, x_hat, y_hat;
  double error_x = 0.0;
  double error_y = 0.0;
  SolveResult solve;
};

inline SolverOptions default_demo_options() {
  return SolverOptions{.rho = 1.0, .max_iter = 20000, .primal_tol = 1e-10, .dual_tol = 1e-10,
                       .seed = 0, .adaptive_rho = true};
}

/// x0 has s_spike Gaussian spikes, y0 = D^T c with c s_dct-sparse in the
/// orthonormal DCT. Solves min ||x||_1 + lambda ||D y||_1 s.t. x + y = z0.
inline SpikesSinesReport demo_spikes_sines(int d, int s_spike, int s_dct, std::uint64_t seed,
                                           double lambda = 1.0,
                                           const SolverOptions& opts = default_demo_options()) {
  if (d < 1) throw InvalidArgument("spikes_sines: d must be positive");
  if (s_spike < 0 || s_dct < 0 || 4 * (s_spike + s_dct) > d)
    throw InvalidArgument("spikes_sines: need s_spike + s_dct <= d / 4");
  CounterRng rng(seed);
  const LinearOp dct = LinearOp::dct(d);
  SpikesSinesReport rep;
  rep.x0 = rng.sparse_gaussian(d, s_spike);
  rep.y0 = dct.adjoint(rng.sparse_gaussian(d, s_dct));
  rep.z0 = rep.x0 + rep.y0;
  const auto problem = DemixProblem::superposition(
      rep.z0, {Component{GaugeSpec::vector(GaugeKind::L1, d), 1.0, std::nullopt},
               Component{GaugeSpec::vector(GaugeKind::L1, d), lambda, dct}});
  rep.solve = admm_demix(problem, opts);
  rep.x_hat = rep.solve.components[0];
  rep.y_hat = rep.solve.components[1];
  rep.error_x = relative_error(rep.x_hat, rep.x0);
  rep.error_y = relative_error(rep.y_hat, rep.y0);
  return rep;
}

// ---------------------------------------------------------------- texture

struct TextureInstance {
  Matrix low_rank;
  Matrix sparse;
  Matrix image() const { return low_rank + sparse; }
};

/// n x n checkerboard 0.5 * 11^T + 0.5 * u v^T with u, v alternating +-1 blocks
/// (rank 2, entries in {0, 1}), plus round(fraction * n^2) entries corrupted
/// by +-magnitude at uniformly chosen positions.
inline TextureInstance checkerboard_texture(int n, int block, double fraction, double magnitude,
                                            std::uint64_t seed) {
  if (n < 1 || block < 1) throw InvalidArgument("checkerboard: n and block must be positive");
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw InvalidArgument("checkerboard: corruption fraction must lie in [0, 1]");
  Vector u(n);
  for (int i = 0; i < n; ++i) u(i) = (i / block) % 2 == 0 ? 1.0 : -1.0;
  TextureInstance t;
  t.low_rank = 0.5 * Matrix::Ones(n, n) + 0.5 * u * u.transpose();
  t.sparse = Matrix::Zero(n, n);
  CounterRng rng(seed);
  const auto total = static_cast<std::ptrdiff_t>(n) * n;
  const auto count = static_cast<std::ptrdiff_t>(std::lround(fraction * static_cast<double>(total)));
  for (std::ptrdiff_t idx : rng.choose(total, count))
    t.sparse.data()[idx] = rng.uniform() < 0.5 ? -magnitude : magnitude;
  return t;
}

struct TextureReport {
  Matrix low_rank;
  Matrix sparse;
  SolveResult solve;
};

inline double default_texture_lambda(const Matrix& image) {
  return 1.0 / std::sqrt(static_cast<double>(std::max<std::ptrdiff_t>(1, std::max(image.rows(), image.cols()))));
}

/// min ||L||_S1 + lambda ||S||_1 s.t. L + S = image.
inline TextureReport demo_texture(const Matrix& image, double lambda,
                                  const SolverOptions& opts = default_demo_options()) {
  if (image.rows() > 512 || image.cols() > 512)
    throw InvalidArgument("texture: image larger than 512 x 512");
  if (image.size() == 0) throw InvalidArgument("texture: empty image");
  const auto m = image.rows(), n = image.cols();
  const auto problem = DemixProblem::superposition(
      image, {Component{GaugeSpec::matrix(GaugeKind::Schatten1, m, n), 1.0, std::nullopt},
              Component{GaugeSpec::matrix(GaugeKind::L1, m, n), lambda, std::nullopt}});
  TextureReport rep;
  rep.solve = admm_demix(problem, opts);
  rep.low_rank = rep.solve.components[0];
  rep.sparse = rep.solve.components[1];
  return rep;
}

// ---------------------------------------------------------------- DOA

struct BearingRow {
  std::string method;  // "raw" or "demixed"
  double theta_true = 0.0;
  double theta_est = 0.0;
  double error_deg = 0.0;
};

struct DoaReport {
  DoaData data;
  CovarianceSplit split;
  std::vector<double> raw_spectrum;
  std::vector<double> demixed_spectrum;
  std::vector<BearingRow> rows;

  std::vector<double> errors(const std::string& method) const {
    std::vector<double> e;
    for (const auto& r : rows)
      if (r.method == method) e.push_back(r.error_deg);
    return e;
  }
};

inline SolverOptions default_doa_options() {
  return SolverOptions{.rho = 1.0, .max_iter = 5000, .primal_tol = 1e-6, .dual_tol = 1e-6,
                       .seed = 0, .adaptive_rho = false};
}

inline constexpr double kDefaultDoaLambda = 3.0;

/// Estimates are matched to the true bearings in sorted order.
inline std::vector<BearingRow> bearing_rows(const std::string& method, std::vector<double> truth,
                                            const std::vector<double>& estimates) {
  std::sort(truth.begin(), truth.end());
  std::vector<BearingRow> rows;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    // A spectrum with fewer than r local maxima reuses the last peak (or broadside).
    const double est = j < estimates.size() ? estimates[j] : estimates.empty() ? 0.0 : estimates.back();
    rows.push_back({method, truth[j], est, std::abs(est - truth[j])});
  }
  return rows;
}

inline DoaReport demo_doa(const DoaScenario& scenario, double lambda = kDefaultDoaLambda,
                          const SolverOptions& opts = default_doa_options()) {
  DoaReport rep;
  rep.data = simulate_doa(scenario);
  rep.split = demix_covariance(rep.data.covariance, lambda, opts);
  const auto grid = music_grid();
  rep.raw_spectrum = music_pseudospectrum(rep.data.covariance, scenario.r, grid);
  rep.demixed_spectrum = music_pseudospectrum(rep.split.low_rank, scenario.r, grid);
  rep.rows = bearing_rows("raw", scenario.bearings_deg, music_peaks(rep.raw_spectrum, grid, scenario.r));
  auto dem = bearing_rows("demixed", scenario.bearings_deg,
                          music_peaks(rep.demixed_spectrum, grid, scenario.r));
  rep.rows.insert(rep.rows.end(), dem.begin(), dem.end());
  return rep;
}

struct ErrorSummary {
  double median = 0.0;
  double fraction_above = 0.0;  // fraction of errors > threshold
};

inline ErrorSummary summarize_errors(std::vector<double> e, double threshold = 3.0) {
  if (e.empty()) return {};
  std::sort(e.begin(), e.end());
  const std::size_t n = e.size();
  ErrorSummary s;
  s.median = n % 2 ? e[n / 2] : 0.5 * (e[n / 2 - 1] + e[n / 2]);
  s.fraction_above =
      static_cast<double>(std::count_if(e.begin(), e.end(), [&](double v) { return v > threshold; })) /
      static_cast<double>(n);
  return s;
}

// ---------------------------------------------------------------- blind deconvolution

struct BlindDeconvReport {
  Vector x0, y0, z0;
  Matrix x_hat;
  Vector x_est, y_est;  // top singular pair, split as sqrt(sigma) u and sqrt(sigma) v
  double feasibility = 0.0;
  double objective = 0.0;
  double truth_objective = 0.0;
  SolveResult solve;
};

inline SolverOptions default_deconv_options() {
  return SolverOptions{.rho = 1.0, .max_iter = 50000, .primal_tol = 1e-9, .dual_tol = 1e-9,
                       .seed = 0, .adaptive_rho = false};
}

/// min ||X||_S1 s.t. C(X) = x0 * y0, where C sums the anti-diagonals.
inline BlindDeconvReport blind_deconv(const Vector& x0, const Vector& y0,
                                      const SolverOptions& opts = default_deconv_options()) {
  const auto m = x0.size(), d = y0.size();
  if (m < 1 || d < 1 || m > 32 || d > 32) throw InvalidArgument("blind_deconv: need 1 <= m, d <= 32");
  BlindDeconvReport rep;
  rep.x0 = x0;
  rep.y0 = y0;
  rep.z0 = convolve(x0, y0);
  const LinearOp lift = LinearOp::conv_lift(m, d);
  DemixProblem problem{rep.z0, lift,
                       {Component{GaugeSpec::matrix(GaugeKind::Schatten1, m, d), 1.0, std::nullopt}},
                       std::nullopt};
  rep.solve = decomposition_demix(problem, opts);
  rep.x_hat = rep.solve.components[0];
  rep.feasibility = (lift.apply(rep.x_hat) - rep.z0).norm();
  rep.objective = rep.solve.objective;
  rep.truth_objective = gauge_eval(GaugeSpec::matrix(GaugeKind::Schatten1, m, d),
                                   Matrix(x0 * y0.transpose()))
                            .value();
  const auto svd = detail::checked_svd(rep.x_hat);
  const double s = std::sqrt(svd.singularValues()(0));
  rep.x_est = s * svd.matrixU().col(0);
  rep.y_est = s * svd.matrixV().col(0);
  return rep;
}

inline BlindDeconvReport demo_blind_deconv(int m, int d, std::uint64_t seed,
                                           const SolverOptions& opts = default_deconv_options()) {
  CounterRng rng(seed);
  const Vector x0 = rng.gaussian_vector(m);
  const Vector y0 = rng.gaussian_vector(d);
  return blind_deconv(x0, y0, opts);
}

}  // namespace demixkit
