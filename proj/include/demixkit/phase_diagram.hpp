#pragma once

// Empirical phase transition for demixing a sparse vector from a sparse
// vector in a randomly rotated basis, compared against the statistical
// dimension prediction.

#include "demixkit/geometry.hpp"
#include "demixkit/operators.hpp"
#include "demixkit/parallel.hpp"
#include "demixkit/solvers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace demixkit {

/// 9 log-spaced values 10^-2 ... 10^2.
inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = -4; i <= 4; ++i) g.push_back(std::pow(10.0, 0.5 * i));
  return g;
}

/// {1, step, 2 step, ..., d} with step = d / 16: a 17-point axis.
inline std::vector<int> default_sparsity_axis(int d) {
  std::vector<int> axis{1};
  const int step = std::max(1, d / 16);
  for (int s = step; s <= d; s += step)
    if (s != 1) axis.push_back(s);
  return axis;
}

struct PhaseGridSpec {
  int d = 64;
  std::vector<int> sx_axis;  // grid = sx_axis x sy_axis
  std::vector<int> sy_axis;
  int trials_per_cell = 25;
  std::vector<double> lambda_grid = default_lambda_grid();
  double success_tol = 1e-3;
  std::uint64_t seed = 0;
  SolverOptions solver{.rho = 1.0, .max_iter = 3000, .primal_tol = 1e-7, .dual_tol = 1e-7,
                       .seed = 0, .adaptive_rho = true};
  std::int64_t sdim_samples = 4000;

  static PhaseGridSpec square(int d, std::vector<int> axis) {
    PhaseGridSpec s;
    s.d = d;
    s.sx_axis = axis;
    s.sy_axis = std::move(axis);
    return s;
  }

  void validate() const {
    if (d < 1) throw InvalidArgument("phase grid: d must be positive");
    if (sx_axis.empty() || sy_axis.empty()) throw InvalidArgument("phase grid: empty sparsity axis");
    for (const auto* axis : {&sx_axis, &sy_axis})
      for (int s : *axis)
        if (s < 1 || s > d) throw InvalidArgument("phase grid: sparsity must lie in [1, d]");
    if (trials_per_cell < 1) throw InvalidArgument("phase grid: trials_per_cell must be >= 1");
    if (lambda_grid.empty()) throw InvalidArgument("phase grid: lambda grid is empty");
    for (double l : lambda_grid)
      if (!(l > 0.0)) throw InvalidArgument("phase grid: lambda values must be positive");
    if (!(success_tol > 0.0)) throw InvalidArgument("phase grid: success_tol must be positive");
    solver.validate();
  }
};

struct PhaseCell {
  int s_x = 0;
  int s_y = 0;
  int successes = 0;
  int trials = 0;
  int solver_failures = 0;  // diverged solves, counted as failed trials
  double success_rate = 0.0;
  double delta = 0.0;
};

using Polyline = std::vector<std::array<double, 2>>;

struct Contour {
  double level = 0.0;
  // Coordinates are in sparsity units (s_x, s_y).
  std::vector<Polyline> lines;
};

struct PhaseGridResult {
  std::vector<int> sx_axis;
  std::vector<int> sy_axis;
  std::vector<PhaseCell> cells;  // row-major over (sy index, sx index)
  std::vector<Contour> contours;
  std::map<int, double> sdim;  // sparsity -> estimated statistical dimension
  int d = 0;

  const PhaseCell& at(std::size_t ix, std::size_t iy) const { return cells[iy * sx_axis.size() + ix]; }
};

struct TrialInstance {
  Vector x0;
  Vector y0;
  LinearOp rotation;  // y0 = rotation^T * (sparse vector)
};

/// Ground truth for one trial: x0 is s_x-sparse, Q y0 is s_y-sparse, both with
/// standard Gaussian nonzeros on uniform supports.
inline TrialInstance draw_rotated_pair(int d, int s_x, int s_y, std::uint64_t trial_seed) {
  CounterRng rng(trial_seed);
  Vector x0 = rng.sparse_gaussian(d, s_x);
  const Vector coeffs = rng.sparse_gaussian(d, s_y);
  LinearOp q = LinearOp::random_rotation(d, rng.next_u64());
  Vector y0 = q.adjoint(coeffs);
  return {std::move(x0), std::move(y0), std::move(q)};
}

inline DemixProblem rotated_l1_problem(const TrialInstance& t, double lambda) {
  const auto d = t.x0.size();
  return DemixProblem::superposition(
      t.x0 + t.y0, {Component{GaugeSpec::vector(GaugeKind::L1, d), 1.0, std::nullopt},
                    Component{GaugeSpec::vector(GaugeKind::L1, d), lambda, t.rotation}});
}

/// Sweep order: lambda closest to 1 first. Success is "any lambda", so the
/// order only changes running time.
inline std::vector<double> sweep_order(std::vector<double> grid) {
  std::stable_sort(grid.begin(), grid.end(), [](double a, double b) {
    return std::abs(std::log(a)) < std::abs(std::log(b));
  });
  return grid;
}

inline bool run_trial(const PhaseGridSpec& spec, const TrialInstance& t, int* diverged = nullptr) {
  for (double lambda : sweep_order(spec.lambda_grid)) {
    const SolveResult r = admm_demix(rotated_l1_problem(t, lambda), spec.solver);
    if (r.status == SolveStatus::Diverged) {
      if (diverged) ++*diverged;
      continue;
    }
    if (relative_error(r.components[0], t.x0) <= spec.success_tol) return true;
  }
  return false;
}

inline std::uint64_t cell_trial_seed(std::uint64_t seed, int s_x, int s_y, int trial) {
  return derive_seed(seed, {static_cast<std::uint64_t>(s_x), static_cast<std::uint64_t>(s_y),
                            static_cast<std::uint64_t>(trial)});
}

namespace detail {

// Marching squares over the cell-centre lattice. `value(ix, iy)` gives the
// field; segments come back in fractional index coordinates.
template <class F>
std::vector<Polyline> field_contour(std::size_t nx, std::size_t ny, F&& value, double level) {
  std::vector<Polyline> lines;
  auto frac = [&](double va, double vb) { return vb == va ? 0.5 : (level - va) / (vb - va); };
  for (std::size_t iy = 0; iy + 1 < ny; ++iy) {
    for (std::size_t ix = 0; ix + 1 < nx; ++ix) {
      const double x0 = static_cast<double>(ix), y0 = static_cast<double>(iy);
      const double v00 = value(ix, iy), v10 = value(ix + 1, iy);
      const double v01 = value(ix, iy + 1), v11 = value(ix + 1, iy + 1);
      Polyline pts;
      if ((v00 >= level) != (v10 >= level)) pts.push_back({x0 + frac(v00, v10), y0});
      if ((v10 >= level) != (v11 >= level)) pts.push_back({x0 + 1.0, y0 + frac(v10, v11)});
      if ((v01 >= level) != (v11 >= level)) pts.push_back({x0 + frac(v01, v11), y0 + 1.0});
      if ((v00 >= level) != (v01 >= level)) pts.push_back({x0, y0 + frac(v00, v01)});
      for (std::size_t k = 0; k + 1 < pts.size(); k += 2) lines.push_back({pts[k], pts[k + 1]});
    }
  }
  return lines;
}

// Fractional index -> axis value by linear interpolation between grid points.
inline double index_to_axis(const std::vector<int>& axis, double t) {
  if (axis.size() == 1) return axis[0];
  const auto i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(t))), axis.size() - 2);
  const double f = t - static_cast<double>(i);
  return axis[i] + f * (axis[i + 1] - axis[i]);
}

inline Contour contour_at(const PhaseGridResult& g, double level) {
  Contour c{level, field_contour(g.sx_axis.size(), g.sy_axis.size(),
                                 [&](std::size_t ix, std::size_t iy) { return g.at(ix, iy).success_rate; },
                                 level)};
  for (auto& line : c.lines)
    for (auto& p : line) p = {index_to_axis(g.sx_axis, p[0]), index_to_axis(g.sy_axis, p[1])};
  return c;
}

}  // namespace detail

/// Statistical dimension of the l1 descent cone at every sparsity on the axes.
inline std::map<int, double> sdim_table(int d, const std::vector<int>& sparsities,
                                        std::int64_t samples, std::uint64_t seed,
                                        unsigned threads = 1) {
  std::map<int, double> table;
  for (int s : sparsities) {
    if (table.count(s)) continue;
    const auto est = sdim_monte_carlo(ConeModel::descent_l1_sparsity(d, s), samples,
                                      derive_seed(seed, {0x5d1aULL, static_cast<std::uint64_t>(s)}),
                                      threads);
    table[s] = est.mean;
  }
  return table;
}

inline PhaseGridResult run_phase_diagram(const PhaseGridSpec& spec, unsigned threads = 1) {
  spec.validate();
  PhaseGridResult res;
  res.d = spec.d;
  res.sx_axis = spec.sx_axis;
  res.sy_axis = spec.sy_axis;

  std::vector<int> all = spec.sx_axis;
  all.insert(all.end(), spec.sy_axis.begin(), spec.sy_axis.end());
  res.sdim = sdim_table(spec.d, all, spec.sdim_samples, spec.seed, threads);

  const std::size_t nx = spec.sx_axis.size(), ny = spec.sy_axis.size();
  res.cells.resize(nx * ny);
  parallel_for(nx * ny, threads, [&](std::size_t idx) {
    const int sx = spec.sx_axis[idx % nx];
    const int sy = spec.sy_axis[idx / nx];
    PhaseCell cell{.s_x = sx, .s_y = sy, .trials = spec.trials_per_cell};
    for (int t = 0; t < spec.trials_per_cell; ++t) {
      const auto inst = draw_rotated_pair(spec.d, sx, sy, cell_trial_seed(spec.seed, sx, sy, t));
      if (run_trial(spec, inst, &cell.solver_failures)) ++cell.successes;
    }
    cell.success_rate = static_cast<double>(cell.successes) / spec.trials_per_cell;
    const std::array<double, 2> deltas{res.sdim.at(sx), res.sdim.at(sy)};
    cell.delta = total_delta(spec.d, deltas);
    res.cells[idx] = cell;
  });

  for (double level : {0.05, 0.5, 0.95}) res.contours.push_back(detail::contour_at(res, level));
  return res;
}

/// Delta interpolated at every place the success rate crosses `level` between
/// horizontally or vertically adjacent cells.
inline std::vector<double> crossing_deltas(const PhaseGridResult& g, double level = 0.5) {
  std::vector<double> out;
  auto visit = [&](const PhaseCell& a, const PhaseCell& b) {
    if ((a.success_rate >= level) == (b.success_rate >= level)) return;
    const double t = (level - a.success_rate) / (b.success_rate - a.success_rate);
    out.push_back(a.delta + t * (b.delta - a.delta));
  };
  for (std::size_t iy = 0; iy < g.sy_axis.size(); ++iy)
    for (std::size_t ix = 0; ix + 1 < g.sx_axis.size(); ++ix) visit(g.at(ix, iy), g.at(ix + 1, iy));
  for (std::size_t ix = 0; ix < g.sx_axis.size(); ++ix)
    for (std::size_t iy = 0; iy + 1 < g.sy_axis.size(); ++iy) visit(g.at(ix, iy), g.at(ix, iy + 1));
  return out;
}

}  // namespace demixkit
