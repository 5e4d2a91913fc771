#pragma once

// Solvers for the demixing programs
//
//   minimize   sum_i w_i ||x_i||_{A_i}  (+ lambda_E ||E||_F^2)
//   subject to Phi(x_1 + ... + x_k) (+ E) = z0
//
// admm_demix handles the two-block identity-measurement case by alternating
// proximal steps. decomposition_demix runs the predictor/corrector proximal
// decomposition, which handles any Phi and any number of blocks because every
// block update reads the same predicted multiplier.

#include "demixkit/atoms.hpp"
#include "demixkit/core.hpp"
#include "demixkit/operators.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace demixkit {

/// One structured component: weight * gauge(D x), where D is an optional
/// orthogonal dictionary.
struct Component {
  GaugeSpec gauge;
  double weight = 1.0;
  std::optional<LinearOp> dictionary;

  Shape signal_shape() const { return dictionary ? dictionary->input_shape() : gauge.shape(); }

  Signal analyze(const Signal& x) const { return dictionary ? dictionary->apply(x) : x; }
  Signal synthesize(const Signal& c) const { return dictionary ? dictionary->adjoint(c) : c; }

  /// prox of weight * gauge(D .) with step `step`; exact because D is orthogonal.
  Signal prox(const Signal& v, double step) const {
    if (!dictionary) return demixkit::prox(gauge, v, weight * step);
    return dictionary->adjoint(demixkit::prox(gauge, dictionary->apply(v), weight * step));
  }

  ExtendedReal value(const Signal& x) const { return weight * gauge_eval(gauge, analyze(x)); }
};

struct DemixProblem {
  Signal observation;
  LinearOp measurement;
  std::vector<Component> components;
  std::optional<double> quadratic_slack;

  /// Identity measurement sized to the observation.
  static DemixProblem superposition(Signal z0, std::vector<Component> comps) {
    const Shape s = Shape::of(z0);
    return {std::move(z0), LinearOp::identity(s), std::move(comps), std::nullopt};
  }

  void validate() const {
    // A lone component is a plain recovery problem; it only makes sense when a
    // slack term or a non-identity measurement is present.
    const bool lone_ok = quadratic_slack || measurement.kind() != OpKind::Identity;
    const std::size_t need = lone_ok ? 1 : 2;
    if (components.size() < need) {
      throw InvalidArgument("demixing problem needs at least " + std::to_string(need) +
                            " component(s), got " + std::to_string(components.size()));
    }
    if (quadratic_slack && !(*quadratic_slack > 0.0))
      throw InvalidArgument("quadratic slack weight must be positive");
    require_shape(observation, measurement.output_shape(), "observation");
    for (std::size_t i = 0; i < components.size(); ++i) {
      const auto& c = components[i];
      const std::string tag = "component " + std::to_string(i);
      if (!(c.weight > 0.0)) throw InvalidArgument(tag + ": weight must be positive");
      if (c.dictionary) {
        if (!c.dictionary->is_orthogonal())
          throw InvalidArgument(tag + ": dictionary must be orthogonal");
        if (c.dictionary->output_shape() != c.gauge.shape())
          throw InvalidArgument(tag + ": dictionary output does not match the gauge shape");
      }
      if (c.signal_shape() != measurement.input_shape())
        throw InvalidArgument(tag + ": shape " + to_string(c.signal_shape()) +
                              " does not match the measurement input " +
                              to_string(measurement.input_shape()));
    }
  }
};

struct SolverOptions {
  double rho = 1.0;
  int max_iter = 5000;
  double primal_tol = 1e-8;
  double dual_tol = 1e-8;
  std::uint64_t seed = 0;
  // Residual balancing: halve/double rho when the residuals differ by 10x (ADMM only).
  bool adaptive_rho = false;

  void validate() const {
    if (!(rho > 0.0)) throw InvalidArgument("solver option rho must be positive");
    if (max_iter < 1) throw InvalidArgument("solver option max_iter must be >= 1");
    if (!(primal_tol > 0.0) || !(dual_tol > 0.0))
      throw InvalidArgument("solver tolerances must be positive");
  }
};

enum class SolveStatus { Converged, MaxIter, Diverged };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::Diverged: return "diverged";
  }
  return "?";
}

struct SolveResult {
  // One entry per problem component, followed by E when the slack is present.
  std::vector<Signal> components;
  Signal dual;
  int iterations = 0;
  std::vector<double> primal_residual;
  std::vector<double> dual_residual;
  double objective = 0.0;
  double rho = 0.0;  // final rho (after clamping / balancing)
  SolveStatus status = SolveStatus::MaxIter;
};

inline double relative_error(const Signal& estimate, const Signal& truth) {
  const double n = truth.norm();
  const double diff = (estimate - truth).norm();
  return n > 0.0 ? diff / n : diff;
}

namespace detail {

inline double problem_objective(const DemixProblem& p, const std::vector<Signal>& xs) {
  ExtendedReal total(0.0);
  for (std::size_t i = 0; i < p.components.size(); ++i) total = total + p.components[i].value(xs[i]);
  if (p.quadratic_slack) total = total + ExtendedReal(*p.quadratic_slack * xs.back().squaredNorm());
  return total.as_double();
}

}  // namespace detail

/// Two-block ADMM on the augmented Lagrangian
///   L(x, y, w) = f(x) + g(y) + <w, x + y - z0> + 1/(2 rho) ||x + y - z0||^2.
inline SolveResult admm_demix(const DemixProblem& problem, const SolverOptions& opts) {
  problem.validate();
  opts.validate();
  if (problem.measurement.kind() != OpKind::Identity)
    throw InvalidArgument("admm_demix requires an identity measurement; use decomposition_demix");
  if (problem.components.size() != 2 || problem.quadratic_slack)
    throw InvalidArgument("admm_demix takes exactly two components and no slack term");

  const Signal& z0 = problem.observation;
  const Component& cx = problem.components[0];
  const Component& cy = problem.components[1];
  const double z_scale = std::max(1.0, z0.norm());

  Signal x = Signal::Zero(z0.rows(), z0.cols());
  Signal y = x;
  Signal w = x;
  double rho = opts.rho;

  SolveResult res;
  res.status = SolveStatus::MaxIter;
  for (int k = 1; k <= opts.max_iter; ++k) {
    const Signal x_new = cx.prox(z0 - y - rho * w, rho);
    const Signal y_new = cy.prox(z0 - x_new - rho * w, rho);
    const Signal r = x_new + y_new - z0;
    w += r / rho;

    const double primal = r.norm();
    const double dy = (y_new - y).norm();
    const double change = std::sqrt((x_new - x).squaredNorm() + dy * dy);
    const double dual = dy / rho;
    x = x_new;
    y = y_new;
    res.iterations = k;
    res.primal_residual.push_back(primal);
    res.dual_residual.push_back(dual);

    if (!std::isfinite(primal) || !std::isfinite(change) || !all_finite(w)) {
      res.status = SolveStatus::Diverged;
      break;
    }
    if (primal <= opts.primal_tol * z_scale &&
        change <= opts.dual_tol * std::max(1.0, x.norm() + y.norm())) {
      res.status = SolveStatus::Converged;
      break;
    }
    if (opts.adaptive_rho) {
      if (primal > 10.0 * dual) rho *= 0.5;
      else if (dual > 10.0 * primal) rho *= 2.0;
    }
  }

  res.components = {x, y};
  res.dual = w;
  res.rho = rho;
  res.objective = res.status == SolveStatus::Diverged
                      ? std::numeric_limits<double>::quiet_NaN()
                      : detail::problem_objective(problem, res.components);
  return res;
}

/// Largest step for which the predictor/corrector decomposition is stable:
/// rho < 1 / ||[Phi ... Phi (I)]||, with the norm computed exactly as
/// sqrt(k ||Phi||^2 + [slack]).
inline double decomposition_step_limit(const DemixProblem& problem) {
  const double phi = problem.measurement.norm();
  const double k = static_cast<double>(problem.components.size());
  const double coupling = std::sqrt(k * phi * phi + (problem.quadratic_slack ? 1.0 : 0.0));
  return coupling > 0.0 ? 1.0 / coupling : 1.0;
}

inline SolveResult decomposition_demix(const DemixProblem& problem, const SolverOptions& opts) {
  problem.validate();
  opts.validate();

  const LinearOp& phi = problem.measurement;
  const Signal& z0 = problem.observation;
  const std::size_t k = problem.components.size();
  const bool slack = problem.quadratic_slack.has_value();
  const double lambda_e = slack ? *problem.quadratic_slack : 0.0;
  const double rho = std::min(opts.rho, 0.95 * decomposition_step_limit(problem));
  const double z_scale = std::max(1.0, z0.norm());
  const Shape in = phi.input_shape();

  std::vector<Signal> xs(k, Signal::Zero(in.rows, in.cols));
  Signal e = Signal::Zero(z0.rows(), z0.cols());
  Signal w = e;

  auto residual = [&](const std::vector<Signal>& comps, const Signal& slack_term) {
    Signal sum = Signal::Zero(in.rows, in.cols);
    for (const auto& c : comps) sum += c;
    Signal r = phi.apply(sum) - z0;
    if (slack) r += slack_term;
    return r;
  };

  SolveResult res;
  res.status = SolveStatus::MaxIter;
  Signal r = residual(xs, e);
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Signal v = w + rho * r;
    const Signal grad = phi.adjoint(v);

    // Every block reads the same v, so the updates are order independent.
    std::vector<Signal> xs_new(k);
    double change_sq = 0.0;
    double size = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      xs_new[i] = problem.components[i].prox(xs[i] - rho * grad, rho);
      change_sq += (xs_new[i] - xs[i]).squaredNorm();
      size += xs_new[i].norm();
    }
    Signal e_new = e;
    if (slack) {
      e_new = (e - rho * v) / (1.0 + 2.0 * lambda_e * rho);
      change_sq += (e_new - e).squaredNorm();
      size += e_new.norm();
    }

    r = residual(xs_new, e_new);
    w += rho * r;
    xs = std::move(xs_new);
    e = std::move(e_new);

    const double primal = r.norm();
    const double change = std::sqrt(change_sq);
    res.iterations = it;
    res.primal_residual.push_back(primal);
    res.dual_residual.push_back(change / rho);

    if (!std::isfinite(primal) || !std::isfinite(change) || !all_finite(w)) {
      res.status = SolveStatus::Diverged;
      break;
    }
    if (primal <= opts.primal_tol * z_scale && change <= opts.dual_tol * std::max(1.0, size)) {
      res.status = SolveStatus::Converged;
      break;
    }
  }

  res.components = std::move(xs);
  if (slack) res.components.push_back(e);
  res.dual = w;
  res.rho = rho;
  res.objective = res.status == SolveStatus::Diverged
                      ? std::numeric_limits<double>::quiet_NaN()
                      : detail::problem_objective(problem, res.components);
  return res;
}

/// Routes two-block identity problems to ADMM and everything else to the
/// decomposition method.
inline SolveResult solve(const DemixProblem& problem, const SolverOptions& opts) {
  if (problem.measurement.kind() == OpKind::Identity && problem.components.size() == 2 &&
      !problem.quadratic_slack)
    return admm_demix(problem, opts);
  return decomposition_demix(problem, opts);
}

struct KktCertificate {
  std::vector<double> component_violation;  // includes the slack block when present
  double feasibility_gap = 0.0;

  double max_violation() const {
    double v = 0.0;
    for (double c : component_violation) v = std::max(v, c);
    return v;
  }
};

/// First-order optimality: -Phi^T w must lie in w_i * subdiff ||x_i||_{A_i} for
/// every block, and w = -2 lambda_E E for the slack.
inline KktCertificate kkt_check(const DemixProblem& problem, const SolveResult& result,
                                double support_tol = 1e-7) {
  problem.validate();
  const std::size_t k = problem.components.size();
  const std::size_t expected = k + (problem.quadratic_slack ? 1 : 0);
  if (result.components.size() != expected)
    throw InvalidArgument("kkt_check: result has " + std::to_string(result.components.size()) +
                          " components, problem needs " + std::to_string(expected));
  require_shape(result.dual, problem.measurement.output_shape(), "kkt_check dual");

  KktCertificate cert;
  const Signal q = -problem.measurement.adjoint(result.dual);
  Signal sum = Signal::Zero(q.rows(), q.cols());
  for (std::size_t i = 0; i < k; ++i) {
    const Component& c = problem.components[i];
    require_shape(result.components[i], c.signal_shape(), "kkt_check component");
    sum += result.components[i];
    cert.component_violation.push_back(subgradient_violation(
        c.gauge, c.analyze(result.components[i]), c.analyze(q), c.weight, support_tol));
  }
  Signal r = problem.measurement.apply(sum) - problem.observation;
  if (problem.quadratic_slack) {
    const Signal& e = result.components.back();
    r += e;
    cert.component_violation.push_back(
        (result.dual + 2.0 * *problem.quadratic_slack * e).cwiseAbs().maxCoeff());
  }
  cert.feasibility_gap = r.norm();
  return cert;
}

struct L0Solution {
  Vector x;
  Vector y;
  double objective = 0.0;
};

inline constexpr std::ptrdiff_t kL0MaxDimension = 16;

namespace detail {

// Calls f(subset) for every k-subset of {0..n-1} in lexicographic order;
// stops early when f returns true.
template <class F>
bool for_each_subset(std::ptrdiff_t n, std::ptrdiff_t k, F&& f) {
  std::vector<std::ptrdiff_t> idx(static_cast<std::size_t>(k));
  for (std::ptrdiff_t i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    if (f(idx)) return true;
    std::ptrdiff_t i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return false;
    ++idx[static_cast<std::size_t>(i)];
    for (std::ptrdiff_t j = i + 1; j < k; ++j)
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace detail

/// Exact minimizer of ||x||_0 + lambda ||D y||_0 subject to x + y = z0, by
/// enumerating support-size pairs in order of increasing cost. For each pair
/// of supports (S for x, T for c = D y) the constraint restricted to the
/// complement of S is solved by least squares; a zero residual means the pair
/// is feasible.
inline L0Solution l0_oracle(const Vector& z0, const LinearOp& dict_y, double lambda,
                            double feas_tol = 1e-9) {
  const std::ptrdiff_t d = z0.size();
  if (d > kL0MaxDimension)
    throw InvalidArgument("l0_oracle: dimension " + std::to_string(d) + " exceeds the limit of " +
                          std::to_string(kL0MaxDimension));
  if (!(lambda > 0.0)) throw InvalidArgument("l0_oracle: lambda must be positive");
  if (dict_y.input_shape() != Shape::vector(d) || dict_y.output_shape() != Shape::vector(d))
    throw InvalidArgument("l0_oracle: dictionary must be square of size d");

  // Synthesis matrix B = D^{-1}: y = B c.
  Matrix dmat(d, d);
  for (std::ptrdiff_t j = 0; j < d; ++j) dmat.col(j) = dict_y.apply(Vector::Unit(d, j));
  Eigen::FullPivLU<Matrix> lu(dmat);
  if (!lu.isInvertible()) throw InvalidArgument("l0_oracle: dictionary is not invertible");
  const Matrix synth = lu.inverse();
  const double tol = feas_tol * std::max(1.0, z0.norm());

  struct Pair {
    std::ptrdiff_t a, b;
    double cost;
  };
  std::vector<Pair> pairs;
  for (std::ptrdiff_t a = 0; a <= d; ++a)
    for (std::ptrdiff_t b = 0; b <= d; ++b)
      pairs.push_back({a, b, static_cast<double>(a) + lambda * static_cast<double>(b)});
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& p, const Pair& q) { return p.cost < q.cost; });

  L0Solution best;
  for (const auto& [a, b, cost] : pairs) {
    bool found = detail::for_each_subset(d, a, [&](const std::vector<std::ptrdiff_t>& s) {
      std::vector<bool> in_s(static_cast<std::size_t>(d), false);
      for (auto i : s) in_s[static_cast<std::size_t>(i)] = true;
      std::vector<std::ptrdiff_t> rows;
      for (std::ptrdiff_t i = 0; i < d; ++i)
        if (!in_s[static_cast<std::size_t>(i)]) rows.push_back(i);
      const auto nr = static_cast<std::ptrdiff_t>(rows.size());
      Vector rhs(nr);
      for (std::ptrdiff_t i = 0; i < nr; ++i) rhs(i) = z0(rows[static_cast<std::size_t>(i)]);

      if (b == 0) {
        if (rhs.size() > 0 && rhs.cwiseAbs().maxCoeff() > tol) return false;
        best.x = Vector::Zero(d);
        for (auto i : s) best.x(i) = z0(i);
        best.y = Vector::Zero(d);
        best.objective = cost;
        return true;
      }
      return detail::for_each_subset(d, b, [&](const std::vector<std::ptrdiff_t>& t) {
        Vector c_t = Vector::Zero(b);
        if (nr > 0) {
          Matrix sub(nr, b);
          for (std::ptrdiff_t i = 0; i < nr; ++i)
            for (std::ptrdiff_t j = 0; j < b; ++j)
              sub(i, j) = synth(rows[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)]);
          c_t = sub.colPivHouseholderQr().solve(rhs);
          if ((sub * c_t - rhs).norm() > tol) return false;
        }
        // A coefficient that vanishes means a cheaper pair already covers this one.
        if (b > 0 && c_t.cwiseAbs().minCoeff() <= tol) return false;
        Vector c = Vector::Zero(d);
        for (std::ptrdiff_t j = 0; j < b; ++j) c(t[static_cast<std::size_t>(j)]) = c_t(j);
        best.y = synth * c;
        best.x = Vector::Zero(d);
        for (auto i : s) best.x(i) = z0(i) - best.y(i);
        best.objective = cost;
        return true;
      });
    });
    if (found) return best;
  }
  throw NumericalError("l0_oracle: no feasible support pair found");
}

}  // namespace demixkit
