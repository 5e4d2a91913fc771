#include "demixkit/solvers.hpp"

#include "../support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace demixkit;
using testing_support::max_abs_diff;
using testing_support::vec;

namespace {

Component l1(std::ptrdiff_t d, double w = 1.0, std::optional<LinearOp> dict = std::nullopt) {
  return Component{GaugeSpec::vector(GaugeKind::L1, d), w, std::move(dict)};
}

SolverOptions tight(int max_iter = 20000) {
  return SolverOptions{.rho = 1.0, .max_iter = max_iter, .primal_tol = 1e-11, .dual_tol = 1e-11,
                       .seed = 0, .adaptive_rho = false};
}

struct Instance {
  Vector x0, y0;
  LinearOp dict;
};

Instance spike_plus_dct(int d, int s_spike, int s_dct, std::uint64_t seed) {
  CounterRng rng(seed);
  const LinearOp dct = LinearOp::dct(d);
  return {rng.sparse_gaussian(d, s_spike), dct.adjoint(rng.sparse_gaussian(d, s_dct)), dct};
}

}  // namespace

// ---------------------------------------------------------------- validation

TEST(DemixProblem, Validation) {
  const Vector z = Vector::Zero(4);
  EXPECT_THROW(DemixProblem::superposition(z, {l1(4)}).validate(), InvalidArgument);
  EXPECT_THROW(DemixProblem::superposition(z, {l1(4), l1(4, 0.0)}).validate(), InvalidArgument);
  EXPECT_THROW(DemixProblem::superposition(z, {l1(4), l1(3)}).validate(), InvalidArgument);
  DemixProblem with_slack{z, LinearOp::identity(Shape::vector(4)), {l1(4)}, 1.0};
  EXPECT_NO_THROW(with_slack.validate());
  with_slack.quadratic_slack = -1.0;
  EXPECT_THROW(with_slack.validate(), InvalidArgument);
  CounterRng rng(1);
  EXPECT_THROW(DemixProblem::superposition(z, {l1(4), l1(4, 1.0, LinearOp::dense(rng.gaussian_matrix(4, 4)))})
                   .validate(),
               InvalidArgument);
}

TEST(SolverOptions, Validation) {
  SolverOptions o;
  EXPECT_NO_THROW(o.validate());
  o.rho = 0.0;
  EXPECT_THROW(o.validate(), InvalidArgument);
  o = {};
  o.max_iter = 0;
  EXPECT_THROW(o.validate(), InvalidArgument);
  o = {};
  o.primal_tol = 0.0;
  EXPECT_THROW(o.validate(), InvalidArgument);
}

TEST(Admm, RejectsUnsupportedShapes) {
  const Vector z = Vector::Ones(4);
  auto p = DemixProblem::superposition(z, {l1(4), l1(4), l1(4)});
  EXPECT_THROW(admm_demix(p, SolverOptions{}), InvalidArgument);
  DemixProblem measured{Vector::Ones(2),
                        LinearOp::subsample_rows(Shape::vector(4), {true, false, true, false}),
                        {l1(4), l1(4)},
                        std::nullopt};
  EXPECT_THROW(admm_demix(measured, SolverOptions{}), InvalidArgument);
}

// ---------------------------------------------------------------- ADMM

TEST(Admm, ZeroObservation) {
  const auto p = DemixProblem::superposition(Vector::Zero(8), {l1(8), l1(8, 1.0, LinearOp::dct(8))});
  const auto r = admm_demix(p, SolverOptions{});
  EXPECT_EQ(r.status, SolveStatus::Converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(r.components[0], Signal(Vector::Zero(8)));
  EXPECT_EQ(r.components[1], Signal(Vector::Zero(8)));
}

TEST(Admm, SpikePlusSineD16) {
  const int d = 16;
  const LinearOp dct = LinearOp::dct(d);
  const Vector x0 = Vector::Unit(d, 3);
  const Vector y0 = dct.adjoint(Vector::Unit(d, 5));
  const auto p = DemixProblem::superposition(x0 + y0, {l1(d), l1(d, 1.0, dct)});
  const auto r = admm_demix(p, tight());
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_LE(relative_error(r.components[0], x0), 1e-4);
  EXPECT_LE(relative_error(r.components[1], y0), 1e-4);

  // Ground truth with the solver's multiplier passes the optimality test.
  SolveResult truth = r;
  truth.components = {x0, y0};
  EXPECT_LE(kkt_check(p, truth).max_violation(), 1e-6);
  EXPECT_LE(kkt_check(p, r).max_violation(), 1e-5);

  // The l0 oracle explains z0 with the same pair.
  const auto l0 = l0_oracle(x0 + y0, dct, 1.0);
  EXPECT_DOUBLE_EQ(l0.objective, 2.0);
  EXPECT_LT(max_abs_diff(l0.x, x0), 1e-9);
  EXPECT_LT(max_abs_diff(l0.y, y0), 1e-9);
}

TEST(Admm, TextureFourByFour) {
  Matrix l0 = Matrix::Ones(4, 4);
  Matrix s0 = Matrix::Zero(4, 4);
  s0(1, 2) = 3.0;
  const auto p = DemixProblem::superposition(
      l0 + s0, {Component{GaugeSpec::matrix(GaugeKind::Schatten1, 4, 4), 1.0, std::nullopt},
                Component{GaugeSpec::matrix(GaugeKind::L1, 4, 4), 0.5, std::nullopt}});
  const auto r = admm_demix(p, tight());
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_LE(relative_error(r.components[0], l0), 1e-4);
  EXPECT_LE(relative_error(r.components[1], s0), 1e-4);
  EXPECT_LE(kkt_check(p, r).max_violation(), 1e-5);
}

TEST(Admm, ConvergedRunMeetsStoppingRule) {
  const auto inst = spike_plus_dct(32, 3, 3, 5);
  const auto p = DemixProblem::superposition(inst.x0 + inst.y0, {l1(32), l1(32, 1.0, inst.dict)});
  const SolverOptions o{};
  const auto r = admm_demix(p, o);
  ASSERT_EQ(r.status, SolveStatus::Converged);
  const Signal resid = r.components[0] + r.components[1] - p.observation;
  EXPECT_LE(resid.norm(), o.primal_tol * std::max(1.0, p.observation.norm()));
  EXPECT_EQ(static_cast<int>(r.primal_residual.size()), r.iterations);
  for (double v : r.primal_residual) EXPECT_TRUE(std::isfinite(v));
}

TEST(Admm, ResidualSettlesOverFinalIterations) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = spike_plus_dct(32, 4, 4, seed);
    const auto p = DemixProblem::superposition(inst.x0 + inst.y0, {l1(32), l1(32, 1.0, inst.dict)});
    const auto r = admm_demix(p, tight());
    ASSERT_EQ(r.status, SolveStatus::Converged);
    const auto n = r.primal_residual.size();
    const auto start = n - std::max<std::size_t>(1, n / 5);
    EXPECT_LE(r.primal_residual.back(), r.primal_residual[start]);
  }
}

TEST(Admm, NonFiniteInputDiverges) {
  Vector z = Vector::Ones(4);
  z(2) = std::numeric_limits<double>::quiet_NaN();
  const auto r = admm_demix(DemixProblem::superposition(z, {l1(4), l1(4)}), SolverOptions{});
  EXPECT_EQ(r.status, SolveStatus::Diverged);
  EXPECT_EQ(r.iterations, 1);
}

TEST(Admm, Deterministic) {
  const auto inst = spike_plus_dct(32, 4, 4, 9);
  const auto p = DemixProblem::superposition(inst.x0 + inst.y0, {l1(32), l1(32, 0.7, inst.dict)});
  SolverOptions o;
  o.adaptive_rho = true;
  const auto a = admm_demix(p, o), b = admm_demix(p, o);
  EXPECT_EQ(a.components[0], b.components[0]);
  EXPECT_EQ(a.components[1], b.components[1]);
  EXPECT_EQ(a.primal_residual, b.primal_residual);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Admm, NeverWorseThanGroundTruth) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = spike_plus_dct(32, 6, 6, 100 + seed);
    const double lambda = 0.5 + static_cast<double>(seed % 4) * 0.5;
    const auto p = DemixProblem::superposition(inst.x0 + inst.y0, {l1(32), l1(32, lambda, inst.dict)});
    const auto r = admm_demix(p, tight());
    ASSERT_EQ(r.status, SolveStatus::Converged);
    const double truth = inst.x0.cwiseAbs().sum() + lambda * inst.dict.apply(inst.y0).cwiseAbs().sum();
    EXPECT_LE(r.objective, truth + 1e-6);
  }
}

TEST(Admm, AdaptiveRhoReachesSameSolution) {
  const auto inst = spike_plus_dct(32, 4, 4, 2);
  const auto p = DemixProblem::superposition(inst.x0 + inst.y0, {l1(32), l1(32, 1.0, inst.dict)});
  auto o = tight();
  const auto plain = admm_demix(p, o);
  o.adaptive_rho = true;
  o.rho = 50.0;
  const auto balanced = admm_demix(p, o);
  ASSERT_EQ(balanced.status, SolveStatus::Converged);
  EXPECT_LT(max_abs_diff(plain.components[0], balanced.components[0]), 1e-7);
}

// ---------------------------------------------------------------- decomposition

TEST(Decomposition, ZeroObservation) {
  const auto p = DemixProblem::superposition(Vector::Zero(8), {l1(8), l1(8), l1(8, 1.0, LinearOp::dct(8))});
  const auto r = decomposition_demix(p, SolverOptions{});
  EXPECT_EQ(r.status, SolveStatus::Converged);
  for (const auto& c : r.components) EXPECT_EQ(c, Signal(Vector::Zero(8)));
}

TEST(Decomposition, AgreesWithAdmm) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int d = 8 + static_cast<int>(seed % 3) * 8;
    CounterRng rng(derive_seed(31, {seed}));
    const LinearOp q = LinearOp::random_rotation(d, rng.next_u64());
    const Vector z0 = 2.0 * rng.gaussian_vector(d);
    const double lambda = 0.5 + rng.uniform();
    const auto p = DemixProblem::superposition(z0, {l1(d), l1(d, lambda, q)});
    const auto a = admm_demix(p, tight(50000));
    const auto b = decomposition_demix(p, tight(200000));
    ASSERT_EQ(a.status, SolveStatus::Converged) << seed;
    ASSERT_EQ(b.status, SolveStatus::Converged) << seed;
    for (int i = 0; i < 2; ++i) {
      const double scale = std::max(1.0, a.components[static_cast<std::size_t>(i)].norm());
      EXPECT_LE((a.components[static_cast<std::size_t>(i)] - b.components[static_cast<std::size_t>(i)]).norm() / scale,
                1e-4)
          << "seed " << seed << " component " << i;
    }
  }
}

TEST(Decomposition, StepIsClampedToStableRange) {
  const auto p = DemixProblem::superposition(Vector::Ones(4), {l1(4), l1(4)});
  EXPECT_NEAR(decomposition_step_limit(p), 1.0 / std::sqrt(2.0), 1e-15);
  const auto r = decomposition_demix(p, SolverOptions{.rho = 10.0});
  EXPECT_LE(r.rho, 0.95 / std::sqrt(2.0) + 1e-15);
}

TEST(Decomposition, ThreeComponents) {
  const int d = 16;
  const LinearOp dct = LinearOp::dct(d);
  const LinearOp rot = LinearOp::random_rotation(d, 2024);
  const Vector x0 = Vector::Unit(d, 2);
  const Vector y0 = dct.adjoint(Vector::Unit(d, 6));
  const Vector w0 = rot.adjoint(Vector::Unit(d, 11));
  const auto p = DemixProblem::superposition(x0 + y0 + w0, {l1(d), l1(d, 1.0, dct), l1(d, 1.0, rot)});
  const auto r = decomposition_demix(p, tight(200000));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_LE(relative_error(r.components[0], x0), 1e-3);
  EXPECT_LE(relative_error(r.components[1], y0), 1e-3);
  EXPECT_LE(relative_error(r.components[2], w0), 1e-3);
  EXPECT_LE(kkt_check(p, r).max_violation(), 1e-5);
  // solve() routes three blocks to the decomposition method.
  const auto routed = solve(p, tight(200000));
  EXPECT_EQ(routed.components[0], r.components[0]);
}

TEST(Decomposition, CompressiveMeasurement) {
  // Phi keeps 28 of 32 samples; a spike plus one DCT atom is still recovered.
  const int d = 32;
  std::vector<bool> mask(d, true);
  for (int i : {1, 9, 17, 30}) mask[static_cast<std::size_t>(i)] = false;
  const LinearOp phi = LinearOp::subsample_rows(Shape::vector(d), mask);
  const LinearOp dct = LinearOp::dct(d);
  const Vector x0 = 2.0 * Vector::Unit(d, 4);
  const Vector y0 = dct.adjoint(Vector::Unit(d, 3));
  DemixProblem p{phi.apply(x0 + y0), phi, {l1(d), l1(d, 1.0, dct)}, std::nullopt};
  const auto r = decomposition_demix(p, tight(200000));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_LE(relative_error(r.components[0], x0), 1e-4);
  EXPECT_LE(relative_error(r.components[1], y0), 1e-4);
  EXPECT_LE(kkt_check(p, r).max_violation(), 1e-5);
}

TEST(Decomposition, QuadraticSlackClosedForm) {
  // One l1 block plus slack, identity Phi: x = soft(z0, 1 / (2 lambda_E)), E = z0 - x.
  const Vector z0 = vec({3.0, -0.2, 0.8, -2.0});
  const double lam = 2.0;
  DemixProblem p{z0, LinearOp::identity(Shape::vector(4)), {l1(4)}, lam};
  const auto r = decomposition_demix(p, tight(200000));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  const Vector want = soft_threshold(z0, 1.0 / (2.0 * lam));
  EXPECT_LT(max_abs_diff(r.components[0], want), 1e-7);
  EXPECT_LT(max_abs_diff(r.components[1], z0 - want), 1e-7);
  EXPECT_LE(kkt_check(p, r).max_violation(), 1e-6);
}

TEST(Decomposition, Deterministic) {
  const auto inst = spike_plus_dct(16, 2, 2, 4);
  const auto p = DemixProblem::superposition(inst.x0 + inst.y0, {l1(16), l1(16, 1.0, inst.dict)});
  const auto a = decomposition_demix(p, SolverOptions{}), b = decomposition_demix(p, SolverOptions{});
  EXPECT_EQ(a.components[0], b.components[0]);
  EXPECT_EQ(a.dual, b.dual);
}

// ---------------------------------------------------------------- KKT

TEST(Kkt, HandBuiltOneDimensional) {
  const auto p = DemixProblem::superposition(vec({3.0}), {l1(1), l1(1, 2.0)});
  SolveResult r;
  r.components = {vec({3.0}), vec({0.0})};
  r.dual = vec({-1.0});
  const auto cert = kkt_check(p, r);
  EXPECT_EQ(cert.max_violation(), 0.0);
  EXPECT_EQ(cert.feasibility_gap, 0.0);

  r.components[0](0) += 0.1;
  EXPECT_NEAR(kkt_check(p, r).feasibility_gap, 0.1, 1e-15);
}

TEST(Kkt, ZeroProblem) {
  const auto p = DemixProblem::superposition(Vector::Zero(3), {l1(3), l1(3)});
  SolveResult r;
  r.components = {Vector::Zero(3), Vector::Zero(3)};
  r.dual = Vector::Zero(3);
  const auto cert = kkt_check(p, r);
  EXPECT_EQ(cert.max_violation(), 0.0);
  EXPECT_EQ(cert.feasibility_gap, 0.0);
}

TEST(Kkt, DetectsWrongMultiplier) {
  const auto p = DemixProblem::superposition(vec({3.0}), {l1(1), l1(1, 2.0)});
  SolveResult r;
  r.components = {vec({3.0}), vec({0.0})};
  r.dual = vec({-1.5});
  EXPECT_NEAR(kkt_check(p, r).max_violation(), 0.5, 1e-15);
}

TEST(Kkt, SchattenInfIsUnimplemented) {
  const auto p = DemixProblem::superposition(
      Matrix::Identity(2, 2), {Component{GaugeSpec::matrix(GaugeKind::SchattenInf, 2, 2), 1.0, std::nullopt},
                               Component{GaugeSpec::matrix(GaugeKind::L1, 2, 2), 1.0, std::nullopt}});
  SolveResult r;
  r.components = {Matrix::Identity(2, 2), Matrix::Zero(2, 2)};
  r.dual = Matrix::Zero(2, 2);
  EXPECT_THROW(kkt_check(p, r), Unimplemented);
}

TEST(Kkt, ComponentCountMismatch) {
  const auto p = DemixProblem::superposition(Vector::Zero(2), {l1(2), l1(2)});
  SolveResult r;
  r.components = {Vector::Zero(2)};
  r.dual = Vector::Zero(2);
  EXPECT_THROW(kkt_check(p, r), InvalidArgument);
}

// ---------------------------------------------------------------- l0 oracle

TEST(L0Oracle, Examples) {
  const LinearOp id = LinearOp::identity(Shape::vector(6));
  const auto single = l0_oracle(Vector::Unit(6, 0), LinearOp::dct(6), 1.0);
  EXPECT_DOUBLE_EQ(single.objective, 1.0);
  EXPECT_EQ(single.x, Vector(Vector::Unit(6, 0)));
  EXPECT_EQ(single.y, Vector(Vector::Zero(6)));
  EXPECT_DOUBLE_EQ(l0_oracle(Vector::Zero(6), id, 1.0).objective, 0.0);
}

TEST(L0Oracle, RotatedPairD8) {
  const int d = 8;
  const LinearOp q = LinearOp::random_rotation(d, 17);
  const Vector x0 = Vector::Unit(d, 0);
  // y0 = Q^T e2, so Q y0 = e2 is 1-sparse.
  const Vector y0 = q.adjoint(Vector::Unit(d, 1));
  const auto sol = l0_oracle(x0 + y0, q, 1.0);
  EXPECT_DOUBLE_EQ(sol.objective, 2.0);
  EXPECT_LT(max_abs_diff(sol.x, x0), 1e-9);
  EXPECT_LT(max_abs_diff(sol.y, y0), 1e-9);

  // l1 demixing finds the same supports.
  const auto p = DemixProblem::superposition(x0 + y0, {l1(d), l1(d, 1.0, q)});
  const auto r = admm_demix(p, tight());
  for (int i = 0; i < d; ++i) {
    EXPECT_EQ(std::abs(r.components[0](i)) > 1e-6, sol.x(i) != 0.0);
    EXPECT_EQ(std::abs(q.apply(r.components[1])(i)) > 1e-6, std::abs(q.apply(sol.y)(i)) > 1e-9);
  }
}

TEST(L0Oracle, WeightsChangeTheWinner) {
  // z0 = 2 spikes = ... a lambda of 5 makes any DCT atom costlier than spikes.
  const int d = 6;
  const Vector z0 = Vector::Unit(d, 0) + Vector::Unit(d, 3);
  const auto sol = l0_oracle(z0, LinearOp::dct(d), 5.0);
  EXPECT_DOUBLE_EQ(sol.objective, 2.0);
  EXPECT_EQ(sol.x, z0);
}

TEST(L0Oracle, RefusesLargeDimension) {
  EXPECT_THROW(l0_oracle(Vector::Zero(17), LinearOp::identity(Shape::vector(17)), 1.0), InvalidArgument);
  EXPECT_THROW(l0_oracle(Vector::Zero(4), LinearOp::identity(Shape::vector(4)), 0.0), InvalidArgument);
}
