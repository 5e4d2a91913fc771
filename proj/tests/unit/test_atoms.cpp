#include "demixkit/atoms.hpp"

#include "../support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace demixkit;
using testing_support::diag;
using testing_support::max_abs_diff;
using testing_support::vec;

namespace {

GaugeSpec vgauge(GaugeKind k, std::ptrdiff_t d) { return GaugeSpec::vector(k, d); }
GaugeSpec mgauge(GaugeKind k, std::ptrdiff_t m, std::ptrdiff_t n) { return GaugeSpec::matrix(k, m, n); }

// Projection onto the l1 ball by bisection on the threshold; independent of
// the sort-based routine.
Vector l1_ball_bisection(const Vector& u, double r) {
  if (u.cwiseAbs().sum() <= r) return u;
  double lo = 0.0, hi = u.cwiseAbs().maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double s = (u.cwiseAbs().array() - mid).max(0.0).sum();
    (s > r ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  return u.unaryExpr([t](double v) { return v > 0 ? std::max(v - t, 0.0) : std::min(v + t, 0.0); });
}

Matrix random_symmetric(CounterRng& rng, int n) {
  const Matrix a = rng.gaussian_matrix(n, n);
  return 0.5 * (a + a.transpose());
}

}  // namespace

// ---------------------------------------------------------------- GaugeSpec

TEST(GaugeSpec, ShapeRules) {
  EXPECT_NO_THROW(vgauge(GaugeKind::L1, 3));
  EXPECT_THROW(vgauge(GaugeKind::Schatten1, 3), InvalidArgument);
  EXPECT_THROW(mgauge(GaugeKind::PsdTrace, 2, 3), InvalidArgument);
  EXPECT_THROW(mgauge(GaugeKind::DiagIndicator, 3, 2), InvalidArgument);
  EXPECT_NO_THROW(mgauge(GaugeKind::PsdTrace, 3, 3));
  EXPECT_NO_THROW(mgauge(GaugeKind::L1, 3, 2));
}

TEST(GaugeSpec, KindNamesRoundTrip) {
  for (auto k : {GaugeKind::L1, GaugeKind::Linf, GaugeKind::Schatten1, GaugeKind::SchattenInf,
                 GaugeKind::RowL12, GaugeKind::PsdTrace, GaugeKind::DiagIndicator})
    EXPECT_EQ(parse_gauge_kind(to_string(k)), k);
  EXPECT_THROW(parse_gauge_kind("l2"), InvalidArgument);
}

// ---------------------------------------------------------------- gauge_eval

TEST(GaugeEval, L1) {
  EXPECT_EQ(gauge_eval(vgauge(GaugeKind::L1, 3), vec({1, -2, 0})), ExtendedReal(3.0));
}

TEST(GaugeEval, PsdTrace) {
  const auto g = mgauge(GaugeKind::PsdTrace, 2, 2);
  EXPECT_EQ(gauge_eval(g, diag({1, 2})), ExtendedReal(3.0));
  EXPECT_TRUE(gauge_eval(g, diag({-1, 1})).is_infinite());
  Matrix asym(2, 2);
  asym << 1, 1, 0, 1;
  EXPECT_TRUE(gauge_eval(g, asym).is_infinite());
}

TEST(GaugeEval, DiagIndicator) {
  const auto g = mgauge(GaugeKind::DiagIndicator, 2, 2);
  EXPECT_EQ(gauge_eval(g, diag({2, 5})), ExtendedReal(0.0));
  Matrix off(2, 2);
  off << 0, 1, 0, 0;
  EXPECT_TRUE(gauge_eval(g, off).is_infinite());
}

TEST(GaugeEval, OtherKinds) {
  Matrix m(2, 2);
  m << 3, 0, 0, -4;
  EXPECT_DOUBLE_EQ(gauge_eval(mgauge(GaugeKind::Schatten1, 2, 2), m).value(), 7.0);
  EXPECT_DOUBLE_EQ(gauge_eval(mgauge(GaugeKind::SchattenInf, 2, 2), m).value(), 4.0);
  EXPECT_DOUBLE_EQ(gauge_eval(vgauge(GaugeKind::Linf, 3), vec({1, -5, 2})).value(), 5.0);
  Matrix rows(2, 2);
  rows << 3, 4, 0, 1;
  EXPECT_DOUBLE_EQ(gauge_eval(mgauge(GaugeKind::RowL12, 2, 2), rows).value(), 6.0);
}

TEST(GaugeEval, ShapeMismatchThrows) {
  EXPECT_THROW(gauge_eval(vgauge(GaugeKind::L1, 3), vec({1, 2})), InvalidArgument);
  EXPECT_THROW(prox(vgauge(GaugeKind::L1, 3), vec({1, 2}), 1.0), InvalidArgument);
}

TEST(GaugeEval, InfinityPropagates) {
  const auto inf = gauge_eval(mgauge(GaugeKind::PsdTrace, 2, 2), diag({-1, 1}));
  EXPECT_TRUE((inf + ExtendedReal(2.0)).is_infinite());
  EXPECT_TRUE((2.0 * inf).is_infinite());
  EXPECT_EQ(0.0 * inf, ExtendedReal(0.0));
  EXPECT_THROW((void)inf.value(), std::logic_error);
  EXPECT_TRUE(std::isinf(inf.as_double()));
  EXPECT_LT(ExtendedReal(1e300), inf);
}

TEST(GaugeEval, PositiveHomogeneity) {
  CounterRng rng(11);
  const std::vector<GaugeSpec> gauges{vgauge(GaugeKind::L1, 5), vgauge(GaugeKind::Linf, 5),
                                      mgauge(GaugeKind::Schatten1, 3, 4),
                                      mgauge(GaugeKind::SchattenInf, 3, 4),
                                      mgauge(GaugeKind::RowL12, 3, 4)};
  for (int t = 0; t < 1000; ++t) {
    const auto& g = gauges[static_cast<std::size_t>(t) % gauges.size()];
    const Signal x = rng.gaussian_matrix(g.shape().rows, g.shape().cols);
    const double alpha = 5.0 * rng.uniform();
    const double lhs = gauge_eval(g, alpha * x).value();
    const double rhs = alpha * gauge_eval(g, x).value();
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
  }
  for (int t = 0; t < 100; ++t) {
    const Matrix a = rng.gaussian_matrix(3, 3);
    const Matrix psd = a * a.transpose();
    const double alpha = 5.0 * rng.uniform();
    const auto g = mgauge(GaugeKind::PsdTrace, 3, 3);
    EXPECT_NEAR(gauge_eval(g, alpha * psd).value(), alpha * gauge_eval(g, psd).value(), 1e-10 * alpha * psd.trace() + 1e-12);
  }
}

TEST(GaugeEval, UnitAtoms) {
  CounterRng rng(5);
  const int d = 6;
  for (int i = 0; i < d; ++i)
    for (double s : {-1.0, 1.0}) {
      EXPECT_DOUBLE_EQ(gauge_eval(vgauge(GaugeKind::L1, d), s * Vector::Unit(d, i)).value(), 1.0);
    }
  for (int t = 0; t < 20; ++t) {
    Vector sgn(d);
    for (int i = 0; i < d; ++i) sgn(i) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    EXPECT_DOUBLE_EQ(gauge_eval(vgauge(GaugeKind::Linf, d), sgn).value(), 1.0);

    Vector u = rng.gaussian_vector(4), v = rng.gaussian_vector(5);
    u.normalize();
    v.normalize();
    EXPECT_NEAR(gauge_eval(mgauge(GaugeKind::Schatten1, 4, 5), Matrix(u * v.transpose())).value(), 1.0, 1e-12);

    // Orthogonal atoms for the spectral norm.
    Eigen::HouseholderQR<Matrix> qr(rng.gaussian_matrix(4, 4));
    const Matrix q = qr.householderQ() * Matrix::Identity(4, 4);
    EXPECT_NEAR(gauge_eval(mgauge(GaugeKind::SchattenInf, 4, 4), q).value(), 1.0, 1e-12);

    Matrix row = Matrix::Zero(3, 5);
    row.row(t % 3) = v.transpose();
    EXPECT_NEAR(gauge_eval(mgauge(GaugeKind::RowL12, 3, 5), row).value(), 1.0, 1e-12);
  }
}

// ---------------------------------------------------------------- prox examples

TEST(Prox, L1SoftThreshold) {
  EXPECT_LT(max_abs_diff(prox(vgauge(GaugeKind::L1, 3), vec({3, -0.5, 1}), 1.0), vec({2, 0, 0})), 1e-15);
}

TEST(Prox, SoftThresholdTieGoesToZero) {
  EXPECT_EQ(soft_threshold(vec({1.0, -1.0, 1.5}), 1.0), vec({0.0, 0.0, 0.5}));
}

TEST(Prox, Schatten1) {
  EXPECT_LT(max_abs_diff(prox(mgauge(GaugeKind::Schatten1, 2, 2), diag({3, 1}), 2.0), diag({1, 0})), 1e-12);
}

TEST(Prox, Linf) {
  EXPECT_LT(max_abs_diff(prox(vgauge(GaugeKind::Linf, 2), vec({2, 0}), 1.0), vec({1, 0})), 1e-15);
  EXPECT_LT(max_abs_diff(prox(vgauge(GaugeKind::Linf, 2), vec({0.5, -0.5}), 2.0), vec({0, 0})), 1e-15);
}

TEST(Prox, PsdTrace) {
  EXPECT_LT(max_abs_diff(prox(mgauge(GaugeKind::PsdTrace, 2, 2), diag({3, -1}), 1.0), diag({2, 0})), 1e-12);
}

TEST(Prox, PsdTraceSymmetrizesInput) {
  Matrix u(2, 2);
  u << 2, 1, -1, 2;  // symmetric part is 2 I
  EXPECT_LT(max_abs_diff(prox(mgauge(GaugeKind::PsdTrace, 2, 2), u, 0.5), diag({1.5, 1.5})), 1e-12);
}

TEST(Prox, RowL12) {
  Matrix row(1, 2);
  row << 3, 4;
  Matrix want(1, 2);
  want << 1.5, 2;
  EXPECT_LT(max_abs_diff(prox(mgauge(GaugeKind::RowL12, 1, 2), row, 2.5), want), 1e-12);
}

TEST(Prox, DiagIndicatorIsProjection) {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  for (double step : {0.1, 1.0, 100.0})
    EXPECT_EQ(prox(mgauge(GaugeKind::DiagIndicator, 2, 2), m, step), diag({1, 4}));
}

TEST(Prox, SchattenInfMatchesSingularValueOracle) {
  CounterRng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = rng.gaussian_matrix(3, 3);
    const Matrix got = prox(mgauge(GaugeKind::SchattenInf, 3, 3), a, 0.7);
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector s = svd.singularValues();
    const Vector shrunk = prox(vgauge(GaugeKind::Linf, 3), s, 0.7);
    const Matrix want = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
    EXPECT_LT(max_abs_diff(got, want), 1e-10);
  }
}

TEST(Prox, StepMustBePositive) {
  EXPECT_THROW(prox(vgauge(GaugeKind::L1, 2), vec({1, 2}), 0.0), InvalidArgument);
  EXPECT_THROW(prox(vgauge(GaugeKind::L1, 2), vec({1, 2}), -1.0), InvalidArgument);
}

// Direct check of the proximal objective against random perturbations.
TEST(Prox, MinimizesProximalObjective) {
  CounterRng rng(21);
  const std::vector<GaugeSpec> gauges{vgauge(GaugeKind::L1, 4), vgauge(GaugeKind::Linf, 4),
                                      mgauge(GaugeKind::Schatten1, 3, 3),
                                      mgauge(GaugeKind::SchattenInf, 3, 3),
                                      mgauge(GaugeKind::RowL12, 3, 3)};
  for (const auto& g : gauges) {
    for (int t = 0; t < 20; ++t) {
      const Signal u = 2.0 * rng.gaussian_matrix(g.shape().rows, g.shape().cols);
      const double step = 0.2 + rng.uniform();
      const Signal p = prox(g, u, step);
      auto obj = [&](const Signal& x) {
        return gauge_eval(g, x).value() + (u - x).squaredNorm() / (2.0 * step);
      };
      const double best = obj(p);
      for (int k = 0; k < 50; ++k) {
        const Signal q = p + 1e-3 * rng.gaussian_matrix(g.shape().rows, g.shape().cols);
        EXPECT_LE(best, obj(q) + 1e-12) << to_string(g.kind());
      }
    }
  }
}

// ---------------------------------------------------------------- l1 ball

TEST(ProjectL1Ball, Examples) {
  EXPECT_LT(max_abs_diff(project_l1_ball(vec({3, 1}), 1.0), vec({1, 0})), 1e-15);
  EXPECT_EQ(project_l1_ball(vec({0.2, -0.3}), 1.0), vec({0.2, -0.3}));
  EXPECT_LT(max_abs_diff(project_l1_ball(vec({1, 1}), 1.0), vec({0.5, 0.5})), 1e-15);
  EXPECT_THROW(project_l1_ball(vec({1, 1}), 0.0), InvalidArgument);
}

TEST(ProjectL1Ball, GridOracleInTwoDimensions) {
  // Brute force over a 1e-4 grid of the ball boundary and interior.
  const Vector u = vec({3, 1});
  double best = 1e9;
  Vector arg(2);
  const int n = 10000;
  for (int i = -n; i <= n; ++i) {
    const double a = static_cast<double>(i) / n;
    for (double b : {1.0 - std::abs(a), -(1.0 - std::abs(a))}) {
      const double dist = (u - vec({a, b})).squaredNorm();
      if (dist < best) {
        best = dist;
        arg = vec({a, b});
      }
    }
  }
  EXPECT_LT(max_abs_diff(project_l1_ball(u, 1.0), arg), 1e-4);
}

TEST(ProjectL1Ball, MatchesBisectionOracle) {
  CounterRng rng(9);
  for (int t = 0; t < 500; ++t) {
    const int d = 1 + static_cast<int>(rng.below(12));
    const Vector u = 3.0 * rng.gaussian_vector(d);
    const double r = 0.1 + 4.0 * rng.uniform();
    const Vector p = project_l1_ball(u, r);
    EXPECT_LT(max_abs_diff(p, l1_ball_bisection(u, r)), 1e-10);
    EXPECT_LE(p.cwiseAbs().sum(), r + 1e-12);
  }
}

// ---------------------------------------------------------------- properties

TEST(ProxProperties, FirmNonexpansiveness) {
  CounterRng rng(1);
  const std::vector<GaugeSpec> gauges{
      vgauge(GaugeKind::L1, 6),           vgauge(GaugeKind::Linf, 6),
      mgauge(GaugeKind::Schatten1, 3, 4), mgauge(GaugeKind::SchattenInf, 3, 4),
      mgauge(GaugeKind::RowL12, 3, 4),    mgauge(GaugeKind::PsdTrace, 4, 4),
      mgauge(GaugeKind::DiagIndicator, 4, 4)};
  for (int t = 0; t < 1000; ++t) {
    const auto& g = gauges[static_cast<std::size_t>(t) % gauges.size()];
    const auto [m, n] = g.shape();
    Signal u = rng.gaussian_matrix(m, n), v = rng.gaussian_matrix(m, n);
    if (g.kind() == GaugeKind::PsdTrace) {
      u = 0.5 * (u + u.transpose());
      v = 0.5 * (v + v.transpose());
    }
    const double step = 0.1 + 2.0 * rng.uniform();
    const Signal pu = prox(g, u, step), pv = prox(g, v, step);
    // ||Pu - Pv||^2 <= <Pu - Pv, u - v> implies nonexpansiveness.
    EXPECT_LE((pu - pv).squaredNorm(), inner(pu - pv, u - v) + 1e-10);
    EXPECT_LE((pu - pv).norm(), (u - v).norm() + 1e-10);
  }
}

TEST(ProxProperties, MoreauIdentityLinf) {
  CounterRng rng(2);
  for (int t = 0; t < 1000; ++t) {
    const int d = 1 + static_cast<int>(rng.below(10));
    const Vector u = 2.0 * rng.gaussian_vector(d);
    const double rho = 0.05 + 3.0 * rng.uniform();
    const Vector lhs = u - prox(vgauge(GaugeKind::Linf, d), u, rho);
    EXPECT_LT(max_abs_diff(lhs, project_l1_ball(u, rho)), 1e-10);
  }
}

TEST(ProxProperties, MoreauIdentityL1) {
  // u = prox(l1) + projection onto the rho-scaled linf ball.
  CounterRng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const Vector u = 2.0 * rng.gaussian_vector(7);
    const double rho = 0.05 + 3.0 * rng.uniform();
    const Vector clip = u.cwiseMax(-rho).cwiseMin(rho);
    EXPECT_LT(max_abs_diff(prox(vgauge(GaugeKind::L1, 7), u, rho) + clip, u), 1e-12);
  }
}

TEST(ProxProperties, L1OptimalityCertificate) {
  CounterRng rng(6);
  for (int t = 0; t < 500; ++t) {
    const Vector u = 2.0 * rng.gaussian_vector(8);
    const double rho = 0.1 + rng.uniform();
    const Vector x = prox(vgauge(GaugeKind::L1, 8), u, rho);
    const Vector g = (u - x) / rho;
    for (int i = 0; i < 8; ++i) {
      if (x(i) != 0.0) EXPECT_NEAR(g(i), x(i) > 0 ? 1.0 : -1.0, 1e-9);
      else EXPECT_LE(std::abs(g(i)), 1.0 + 1e-9);
    }
    EXPECT_LT(subgradient_violation(vgauge(GaugeKind::L1, 8), x, g, 1.0), 1e-9);
  }
}

TEST(ProxProperties, ScalingConsistency) {
  CounterRng rng(8);
  const std::vector<GaugeSpec> gauges{vgauge(GaugeKind::L1, 5), vgauge(GaugeKind::Linf, 5),
                                      mgauge(GaugeKind::Schatten1, 3, 3),
                                      mgauge(GaugeKind::SchattenInf, 3, 3),
                                      mgauge(GaugeKind::RowL12, 3, 3),
                                      mgauge(GaugeKind::PsdTrace, 3, 3)};
  for (const auto& g : gauges)
    for (int t = 0; t < 50; ++t) {
      const Signal u = rng.gaussian_matrix(g.shape().rows, g.shape().cols);
      const double alpha = 0.1 + 3.0 * rng.uniform(), rho = 0.1 + rng.uniform();
      EXPECT_LT(max_abs_diff(prox(g, alpha * u, alpha * rho), alpha * prox(g, u, rho)), 1e-10)
          << to_string(g.kind());
    }
}

TEST(ProxProperties, PsdTraceOutputIsPsdAndMatchesEigenShrinkage) {
  CounterRng rng(10);
  for (int t = 0; t < 100; ++t) {
    const Matrix s = random_symmetric(rng, 4);
    const Matrix p = prox(mgauge(GaugeKind::PsdTrace, 4, 4), s, 0.3);
    Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> src(s);
    Vector want = (src.eigenvalues().array() - 0.3).max(0.0).matrix();
    EXPECT_NEAR(p.trace(), want.sum(), 1e-10);
  }
}

// ---------------------------------------------------------------- subgradient tests

TEST(SubgradientViolation, KnownPoints) {
  EXPECT_DOUBLE_EQ(subgradient_violation(vgauge(GaugeKind::L1, 2), vec({1, 0}), vec({1, 0.5}), 1.0), 0.0);
  EXPECT_NEAR(subgradient_violation(vgauge(GaugeKind::L1, 2), vec({1, 0}), vec({1, 1.5}), 1.0), 0.5, 1e-15);
  EXPECT_NEAR(subgradient_violation(vgauge(GaugeKind::L1, 1), vec({1}), vec({-1}), 1.0), 2.0, 1e-15);
  // Linf at (2, -2, 1): subgradients are convex combinations of e1 and -e2.
  EXPECT_LT(subgradient_violation(vgauge(GaugeKind::Linf, 3), vec({2, -2, 1}), vec({0.3, -0.7, 0}), 1.0), 1e-15);
  EXPECT_GT(subgradient_violation(vgauge(GaugeKind::Linf, 3), vec({2, -2, 1}), vec({0.3, 0.7, 0}), 1.0), 0.5);
  EXPECT_THROW(subgradient_violation(mgauge(GaugeKind::SchattenInf, 2, 2), diag({1, 1}), diag({1, 1}), 1.0),
               Unimplemented);
}

TEST(SubgradientViolation, ProxOutputsAreCertified) {
  CounterRng rng(12);
  const std::vector<GaugeSpec> gauges{vgauge(GaugeKind::L1, 5), vgauge(GaugeKind::Linf, 5),
                                      mgauge(GaugeKind::Schatten1, 4, 3),
                                      mgauge(GaugeKind::RowL12, 4, 3),
                                      mgauge(GaugeKind::PsdTrace, 4, 4),
                                      mgauge(GaugeKind::DiagIndicator, 4, 4)};
  for (const auto& g : gauges)
    for (int t = 0; t < 50; ++t) {
      Signal u = 2.0 * rng.gaussian_matrix(g.shape().rows, g.shape().cols);
      if (g.kind() == GaugeKind::PsdTrace) u = 0.5 * (u + u.transpose());
      const double rho = 0.2 + rng.uniform();
      const Signal x = prox(g, u, rho);
      EXPECT_LT(subgradient_violation(g, x, (u - x) / rho, 1.0), 1e-8) << to_string(g.kind());
    }
}
