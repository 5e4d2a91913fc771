#pragma once

// Atomic gauges and their proximal operators.

#include "demixkit/core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace demixkit {

enum class GaugeKind {
  L1,             // sum |x_i|
  Linf,           // max |x_i|
  Schatten1,      // nuclear norm
  SchattenInf,    // spectral norm
  RowL12,         // sum of row Euclidean norms
  PsdTrace,       // trace on PSD matrices, +inf otherwise
  DiagIndicator,  // 0 on diagonal matrices, +inf otherwise
};

inline std::string_view to_string(GaugeKind k) {
  switch (k) {
    case GaugeKind::L1: return "l1";
    case GaugeKind::Linf: return "linf";
    case GaugeKind::Schatten1: return "schatten1";
    case GaugeKind::SchattenInf: return "schatten_inf";
    case GaugeKind::RowL12: return "row_l12";
    case GaugeKind::PsdTrace: return "psd_trace";
    case GaugeKind::DiagIndicator: return "diag_indicator";
  }
  return "?";
}

inline GaugeKind parse_gauge_kind(std::string_view name) {
  for (auto k : {GaugeKind::L1, GaugeKind::Linf, GaugeKind::Schatten1, GaugeKind::SchattenInf,
                 GaugeKind::RowL12, GaugeKind::PsdTrace, GaugeKind::DiagIndicator}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown gauge kind '" + std::string(name) + "'");
}

inline bool is_matrix_kind(GaugeKind k) {
  return k != GaugeKind::L1 && k != GaugeKind::Linf;
}

/// Gauge family plus the shape of its argument. Carries no numeric data.
class GaugeSpec {
 public:
  static GaugeSpec vector(GaugeKind kind, std::ptrdiff_t d) {
    if (is_matrix_kind(kind))
      throw InvalidArgument("gauge '" + std::string(to_string(kind)) + "' needs a matrix shape");
    if (d < 1) throw InvalidArgument("gauge dimension must be positive");
    return GaugeSpec(kind, Shape::vector(d), false);
  }

  static GaugeSpec matrix(GaugeKind kind, std::ptrdiff_t m, std::ptrdiff_t n) {
    if (m < 1 || n < 1) throw InvalidArgument("gauge dimensions must be positive");
    if ((kind == GaugeKind::PsdTrace || kind == GaugeKind::DiagIndicator) && m != n)
      throw InvalidArgument("gauge '" + std::string(to_string(kind)) + "' needs a square shape");
    return GaugeSpec(kind, Shape::matrix(m, n), true);
  }

  GaugeKind kind() const { return kind_; }
  const Shape& shape() const { return shape_; }
  bool is_matrix() const { return matrix_; }

 private:
  GaugeSpec(GaugeKind k, Shape s, bool matrix) : kind_(k), shape_(s), matrix_(matrix) {}

  GaugeKind kind_;
  Shape shape_;
  bool matrix_;
};

// Relative tolerances used when deciding membership in the PSD domain.
inline constexpr double kSymmetryTol = 1e-9;
inline constexpr double kPsdEigenTol = 1e-10;

namespace detail {

inline Eigen::BDCSVD<Matrix> checked_svd(const Matrix& a) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("SVD failed to converge on a " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " matrix (Eigen info code " +
                         std::to_string(static_cast<int>(svd.info())) + ")");
  }
  return svd;
}

inline Eigen::SelfAdjointEigenSolver<Matrix> checked_eigh(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw NumericalError("symmetric eigendecomposition failed to converge on a " +
                         std::to_string(sym.rows()) + "x" + std::to_string(sym.cols()) +
                         " matrix (Eigen info code " + std::to_string(static_cast<int>(es.info())) +
                         ")");
  }
  return es;
}

inline Matrix symmetric_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline bool numerically_symmetric(const Matrix& a) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * scale;
}

}  // namespace detail

/// Soft threshold; entries with |u_i| <= t (ties included) go to zero.
inline Signal soft_threshold(const Signal& u, double t) {
  return u.unaryExpr([t](double v) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
  });
}

/// Euclidean projection onto { x : ||x||_1 <= radius }, sort-based.
inline Signal project_l1_ball(const Signal& u, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("project_l1_ball: radius must be positive");
  const double norm1 = u.cwiseAbs().sum();
  if (norm1 <= radius) return u;

  std::vector<double> mags(u.data(), u.data() + u.size());
  for (auto& m : mags) m = std::abs(m);
  std::sort(mags.begin(), mags.end(), std::greater<>());

  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    cumsum += mags[k];
    const double t = (cumsum - radius) / static_cast<double>(k + 1);
    if (mags[k] - t > 0.0) theta = t;
  }
  return soft_threshold(u, theta);
}

inline void check_point(const GaugeSpec& g, const Signal& x) {
  if (Shape::of(x) != g.shape()) {
    throw InvalidArgument("gauge '" + std::string(to_string(g.kind())) + "': point shape " +
                          to_string(Shape::of(x)) + " does not match gauge shape " +
                          to_string(g.shape()));
  }
}

inline ExtendedReal gauge_eval(const GaugeSpec& g, const Signal& x) {
  check_point(g, x);
  switch (g.kind()) {
    case GaugeKind::L1:
      return ExtendedReal(x.cwiseAbs().sum());
    case GaugeKind::Linf:
      return ExtendedReal(x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff());
    case GaugeKind::Schatten1:
      return ExtendedReal(detail::checked_svd(x).singularValues().sum());
    case GaugeKind::SchattenInf:
      return ExtendedReal(detail::checked_svd(x).singularValues().maxCoeff());
    case GaugeKind::RowL12:
      return ExtendedReal(x.rowwise().norm().sum());
    case GaugeKind::PsdTrace: {
      if (!detail::numerically_symmetric(x)) return ExtendedReal::infinity();
      const Matrix s = detail::symmetric_part(x);
      const Vector ev = detail::checked_eigh(s).eigenvalues();
      const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
      if (ev.minCoeff() < -kPsdEigenTol * scale) return ExtendedReal::infinity();
      return ExtendedReal(s.trace());
    }
    case GaugeKind::DiagIndicator: {
      for (std::ptrdiff_t j = 0; j < x.cols(); ++j)
        for (std::ptrdiff_t i = 0; i < x.rows(); ++i)
          if (i != j && x(i, j) != 0.0) return ExtendedReal::infinity();
      return ExtendedReal(0.0);
    }
  }
  throw Unimplemented("gauge_eval: unhandled gauge kind");
}

/// argmin_x gauge(x) + 1/(2 step) ||point - x||^2
inline Signal prox(const GaugeSpec& g, const Signal& point, double step) {
  check_point(g, point);
  if (!(step > 0.0)) throw InvalidArgument("prox: step must be positive");

  switch (g.kind()) {
    case GaugeKind::L1:
      return soft_threshold(point, step);

    case GaugeKind::Linf:
      // Moreau: prox of a norm = identity minus projection onto the dual ball.
      return point - project_l1_ball(point, step);

    case GaugeKind::Schatten1:
    case GaugeKind::SchattenInf: {
      const auto svd = detail::checked_svd(point);
      const Vector s = svd.singularValues();
      const Vector shrunk = g.kind() == GaugeKind::Schatten1
                                ? Vector(soft_threshold(s, step))
                                : Vector(s - project_l1_ball(s, step));
      return svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
    }

    case GaugeKind::RowL12: {
      Signal out = point;
      for (std::ptrdiff_t i = 0; i < point.rows(); ++i) {
        const double n = point.row(i).norm();
        out.row(i) *= n > step ? 1.0 - step / n : 0.0;
      }
      return out;
    }

    case GaugeKind::PsdTrace: {
      const auto es = detail::checked_eigh(detail::symmetric_part(point));
      const Vector mu = (es.eigenvalues().array() - step).max(0.0).matrix();
      const Matrix& v = es.eigenvectors();
      return v * mu.asDiagonal() * v.transpose();
    }

    case GaugeKind::DiagIndicator: {
      Signal out = Signal::Zero(point.rows(), point.cols());
      out.diagonal() = point.diagonal();
      return out;
    }
  }
  throw Unimplemented("prox: unhandled gauge kind");
}

/// Distance-style violation of q in weight * (subdifferential of the gauge at x),
/// in max-abs units. Used to certify first-order optimality.
/// `support_tol` decides which entries / singular values count as nonzero.
inline double subgradient_violation(const GaugeSpec& g, const Signal& x, const Signal& q,
                                    double weight, double support_tol = 1e-7) {
  check_point(g, x);
  check_point(g, q);
  const double xscale = std::max(1.0, x.cwiseAbs().maxCoeff());
  const double thr = support_tol * xscale;

  switch (g.kind()) {
    case GaugeKind::L1: {
      double v = 0.0;
      for (std::ptrdiff_t i = 0; i < x.size(); ++i) {
        const double xi = x.data()[i], qi = q.data()[i];
        if (std::abs(xi) > thr) v = std::max(v, std::abs(qi - weight * (xi > 0 ? 1.0 : -1.0)));
        else v = std::max(v, std::abs(qi) - weight);
      }
      return std::max(v, 0.0);
    }

    case GaugeKind::Linf: {
      const double top = x.cwiseAbs().maxCoeff();
      if (top <= thr) return std::max(0.0, q.cwiseAbs().sum() - weight);
      double aligned = 0.0, off = 0.0, wrong_sign = 0.0;
      for (std::ptrdiff_t i = 0; i < x.size(); ++i) {
        const double xi = x.data()[i], qi = q.data()[i];
        if (std::abs(xi) >= top - thr) {
          const double s = xi > 0 ? 1.0 : -1.0;
          aligned += s * qi;
          wrong_sign = std::max(wrong_sign, -s * qi);
        } else {
          off = std::max(off, std::abs(qi));
        }
      }
      return std::max({std::abs(aligned - weight), off, wrong_sign});
    }

    case GaugeKind::Schatten1: {
      const auto svd = detail::checked_svd(x);
      const Vector s = svd.singularValues();
      std::ptrdiff_t r = 0;
      while (r < s.size() && s(r) > thr) ++r;
      const Matrix qn = q / weight;
      const Matrix u = svd.matrixU().leftCols(r);
      const Matrix vv = svd.matrixV().leftCols(r);
      // q/weight = U V^T + W with U^T W = 0, W V = 0, ||W||_op <= 1.
      double v = 0.0;
      if (r > 0) {
        v = std::max(v, (u.transpose() * qn - vv.transpose()).cwiseAbs().maxCoeff());
        v = std::max(v, (qn * vv - u).cwiseAbs().maxCoeff());
      }
      const Matrix pu = Matrix::Identity(x.rows(), x.rows()) - u * u.transpose();
      const Matrix pv = Matrix::Identity(x.cols(), x.cols()) - vv * vv.transpose();
      const Matrix w = pu * qn * pv;
      const double wn = detail::checked_svd(w).singularValues().maxCoeff();
      v = std::max(v, wn - 1.0);
      return std::max(v, 0.0) * weight;
    }

    case GaugeKind::RowL12: {
      double v = 0.0;
      for (std::ptrdiff_t i = 0; i < x.rows(); ++i) {
        const double n = x.row(i).norm();
        if (n > thr) {
          v = std::max(v, (q.row(i) - weight * x.row(i) / n).cwiseAbs().maxCoeff());
        } else {
          v = std::max(v, q.row(i).norm() - weight);
        }
      }
      return std::max(v, 0.0);
    }

    case GaugeKind::PsdTrace: {
      // Subdifferential on symmetric matrices: weight * (I - P), P >= 0, P X = 0.
      // The antisymmetric part of q is unconstrained.
      const Matrix m = weight * Matrix::Identity(x.rows(), x.cols()) - detail::symmetric_part(q);
      const double min_eig = detail::checked_eigh(m).eigenvalues().minCoeff();
      const double slack = (m * detail::symmetric_part(x)).cwiseAbs().maxCoeff() / xscale;
      return std::max({0.0, -min_eig, slack});
    }

    case GaugeKind::DiagIndicator:
      // Normal cone of the diagonal subspace: matrices with zero diagonal.
      return q.diagonal().cwiseAbs().maxCoeff();

    case GaugeKind::SchattenInf:
      throw Unimplemented("subgradient test for schatten_inf is not implemented");
  }
  throw Unimplemented("subgradient_violation: unhandled gauge kind");
}

}  // namespace demixkit
