#pragma once

// Linear measurement and dictionary operators with an apply/adjoint contract.

#include "demixkit/core.hpp"
#include "demixkit/rng.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace demixkit {

enum class OpKind { Identity, Dense, Dct, RandomRotation, SubsampleRows, ConvLift };

inline std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::Identity: return "identity";
    case OpKind::Dense: return "dense";
    case OpKind::Dct: return "dct";
    case OpKind::RandomRotation: return "random_rotation";
    case OpKind::SubsampleRows: return "subsample_rows";
    case OpKind::ConvLift: return "conv_lift";
  }
  return "?";
}

/// Orthonormal DCT-II matrix: D(k, n) = c_k sqrt(2/d) cos(pi (2n+1) k / (2d)).
inline Matrix dct_matrix(std::ptrdiff_t d) {
  if (d < 1) throw InvalidArgument("dct_matrix: d must be positive");
  Matrix m(d, d);
  const double scale = std::sqrt(2.0 / static_cast<double>(d));
  for (std::ptrdiff_t k = 0; k < d; ++k) {
    const double ck = k == 0 ? 1.0 / std::numbers::sqrt2 : 1.0;
    for (std::ptrdiff_t n = 0; n < d; ++n) {
      m(k, n) = ck * scale *
                std::cos(std::numbers::pi * static_cast<double>((2 * n + 1) * k) /
                         (2.0 * static_cast<double>(d)));
    }
  }
  return m;
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// sign of diag(R) folded into Q.
inline Matrix haar_orthogonal(std::ptrdiff_t d, std::uint64_t seed) {
  if (d < 1) throw InvalidArgument("random_rotation: d must be positive");
  CounterRng rng(seed);
  const Matrix g = rng.gaussian_matrix(d, d);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix& r = qr.matrixQR();
  for (std::ptrdiff_t j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

/// Immutable linear operator. Dense-backed kinds share their matrix, so
/// copies are cheap and concurrent use is safe.
class LinearOp {
 public:
  static LinearOp identity(Shape shape) {
    LinearOp op(OpKind::Identity, shape, shape);
    return op;
  }

  static LinearOp dense(Matrix m) {
    LinearOp op(OpKind::Dense, Shape::vector(m.cols()), Shape::vector(m.rows()));
    op.matrix_ = std::make_shared<const Matrix>(std::move(m));
    return op;
  }

  static LinearOp dct(std::ptrdiff_t d) {
    LinearOp op(OpKind::Dct, Shape::vector(d), Shape::vector(d));
    op.matrix_ = std::make_shared<const Matrix>(dct_matrix(d));
    return op;
  }

  static LinearOp random_rotation(std::ptrdiff_t d, std::uint64_t seed) {
    if (d < 1) throw InvalidArgument("random_rotation: d must be positive");
    LinearOp op(OpKind::RandomRotation, Shape::vector(d), Shape::vector(d));
    op.matrix_ = std::make_shared<const Matrix>(haar_orthogonal(d, seed));
    return op;
  }

  /// Keeps the entries of the (column-major flattened) input where mask is true.
  static LinearOp subsample_rows(Shape input, std::vector<bool> mask) {
    if (static_cast<std::ptrdiff_t>(mask.size()) != input.size())
      throw InvalidArgument("subsample_rows: mask length must equal the input size");
    std::vector<std::ptrdiff_t> kept;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) kept.push_back(static_cast<std::ptrdiff_t>(i));
    LinearOp op(OpKind::SubsampleRows, input,
                Shape::vector(static_cast<std::ptrdiff_t>(kept.size())));
    op.kept_ = std::make_shared<const std::vector<std::ptrdiff_t>>(std::move(kept));
    return op;
  }

  /// Lifting of linear convolution: X (m x d) -> z, z_k = sum_{i+j=k} X(i, j).
  static LinearOp conv_lift(std::ptrdiff_t m, std::ptrdiff_t d) {
    if (m < 1 || d < 1) throw InvalidArgument("conv_lift: dimensions must be positive");
    return LinearOp(OpKind::ConvLift, Shape::matrix(m, d), Shape::vector(m + d - 1));
  }

  OpKind kind() const { return kind_; }
  const Shape& input_shape() const { return in_; }
  const Shape& output_shape() const { return out_; }

  /// Dense matrix for Dense / Dct / RandomRotation, nullptr otherwise.
  const Matrix* matrix() const { return matrix_.get(); }

  bool is_orthogonal() const {
    if (kind_ == OpKind::Identity || kind_ == OpKind::Dct || kind_ == OpKind::RandomRotation)
      return true;
    if (kind_ == OpKind::Dense && in_ == out_) {
      const Matrix& m = *matrix_;
      return (m.transpose() * m - Matrix::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff() <
             1e-10;
    }
    return false;
  }

  Signal apply(const Signal& x) const {
    require_shape(x, in_, "LinearOp::apply input");
    switch (kind_) {
      case OpKind::Identity:
        return x;
      case OpKind::Dense:
      case OpKind::Dct:
      case OpKind::RandomRotation:
        return (*matrix_) * x;
      case OpKind::SubsampleRows: {
        Signal out(out_.rows, 1);
        const auto& kept = *kept_;
        for (std::size_t i = 0; i < kept.size(); ++i)
          out(static_cast<std::ptrdiff_t>(i)) = x.data()[kept[i]];
        return out;
      }
      case OpKind::ConvLift: {
        Signal z = Signal::Zero(out_.rows, 1);
        for (std::ptrdiff_t j = 0; j < x.cols(); ++j)
          for (std::ptrdiff_t i = 0; i < x.rows(); ++i) z(i + j) += x(i, j);
        return z;
      }
    }
    throw Unimplemented("LinearOp::apply: unhandled kind");
  }

  Signal adjoint(const Signal& y) const {
    require_shape(y, out_, "LinearOp::adjoint input");
    switch (kind_) {
      case OpKind::Identity:
        return y;
      case OpKind::Dense:
      case OpKind::Dct:
      case OpKind::RandomRotation:
        return matrix_->transpose() * y;
      case OpKind::SubsampleRows: {
        Signal out = Signal::Zero(in_.rows, in_.cols);
        const auto& kept = *kept_;
        for (std::size_t i = 0; i < kept.size(); ++i)
          out.data()[kept[i]] = y(static_cast<std::ptrdiff_t>(i));
        return out;
      }
      case OpKind::ConvLift: {
        Signal x(in_.rows, in_.cols);
        for (std::ptrdiff_t j = 0; j < in_.cols; ++j)
          for (std::ptrdiff_t i = 0; i < in_.rows; ++i) x(i, j) = y(i + j);
        return x;
      }
    }
    throw Unimplemented("LinearOp::adjoint: unhandled kind");
  }

  /// Spectral norm. Exact for every kind.
  double norm() const {
    switch (kind_) {
      case OpKind::Identity:
      case OpKind::Dct:
      case OpKind::RandomRotation:
        return 1.0;
      case OpKind::SubsampleRows:
        return kept_->empty() ? 0.0 : 1.0;
      case OpKind::ConvLift:
        // C C^T is diagonal with entries = number of (i, j) on each anti-diagonal.
        return std::sqrt(static_cast<double>(std::min(in_.rows, in_.cols)));
      case OpKind::Dense: {
        Eigen::JacobiSVD<Matrix> svd(*matrix_);
        return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
      }
    }
    throw Unimplemented("LinearOp::norm: unhandled kind");
  }

 private:
  LinearOp(OpKind k, Shape in, Shape out) : kind_(k), in_(in), out_(out) {}

  OpKind kind_;
  Shape in_;
  Shape out_;
  std::shared_ptr<const Matrix> matrix_;
  std::shared_ptr<const std::vector<std::ptrdiff_t>> kept_;
};

inline LinearOp random_rotation(std::ptrdiff_t d, std::uint64_t seed) {
  return LinearOp::random_rotation(d, seed);
}

inline Signal conv_lift_apply(const Signal& x) {
  return LinearOp::conv_lift(x.rows(), x.cols()).apply(x);
}

inline Signal conv_lift_adjoint(const Signal& z, std::ptrdiff_t m, std::ptrdiff_t d) {
  return LinearOp::conv_lift(m, d).adjoint(z);
}

/// Plain linear convolution, length m + d - 1.
inline Vector convolve(const Vector& a, const Vector& b) {
  Vector z = Vector::Zero(a.size() + b.size() - 1);
  for (std::ptrdiff_t i = 0; i < a.size(); ++i)
    for (std::ptrdiff_t j = 0; j < b.size(); ++j) z(i + j) += a(i) * b(j);
  return z;
}

}  // namespace demixkit
