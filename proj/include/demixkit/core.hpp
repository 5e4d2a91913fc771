#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace demixkit {

// Every signal is stored as a dense matrix; vectors are d x 1.
using Signal = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Unimplemented : std::logic_error {
  using std::logic_error::logic_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::ptrdiff_t rows = 0;
  std::ptrdiff_t cols = 1;

  static Shape vector(std::ptrdiff_t d) { return {d, 1}; }
  static Shape matrix(std::ptrdiff_t m, std::ptrdiff_t n) { return {m, n}; }
  static Shape of(const Signal& s) { return {s.rows(), s.cols()}; }

  std::ptrdiff_t size() const { return rows * cols; }
  bool is_square() const { return rows == cols; }

  friend bool operator==(const Shape&, const Shape&) = default;
  friend std::ostream& operator<<(std::ostream& os, const Shape& s) {
    return os << s.rows << "x" << s.cols;
  }
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

inline void require_shape(const Signal& s, const Shape& expected, const char* what) {
  if (Shape::of(s) != expected) {
    throw InvalidArgument(std::string(what) + ": expected shape " + to_string(expected) +
                          ", got " + to_string(Shape::of(s)));
  }
}

/// A value in [0, +inf]. Infinity is a state, never the result of overflow.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr explicit ExtendedReal(double v) : value_(v) {}

  static constexpr ExtendedReal infinity() {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr bool is_finite() const { return !infinite_; }

  /// Finite value; throws when called on +inf.
  double value() const {
    if (infinite_) throw std::logic_error("ExtendedReal::value() on +inf");
    return value_;
  }

  /// IEEE view, +inf maps to the IEEE infinity.
  constexpr double as_double() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  friend constexpr ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return ExtendedReal(a.value_ + b.value_);
  }

  // 0 * inf = 0, the usual convention for weighted indicator functions.
  friend constexpr ExtendedReal operator*(double alpha, ExtendedReal a) {
    if (a.infinite_) return alpha == 0.0 ? ExtendedReal(0.0) : infinity();
    return ExtendedReal(alpha * a.value_);
  }

  friend constexpr bool operator==(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
    return a.value_ == b.value_;
  }

  friend constexpr bool operator<(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_) return false;
    if (b.infinite_) return true;
    return a.value_ < b.value_;
  }
  friend constexpr bool operator<=(ExtendedReal a, ExtendedReal b) { return !(b < a); }

  friend std::ostream& operator<<(std::ostream& os, ExtendedReal a) {
    if (a.infinite_) return os << "+inf";
    return os << a.value_;
  }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

inline bool all_finite(const Signal& s) { return s.allFinite(); }

inline double inner(const Signal& a, const Signal& b) {
  return (a.array() * b.array()).sum();
}

}  // namespace demixkit
