#pragma once

#include "demixkit/core.hpp"
#include "demixkit/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace testing_support {

using demixkit::Matrix;
using demixkit::Signal;
using demixkit::Vector;

inline double max_abs_diff(const Signal& a, const Signal& b) {
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.cols(), b.cols());
  return (a - b).cwiseAbs().maxCoeff();
}

inline Matrix diag(std::initializer_list<double> d) {
  Vector v(static_cast<std::ptrdiff_t>(d.size()));
  std::ptrdiff_t i = 0;
  for (double x : d) v(i++) = x;
  return v.asDiagonal();
}

inline Vector vec(std::initializer_list<double> d) {
  Vector v(static_cast<std::ptrdiff_t>(d.size()));
  std::ptrdiff_t i = 0;
  for (double x : d) v(i++) = x;
  return v;
}

}  // namespace testing_support
