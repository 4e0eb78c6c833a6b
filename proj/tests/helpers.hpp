#pragma once

#include "bcsdp/bcsdp.hpp"

namespace bcsdp::testing {

using Mat = Matrix<double>;
using Q = BlockSparseSym<double>;

/// d = 1, n = 3, every off-diagonal entry 1.
inline Q triangle() {
  Q q(1, 3);
  for (Index i = 0; i < 3; ++i)
    for (Index j = i + 1; j < 3; ++j) q.set_block(i, j, Mat::Ones(1, 1));
  return q;
}

/// d = 1, n = 2, Q_12 = 1.
inline Q two_vertex() {
  Q q(1, 2);
  q.set_block(0, 1, Mat::Ones(1, 1));
  return q;
}

/// Star on n vertices centred at 0, unit weights.
inline Q star(Index n) {
  Q q(1, n);
  for (Index j = 1; j < n; ++j) q.set_block(0, j, Mat::Ones(1, 1));
  return q;
}

/// Gaussian blocks on an Erdos-Renyi pattern.
inline Q random_cost(Index d, Index n, double density, Rng& rng) {
  Q q(d, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform() < density) q.set_block(i, j, rng.gaussian<double>(d, d));
  return q;
}

/// Three unit vectors at mutual 120 degrees: the triangle optimum at r = 2.
inline Mat triangle_optimum() {
  Mat y(2, 3);
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 3.0;
    y(0, k) = std::cos(a);
    y(1, k) = std::sin(a);
  }
  return y;
}

}  // namespace bcsdp::testing
