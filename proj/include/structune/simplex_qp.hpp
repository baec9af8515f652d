#pragma once

#include "structune/state_space.hpp"

namespace structune {

struct SimplexQpResult {
  Vector lambda;
  double objective = 0.0;
  int iterations = 0;
};

/// min 1/2 l^T H l - a^T l  subject to  l >= 0, sum(l) = 1, with H symmetric PSD.
/// Primal active-set method on a slightly regularized H; throws QPFailure when it
/// cannot certify optimality.
SimplexQpResult solve_simplex_qp(const Matrix& h, const Vector& a, double tol = 1e-12);

}  // namespace structune
