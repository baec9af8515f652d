#pragma once

#include "structune/state_space.hpp"

namespace structune {

/// Solves A X + X A^T + Q = 0 for X (Q symmetric). Complex-Schur Bartels-Stewart
/// with a Kronecker-product fallback when the Schur solve leaves a large residual
/// (only for n <= 30). Stability of A is the caller's responsibility.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

}  // namespace structune
