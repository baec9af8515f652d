#pragma once

#include <array>
#include <limits>
#include <vector>

#include "structune/state_space.hpp"

namespace structune {

struct HinfResult {
  double value = 0.0;
  /// Active frequencies in rad/s, ascending. +inf marks a supremum at infinity.
  std::vector<double> peak_frequencies;
  bool converged = false;
  int iterations = 0;
};

/// Pole-region tuning goal: min decay alpha, min damping zeta, max natural frequency.
struct PoleGoal {
  double min_decay = 0.0;
  double min_damping = 0.0;
  double max_frequency = std::numeric_limits<double>::infinity();

  void validate() const;
};

struct Gramians {
  Matrix controllability;  // A X + X A^T + B B^T = 0
  Matrix observability;    // A^T Y + Y A + C^T C = 0
};

double h2_norm(const StateSpace& sys);
Gramians h2_gramians(const StateSpace& sys, bool with_observability = true);

inline constexpr double kDefaultHinfTol = 1e-8;

HinfResult hinf_norm(const StateSpace& sys, double rel_tol = kDefaultHinfTol);

struct PoleViolation {
  double value = 0.0;
  std::vector<int> active;
};

/// v = max_lambda max{Re + alpha, Re + zeta |lambda| (complex lambda only), |lambda| - omega_max};
/// raw, unnormalized.
PoleViolation pole_region_violation(const Spectrum& spectrum, const PoleGoal& goal);

/// The three per-eigenvalue terms, in order decay, damping, frequency; damping is -inf for real lambda.
std::array<double, 3> pole_terms(Complex lambda, const PoleGoal& goal);

}  // namespace structune
