#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "structune/controller_structures.hpp"
#include "structune/state_space.hpp"
#include "structune/sysnorms.hpp"

namespace structune {

/// Dense derivative of a closed-loop realization with respect to one parameter.
struct DerivQuad {
  Matrix a, b, c, d;
};
using DerivQuads = std::vector<DerivQuad>;

enum class SubgradientSource { Frequency, Eigenvalue, H2, Abscissa, Combined };

struct Subgradient {
  Vector vector;
  SubgradientSource source = SubgradientSource::Combined;
  double omega = 0.0;    // Frequency
  int eigen_index = -1;  // Eigenvalue / Abscissa
  int term = -1;         // Eigenvalue: 0 decay, 1 damping, 2 frequency
  bool degenerate = false;         // repeated top singular value
  bool finite_difference = false;  // defective eigenvalue fallback
};

/// Chain rule through the lower LFT, including the dependence of the loop inverses on D_K.
DerivQuads closed_loop_jacobian(const PartitionedPlant& p, const StateSpace& k, const ParamJacobian& jac);

/// Restrict derivative quads to a (w, z) channel, matching StateSpace::select.
DerivQuads select_channel(const DerivQuads& quads, std::span<const int> inputs, std::span<const int> outputs);

std::vector<Subgradient> hinf_subgradients(const StateSpace& clp, const DerivQuads& dquads,
                                           std::span<const double> peaks);

/// Gradient of the H2 norm (not its square).
Subgradient h2_gradient(const StateSpace& clp, const DerivQuads& dquads);

std::vector<Subgradient> pole_subgradients(const StateSpace& clp, const DerivQuads& dquads, const PoleGoal& goal,
                                           std::span<const int> active);

/// Subgradients of the spectral abscissa from every eigenvalue within `tol` of the maximum real part.
std::vector<Subgradient> abscissa_subgradients(const StateSpace& clp, const DerivQuads& dquads, double tol = 1e-8);

/// Central differences; default step 1e-6 (1 + |x_k|).
Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                            std::optional<double> h = {});

}  // namespace structune
