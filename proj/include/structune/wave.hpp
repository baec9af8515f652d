#pragma once

#include <vector>

#include "structune/controller_structures.hpp"
#include "structune/delay_network.hpp"
#include "structune/state_space.hpp"

namespace structune {

// Wave equation x_tt = x_xixi on [0,1] with anti-stable damping x_xi(0,t) = -q x_t(0,t)
// and boundary control x_xi(1,t) = u(t). Outputs y = (x(0,t), x(1,t), x_t(1,t)).

/// Q = (1 + q) / (1 - q). Throws QEqualsOne, InvalidArgument for q <= 0.
double wave_q_factor(double q);

/// Rational part: xdot = u, y1 = y2 = x / (1 - q), y3 = u / 2.
StateSpace build_gtilde(double q);

/// Stable delay part, input v, outputs
///   [-(1 - e^{-s}) / (s (1 - q)); -Q (1 - e^{-2s}) / (2 s); (Q / 2) e^{-2s}].
DelayNetwork build_phi(double q);
/// The same entries evaluated in closed form (s != 0 uses the exact expressions, s = 0 the limits).
CVector phi_closed_form(double q, Complex s);

/// Transfer from u to x(xi, .).
Complex wave_transfer(double q, double xi, Complex s);
/// [G(0,s); G(1,s); s G(1,s)].
CVector wave_outputs(double q, Complex s);
/// Plant prestabilized by u = v - y3: G / (1 + G3).
CVector prestabilized_outputs(double q, Complex s);

/// Inner stabilizing loop K0 = [0 0 1] (u = v - K0 y).
Matrix wave_k0();

/// Loop-transformed controller K = feedback(Kt, -Phi(q)) = Kt (I - Phi Kt)^{-1}; input y, output K y.
DelayNetwork recover_inner(const Matrix& k_tilde, double q);
/// K* = K0 + K; the plant input is u = r - K* y.
DelayNetwork recover_controller(const Matrix& k_tilde, double q);

/// Delay model of the prestabilized plant: G~ + Phi, input v, outputs y.
DelayNetwork prestabilized_network(double q);

/// Closed loop (G~ + Phi, K): external r, outputs [y1, y2, y3, u] with v = r - K y, u = v - y3.
DelayNetwork wave_closed_loop_network(const Matrix& k_tilde, double q);

/// Synthesis model at frozen q: one state, w enters at u, z = x, and y = -G~ outputs so that the
/// lower-LFT gain u = x y equals the negative-feedback gain Kt.
PartitionedPlant wave_design_plant(double q);

/// Kt(q) = nominal + sum_j (q - q0)^j terms[j-1].
struct ScheduledGains {
  Matrix nominal;
  std::vector<Matrix> terms;
  double q0 = 3.0;
  Matrix at(double q) const;
};

/// The published gains: nominal [-1.049 -1.049 -0.05402], first- and second-order terms.
ScheduledGains published_gains();

/// PolynomialScheduled structure for the schedule terms around nominal gains.
StructureSpec scheduled_structure(const Matrix& nominal, int degree, double q0);

}  // namespace structune
