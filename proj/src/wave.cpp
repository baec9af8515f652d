#include "structune/wave.hpp"

#include <cmath>

#include "structune/error.hpp"

namespace structune {

double wave_q_factor(double q) {
  if (!(q > 0.0) || !std::isfinite(q)) throw Error(ErrorKind::InvalidArgument, "q must be positive");
  if (std::abs(q - 1.0) < 1e-12) throw Error(ErrorKind::QEqualsOne, "q = 1 makes the decomposition singular");
  return (1.0 + q) / (1.0 - q);
}

StateSpace build_gtilde(double q) {
  wave_q_factor(q);
  const double c = 1.0 / (1.0 - q);
  Matrix a = Matrix::Zero(1, 1), b = Matrix::Ones(1, 1);
  Matrix cm(3, 1), d(3, 1);
  cm << c, c, 0.0;
  d << 0.0, 0.0, 0.5;
  return StateSpace(a, b, cm, d);
}

namespace {

StateSpace scaled_integrator(double k) {
  Matrix a = Matrix::Zero(1, 1), b = Matrix::Ones(1, 1), c = Matrix::Constant(1, 1, k), d = Matrix::Zero(1, 1);
  return StateSpace(a, b, c, d);
}

}  // namespace

DelayNetwork build_phi(double q) {
  const double big_q = wave_q_factor(q);
  DelayNetwork net(1, 3);
  const int d1 = net.add_delay(1.0);
  const int d2 = net.add_delay(2.0);
  const int i1 = net.add_system(scaled_integrator(-1.0 / (1.0 - q)));
  const int i2 = net.add_system(scaled_integrator(-big_q / 2.0));
  net.connect_input(0, d1, 0);
  net.connect_input(0, d2, 0);
  net.connect_input(0, i1, 0);
  net.connect(d1, 0, i1, 0, -1.0);
  net.connect_input(0, i2, 0);
  net.connect(d2, 0, i2, 0, -1.0);
  net.connect_output(i1, 0, 0);
  net.connect_output(i2, 0, 1);
  net.connect_output(d2, 0, 2, big_q / 2.0);
  net.input_names = {"v"};
  net.output_names = {"phi1", "phi2", "phi3"};
  return net;
}

CVector phi_closed_form(double q, Complex s) {
  const double big_q = wave_q_factor(q);
  CVector out(3);
  // (1 - e^{-s}) / s, with its limit 1 at s = 0.
  auto sinc_like = [](Complex z) { return std::abs(z) < 1e-8 ? Complex(1.0) - z / 2.0 : (1.0 - std::exp(-z)) / z; };
  out(0) = -sinc_like(s) / (1.0 - q);
  out(1) = -big_q * sinc_like(2.0 * s);
  out(2) = big_q / 2.0 * std::exp(-2.0 * s);
  return out;
}

Complex wave_transfer(double q, double xi, Complex s) {
  const Complex num = (1.0 - q) * std::exp(s * xi) + (1.0 + q) * std::exp(-s * xi);
  const Complex den = (1.0 - q) * std::exp(s) - (1.0 + q) * std::exp(-s);
  return num / (s * den);
}

CVector wave_outputs(double q, Complex s) {
  CVector g(3);
  g(0) = wave_transfer(q, 0.0, s);
  g(1) = wave_transfer(q, 1.0, s);
  g(2) = s * g(1);
  return g;
}

CVector prestabilized_outputs(double q, Complex s) {
  const CVector g = wave_outputs(q, s);
  return g / (1.0 + g(2));
}

Matrix wave_k0() {
  Matrix k(1, 3);
  k << 0.0, 0.0, 1.0;
  return k;
}

DelayNetwork recover_inner(const Matrix& k_tilde, double q) {
  if (k_tilde.rows() != 1 || k_tilde.cols() != 3) throw Error(ErrorKind::DimensionMismatch, "Kt must be 1x3");
  DelayNetwork net = feedback(DelayNetwork::gain(k_tilde), build_phi(q), -1.0);
  net.input_names = {"y1", "y2", "y3"};
  net.output_names = {"Ky"};
  return net;
}

DelayNetwork recover_controller(const Matrix& k_tilde, double q) {
  DelayNetwork net = parallel_sum(DelayNetwork::gain(wave_k0()), recover_inner(k_tilde, q));
  net.input_names = {"y1", "y2", "y3"};
  net.output_names = {"Kstar_y"};
  return net;
}

DelayNetwork prestabilized_network(double q) {
  DelayNetwork net = parallel_sum(DelayNetwork::from_system(build_gtilde(q)), build_phi(q));
  net.input_names = {"v"};
  net.output_names = {"y1", "y2", "y3"};
  return net;
}

DelayNetwork wave_closed_loop_network(const Matrix& k_tilde, double q) {
  DelayNetwork net(1, 4);
  const auto plant = net.embed(prestabilized_network(q));
  const auto ctrl = net.embed(recover_inner(k_tilde, q));
  net.connect_input(0, plant.input_block, 0);
  net.connect(ctrl.output_block, 0, plant.input_block, 0, -1.0);
  for (int i = 0; i < 3; ++i) {
    net.connect(plant.output_block, i, ctrl.input_block, i);
    net.connect_output(plant.output_block, i, i);
  }
  // u = v - y3 = r - K y - y3
  net.connect_through(0, 3);
  net.connect_output(ctrl.output_block, 0, 3, -1.0);
  net.connect_output(plant.output_block, 2, 3, -1.0);
  net.input_names = {"r"};
  net.output_names = {"y1", "y2", "y3", "u"};
  return net;
}

PartitionedPlant wave_design_plant(double q) {
  const StateSpace g = build_gtilde(q);
  Matrix one = Matrix::Ones(1, 1), zero = Matrix::Zero(1, 1);
  return PartitionedPlant(g.a, one, g.b, one, -g.c, zero, zero, -g.d, -g.d);
}

Matrix ScheduledGains::at(double q) const {
  Matrix k = nominal;
  double p = 1.0;
  for (const auto& t : terms) {
    p *= (q - q0);
    k += p * t;
  }
  return k;
}

ScheduledGains published_gains() {
  ScheduledGains g;
  g.nominal.resize(1, 3);
  g.nominal << -1.049, -1.049, -0.05402;
  Matrix k1(1, 3), k2(1, 3);
  k1 << -0.1102, -0.1102, -0.1053;
  k2 << 0.03901, 0.03901, 0.02855;
  g.terms = {k1, k2};
  g.q0 = 3.0;
  return g;
}

StructureSpec scheduled_structure(const Matrix& nominal, int degree, double q0) {
  StructureSpec s;
  s.variant = PolynomialScheduled{nominal, degree, q0};
  return s;
}

}  // namespace structune
