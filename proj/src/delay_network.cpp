#include "structune/delay_network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "structune/error.hpp"

namespace structune {

namespace {

Matrix dense(const std::vector<DelayNetwork::Link>& links, int rows, int cols) {
  Matrix m = Matrix::Zero(rows, cols);
  for (const auto& l : links) m(l.row, l.col) += l.gain;
  return m;
}

}  // namespace

DelayNetwork::DelayNetwork(int n_inputs, int n_outputs) : n_in_(n_inputs), n_out_(n_outputs) {
  if (n_inputs < 0 || n_outputs < 0) throw Error(ErrorKind::InvalidArgument, "negative port count");
}

DelayNetwork DelayNetwork::from_system(const StateSpace& sys) {
  DelayNetwork n(sys.nu(), sys.ny());
  const int b = n.add_system(sys);
  for (int i = 0; i < sys.nu(); ++i) n.connect_input(i, b, i);
  for (int o = 0; o < sys.ny(); ++o) n.connect_output(b, o, o);
  return n;
}

DelayNetwork DelayNetwork::gain(const Matrix& d) { return from_system(StateSpace::gain(d)); }

int DelayNetwork::add_block(Block b) {
  b.in_offset = nu_;
  b.out_offset = ny_;
  b.x_offset = nx_;
  nu_ += b.nu();
  ny_ += b.ny();
  nx_ += b.nx();
  blocks_.push_back(std::move(b));
  return static_cast<int>(blocks_.size()) - 1;
}

int DelayNetwork::add_system(const StateSpace& sys) {
  Block b;
  b.kind = sys.nx() > 0 ? BlockKind::System : BlockKind::Gain;
  b.sys = sys;
  return add_block(std::move(b));
}

int DelayNetwork::add_gain(const Matrix& d) { return add_system(StateSpace::gain(d)); }

int DelayNetwork::add_delay(double theta, int width) {
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw Error(ErrorKind::InvalidArgument, "delay must be finite and >= 0");
  if (width < 1) throw Error(ErrorKind::InvalidArgument, "delay width must be >= 1");
  Block b;
  b.kind = BlockKind::Delay;
  b.theta = theta;
  b.width = width;
  return add_block(std::move(b));
}

void DelayNetwork::check_block_port(int block, int port, bool input) const {
  if (block < 0 || block >= static_cast<int>(blocks_.size()))
    throw Error(ErrorKind::InvalidArgument, "unknown block " + std::to_string(block));
  const int n = input ? blocks_[block].nu() : blocks_[block].ny();
  if (port < 0 || port >= n) throw Error(ErrorKind::DimensionMismatch, "port out of range on block " + std::to_string(block));
}

void DelayNetwork::connect(int src_block, int src_port, int dst_block, int dst_port, double gain) {
  check_block_port(src_block, src_port, false);
  check_block_port(dst_block, dst_port, true);
  w_.push_back({blocks_[dst_block].in_offset + dst_port, blocks_[src_block].out_offset + src_port, gain});
}

void DelayNetwork::connect_input(int ext, int dst_block, int dst_port, double gain) {
  if (ext < 0 || ext >= n_in_) throw Error(ErrorKind::DimensionMismatch, "external input out of range");
  check_block_port(dst_block, dst_port, true);
  v_.push_back({blocks_[dst_block].in_offset + dst_port, ext, gain});
}

void DelayNetwork::connect_output(int src_block, int src_port, int out, double gain) {
  if (out < 0 || out >= n_out_) throw Error(ErrorKind::DimensionMismatch, "external output out of range");
  check_block_port(src_block, src_port, false);
  wo_.push_back({out, blocks_[src_block].out_offset + src_port, gain});
}

void DelayNetwork::connect_through(int ext, int out, double gain) {
  if (ext < 0 || ext >= n_in_ || out < 0 || out >= n_out_)
    throw Error(ErrorKind::DimensionMismatch, "feedthrough port out of range");
  vo_.push_back({out, ext, gain});
}

DelayNetwork::Embedded DelayNetwork::embed(const DelayNetwork& sub) {
  const int in_b = add_gain(Matrix::Identity(sub.n_in_, sub.n_in_));
  const int base = static_cast<int>(blocks_.size());
  for (const auto& b : sub.blocks_) {
    if (b.kind == BlockKind::Delay)
      add_delay(b.theta, b.width);
    else
      add_system(b.sys);
  }
  const int out_b = add_gain(Matrix::Identity(sub.n_out_, sub.n_out_));
  const int u0 = blocks_[base].in_offset;  // out_b when sub has no blocks
  const int y0 = blocks_[base].out_offset;
  const int in_y = blocks_[in_b].out_offset, out_u = blocks_[out_b].in_offset;
  for (const auto& l : sub.w_) w_.push_back({u0 + l.row, y0 + l.col, l.gain});
  for (const auto& l : sub.v_) w_.push_back({u0 + l.row, in_y + l.col, l.gain});
  for (const auto& l : sub.wo_) w_.push_back({out_u + l.row, y0 + l.col, l.gain});
  for (const auto& l : sub.vo_) w_.push_back({out_u + l.row, in_y + l.col, l.gain});
  return {in_b, out_b};
}

double DelayNetwork::min_delay() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks_)
    if (b.kind == BlockKind::Delay && b.theta > 0.0) m = std::min(m, b.theta);
  return m;
}

double DelayNetwork::max_delay() const {
  double m = 0.0;
  for (const auto& b : blocks_)
    if (b.kind == BlockKind::Delay) m = std::max(m, b.theta);
  return m;
}

Matrix DelayNetwork::w() const { return dense(w_, nu_, ny_); }
Matrix DelayNetwork::v() const { return dense(v_, nu_, n_in_); }
Matrix DelayNetwork::wo() const { return dense(wo_, n_out_, ny_); }
Matrix DelayNetwork::vo() const { return dense(vo_, n_out_, n_in_); }

CMatrix DelayNetwork::response(Complex s) const {
  CMatrix h = CMatrix::Zero(ny_, nu_);
  for (const auto& b : blocks_) {
    if (b.kind == BlockKind::Delay)
      h.block(b.out_offset, b.in_offset, b.width, b.width) =
          std::exp(-s * b.theta) * CMatrix::Identity(b.width, b.width);
    else
      h.block(b.out_offset, b.in_offset, b.ny(), b.nu()) = eval_at(b.sys, s);
  }
  const CMatrix wc = w().cast<Complex>();
  const CMatrix m = CMatrix::Identity(ny_, ny_) - h * wc;
  Eigen::FullPivLU<CMatrix> lu(m);
  if (ny_ > 0 && !lu.isInvertible())
    throw Error(ErrorKind::ResolventSingular, "network loop singular at the evaluation point");
  const CMatrix y = ny_ > 0 ? CMatrix(lu.solve(h * v().cast<Complex>())) : CMatrix::Zero(0, n_in_);
  return wo().cast<Complex>() * y + vo().cast<Complex>();
}

DelayNetwork feedback(const DelayNetwork& m, const DelayNetwork& n, double sign) {
  if (n.n_inputs() != m.n_outputs() || n.n_outputs() != m.n_inputs())
    throw Error(ErrorKind::DimensionMismatch, "feedback: port counts do not match");
  DelayNetwork net(m.n_inputs(), m.n_outputs());
  const auto em = net.embed(m);
  const auto en = net.embed(n);
  for (int i = 0; i < m.n_inputs(); ++i) {
    net.connect_input(i, em.input_block, i);
    net.connect(en.output_block, i, em.input_block, i, -sign);
  }
  for (int o = 0; o < m.n_outputs(); ++o) {
    net.connect(em.output_block, o, en.input_block, o);
    net.connect_output(em.output_block, o, o);
  }
  return net;
}

DelayNetwork parallel_sum(const DelayNetwork& a, const DelayNetwork& b) {
  if (a.n_inputs() != b.n_inputs() || a.n_outputs() != b.n_outputs())
    throw Error(ErrorKind::DimensionMismatch, "parallel_sum: port counts differ");
  DelayNetwork net(a.n_inputs(), a.n_outputs());
  const auto ea = net.embed(a);
  const auto eb = net.embed(b);
  for (int i = 0; i < a.n_inputs(); ++i) {
    net.connect_input(i, ea.input_block, i);
    net.connect_input(i, eb.input_block, i);
  }
  for (int o = 0; o < a.n_outputs(); ++o) {
    net.connect_output(ea.output_block, o, o);
    net.connect_output(eb.output_block, o, o);
  }
  return net;
}

DelayNetwork series(const DelayNetwork& a, const DelayNetwork& b) {
  if (a.n_outputs() != b.n_inputs()) throw Error(ErrorKind::DimensionMismatch, "series: port counts differ");
  DelayNetwork net(a.n_inputs(), b.n_outputs());
  const auto ea = net.embed(a);
  const auto eb = net.embed(b);
  for (int i = 0; i < a.n_inputs(); ++i) net.connect_input(i, ea.input_block, i);
  for (int k = 0; k < a.n_outputs(); ++k) net.connect(ea.output_block, k, eb.input_block, k);
  for (int o = 0; o < b.n_outputs(); ++o) net.connect_output(eb.output_block, o, o);
  return net;
}

NetworkSimulator::NetworkSimulator(const DelayNetwork& net, double dt) : net_(net), dt_(dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (dt > net.min_delay() / 10.0 * (1.0 + 1e-12))
    throw Error(ErrorKind::StepTooLarge, "dt exceeds a tenth of the smallest delay");
  x_ = Vector::Zero(net.n_states());
  w_ = net.w();
  v_ = net.v();
  wo_ = net.wo();
  vo_ = net.vo();
  const int ny = net.n_block_outputs();
  dblk_ = Matrix::Zero(ny, net.n_block_inputs());
  for (std::size_t i = 0; i < net.blocks().size(); ++i) {
    const auto& b = net.blocks()[i];
    if (b.kind == DelayNetwork::BlockKind::Delay) {
      delay_blocks_.push_back(static_cast<int>(i));
      if (b.theta == 0.0) dblk_.block(b.out_offset, b.in_offset, b.width, b.width).setIdentity();
    } else {
      dblk_.block(b.out_offset, b.in_offset, b.ny(), b.nu()) = b.sys.d;
    }
  }
  history_.resize(delay_blocks_.size());
  horizon_ = net.max_delay() + 3.0 * dt;
  if (ny > 0) {
    const Matrix m = Matrix::Identity(ny, ny) - dblk_ * w_;
    if (!well_posed(m, dblk_.norm() * (1.0 + w_.norm())))
      throw Error(ErrorKind::AlgebraicLoop, "delay-free loop is singular");
    loop_.compute(m);
  }
}

Vector NetworkSimulator::delayed(int k, double tq) const {
  const auto& h = history_[k];
  const int width = net_.blocks()[delay_blocks_[k]].width;
  if (h.empty() || tq < h.front().first) return Vector::Zero(width);
  if (tq >= h.back().first) return h.back().second;
  auto it = std::upper_bound(h.begin(), h.end(), tq, [](double t, const auto& e) { return t < e.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double a = (tq - lo.first) / (hi.first - lo.first);
  return (1.0 - a) * lo.second + a * hi.second;
}

NetworkSimulator::Signals NetworkSimulator::signals(double t, const Vector& x, const Vector& e) const {
  if (e.size() != net_.n_inputs()) throw Error(ErrorKind::DimensionMismatch, "external input has wrong size");
  const int ny = net_.n_block_outputs();
  Vector free = Vector::Zero(ny);
  for (const auto& b : net_.blocks())
    if (b.kind == DelayNetwork::BlockKind::System) free.segment(b.out_offset, b.ny()) = b.sys.c * x.segment(b.x_offset, b.nx());
  for (std::size_t k = 0; k < delay_blocks_.size(); ++k) {
    const auto& b = net_.blocks()[delay_blocks_[k]];
    if (b.theta > 0.0) free.segment(b.out_offset, b.width) = delayed(static_cast<int>(k), t - b.theta);
  }
  Signals s;
  s.y = ny > 0 ? Vector(loop_.solve(free + dblk_ * (v_ * e))) : Vector::Zero(0);
  s.u = w_ * s.y + v_ * e;
  return s;
}

Vector NetworkSimulator::derivative(double t, const Vector& x, const Vector& e) const {
  const Signals s = signals(t, x, e);
  Vector dx(x.size());
  for (const auto& b : net_.blocks())
    if (b.kind == DelayNetwork::BlockKind::System)
      dx.segment(b.x_offset, b.nx()) = b.sys.a * x.segment(b.x_offset, b.nx()) + b.sys.b * s.u.segment(b.in_offset, b.nu());
  return dx;
}

Vector NetworkSimulator::outputs(const Vector& e) const {
  const Signals s = signals(t_, x_, e);
  return wo_ * s.y + vo_ * e;
}

void NetworkSimulator::commit(const Vector& e) {
  if (delay_blocks_.empty()) return;
  const Signals s = signals(t_, x_, e);
  for (std::size_t k = 0; k < delay_blocks_.size(); ++k) {
    const auto& b = net_.blocks()[delay_blocks_[k]];
    auto& h = history_[k];
    if (!h.empty() && h.back().first >= t_) h.pop_back();
    h.emplace_back(t_, s.u.segment(b.in_offset, b.width));
    while (h.size() > 2 && h[1].first < t_ - horizon_) h.pop_front();
  }
}

void NetworkSimulator::advance(const InputFn& e) {
  const double h = dt_;
  const Vector e0 = e(t_), em = e(t_ + 0.5 * h), e1 = e(t_ + h);
  const Vector k1 = derivative(t_, x_, e0);
  const Vector k2 = derivative(t_ + 0.5 * h, x_ + 0.5 * h * k1, em);
  const Vector k3 = derivative(t_ + 0.5 * h, x_ + 0.5 * h * k2, em);
  const Vector k4 = derivative(t_ + h, x_ + h * k3, e1);
  x_ += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  t_ += h;
}

void NetworkSimulator::step(const InputFn& e) {
  advance(e);
  commit(e(t_));
}

Traces simulate_network(const DelayNetwork& net, const NetworkSimulator::InputFn& inputs, double dt, double horizon) {
  if (!(horizon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be >= 0");
  NetworkSimulator sim(net, dt);
  const int steps = static_cast<int>(std::llround(horizon / dt));
  Traces tr;
  tr.outputs.resize(steps + 1, net.n_outputs());
  tr.inputs.resize(steps + 1, net.n_inputs());
  sim.commit(inputs(0.0));
  for (int n = 0; n <= steps; ++n) {
    const double t = n * dt;
    const Vector e = inputs(t);
    tr.t.push_back(t);
    tr.inputs.row(n) = e.transpose();
    tr.outputs.row(n) = sim.outputs(e).transpose();
    if (n < steps) {
      sim.step(inputs);
    }
  }
  return tr;
}

}  // namespace structune
