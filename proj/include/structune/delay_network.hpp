#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "structune/state_space.hpp"

namespace structune {

/// Interconnection of rational blocks, static gains and pure delays.
///
/// Every block input is a linear combination of external inputs and block
/// outputs; every network output is a linear combination of block outputs and
/// external inputs. Instantaneous (delay-free) loops are allowed as long as the
/// algebraic system they form is nonsingular.
class DelayNetwork {
 public:
  enum class BlockKind { System, Gain, Delay };

  struct Block {
    BlockKind kind = BlockKind::Gain;
    StateSpace sys;      // System and Gain (nx = 0)
    double theta = 0.0;  // Delay
    int width = 0;       // Delay
    int in_offset = 0, out_offset = 0, x_offset = 0;
    int nu() const { return kind == BlockKind::Delay ? width : sys.nu(); }
    int ny() const { return kind == BlockKind::Delay ? width : sys.ny(); }
    int nx() const { return kind == BlockKind::System ? sys.nx() : 0; }
  };

  struct Link {
    int row, col;
    double gain;
  };

  DelayNetwork(int n_inputs, int n_outputs);

  static DelayNetwork from_system(const StateSpace& sys);
  static DelayNetwork gain(const Matrix& d);

  int add_system(const StateSpace& sys);
  int add_gain(const Matrix& d);
  int add_delay(double theta, int width = 1);

  void connect(int src_block, int src_port, int dst_block, int dst_port, double gain = 1.0);
  void connect_input(int ext, int dst_block, int dst_port, double gain = 1.0);
  void connect_output(int src_block, int src_port, int out, double gain = 1.0);
  void connect_through(int ext, int out, double gain = 1.0);

  /// Copies `sub` into this network behind identity pass-through blocks:
  /// drive input_block's ports, read output_block's ports.
  struct Embedded {
    int input_block, output_block;
  };
  Embedded embed(const DelayNetwork& sub);

  int n_inputs() const { return n_in_; }
  int n_outputs() const { return n_out_; }
  int n_states() const { return nx_; }
  int n_block_inputs() const { return nu_; }
  int n_block_outputs() const { return ny_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  /// Smallest positive delay (inf when none).
  double min_delay() const;
  double max_delay() const;

  /// Transfer matrix at complex s: Wo (I - H(s) W)^{-1} H(s) V + Vo.
  CMatrix response(Complex s) const;
  CMatrix freq_response(double omega) const { return response(Complex(0.0, omega)); }

  // Connection matrices: block inputs U = W Y + V e, outputs o = Wo Y + Vo e.
  Matrix w() const;
  Matrix v() const;
  Matrix wo() const;
  Matrix vo() const;

  std::vector<std::string> input_names, output_names;

 private:
  int add_block(Block b);
  void check_block_port(int block, int port, bool input) const;

  int n_in_, n_out_;
  int nu_ = 0, ny_ = 0, nx_ = 0;
  std::vector<Block> blocks_;
  std::vector<Link> w_, v_, wo_, vo_;
};

/// M (I + sign * N M)^{-1}: the loop e -> M -> out, with N fed back from M's output.
/// sign = +1 is negative feedback, sign = -1 positive feedback.
DelayNetwork feedback(const DelayNetwork& m, const DelayNetwork& n, double sign = 1.0);
/// Shared input, outputs summed.
DelayNetwork parallel_sum(const DelayNetwork& a, const DelayNetwork& b);
/// a first, then b.
DelayNetwork series(const DelayNetwork& a, const DelayNetwork& b);

/// Fixed-step simulator: RK4 on rational states, ring-buffered delay lines with
/// linear interpolation (zero history before t = 0), algebraic loops solved per
/// evaluation.
class NetworkSimulator {
 public:
  using InputFn = std::function<Vector(double)>;

  /// Throws StepTooLarge when dt > min_delay / 10, AlgebraicLoop on a singular loop.
  NetworkSimulator(const DelayNetwork& net, double dt);

  double time() const { return t_; }
  double dt() const { return dt_; }
  const Vector& state() const { return x_; }

  /// Network outputs at the current time for external input e.
  Vector outputs(const Vector& e) const;
  /// Records the delay-line inputs at the current time.
  void commit(const Vector& e);
  /// RK4 over one step; input sampled at t, t + dt/2, t + dt. Does not commit.
  void advance(const InputFn& e);
  /// advance + commit at the new time.
  void step(const InputFn& e);

 private:
  struct Signals {
    Vector y, u;
  };
  Signals signals(double t, const Vector& x, const Vector& e) const;
  Vector derivative(double t, const Vector& x, const Vector& e) const;
  Vector delayed(int delay_index, double tq) const;

  DelayNetwork net_;
  double dt_;
  double t_ = 0.0;
  Vector x_;
  Matrix w_, v_, wo_, vo_, dblk_;
  Eigen::PartialPivLU<Matrix> loop_;
  std::vector<int> delay_blocks_;
  std::vector<std::deque<std::pair<double, Vector>>> history_;
  double horizon_ = 0.0;
};

struct Traces {
  std::vector<double> t;
  Matrix outputs;  // one row per sample
  Matrix inputs;   // one row per sample
};

/// Simulates from zero state over [0, T] and samples every dt.
Traces simulate_network(const DelayNetwork& net, const NetworkSimulator::InputFn& inputs, double dt, double horizon);

}  // namespace structune
