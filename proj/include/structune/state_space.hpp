#pragma once

#include <complex>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace structune {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Dense continuous-time realization (A, B, C, D). nx = 0 is a static gain.
struct StateSpace {
  Matrix a, b, c, d;

  StateSpace() = default;
  /// Validates dimensions and finiteness; throws DimensionMismatch / InvalidArgument.
  StateSpace(Matrix a, Matrix b, Matrix c, Matrix d);

  static StateSpace gain(const Matrix& d);

  int nx() const { return static_cast<int>(a.rows()); }
  int nu() const { return static_cast<int>(d.cols()); }
  int ny() const { return static_cast<int>(d.rows()); }

  /// Restrict to a subset of inputs and outputs (channel selection).
  StateSpace select(std::span<const int> inputs, std::span<const int> outputs) const;

  StateSpace scaled(double alpha) const;
};

/// Plant with the (w, u) -> (z, y) partition.
struct PartitionedPlant {
  Matrix a, b1, b2, c1, c2, d11, d12, d21, d22;

  PartitionedPlant() = default;
  PartitionedPlant(Matrix a, Matrix b1, Matrix b2, Matrix c1, Matrix c2, Matrix d11,
                   Matrix d12, Matrix d21, Matrix d22);

  int nx() const { return static_cast<int>(a.rows()); }
  int nw() const { return static_cast<int>(b1.cols()); }
  int nu() const { return static_cast<int>(b2.cols()); }
  int nz() const { return static_cast<int>(c1.rows()); }
  int ny() const { return static_cast<int>(c2.rows()); }

  /// The whole plant as a single (w,u) -> (z,y) realization.
  StateSpace as_state_space() const;
};

struct Spectrum {
  std::vector<Complex> eigenvalues;
  double abscissa = -std::numeric_limits<double>::infinity();

  static Spectrum from(std::vector<Complex> eigenvalues);
};

/// Lower LFT F_l(P, K) with u = K y.
StateSpace lft_lower(const PartitionedPlant& p, const StateSpace& k);

struct ClosedPair {
  StateSpace system;
  Spectrum spectrum;
};

/// feedback(M, N) = M (I + N M)^{-1}: negative feedback of N around M.
ClosedPair closed_pair(const StateSpace& m, const StateSpace& n);

/// C (j omega I - A)^{-1} B + D.
CMatrix freq_response(const StateSpace& sys, double omega);
/// Same, at an arbitrary complex point s.
CMatrix eval_at(const StateSpace& sys, Complex s);

Spectrum poles(const StateSpace& sys);

enum class ComposeMode {
  Series,     // systems[0] first, output feeds systems[1], ...
  Parallel,   // shared input, outputs stacked
  BlockDiag,  // independent inputs and outputs
  Sum,        // shared input, outputs added
};

StateSpace compose(ComposeMode mode, std::span<const StateSpace> systems);

/// Smallest-singular-value guard used for every algebraic loop: sigma_min > 1e-10 (1 + ||D||).
bool well_posed(const Matrix& loop, double d_norm);

double max_singular_value(const CMatrix& m);

}  // namespace structune
