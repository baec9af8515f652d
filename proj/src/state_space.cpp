#include "structune/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "structune/error.hpp"

namespace structune {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::DimensionMismatch, what);
}

void require_finite(const Matrix& m, const char* name) {
  if (!m.allFinite()) throw Error(ErrorKind::InvalidArgument, std::string(name) + " has non-finite entries");
}

Matrix inverse_checked(const Matrix& loop, double d_norm, const char* context) {
  if (!well_posed(loop, d_norm)) {
    throw Error(ErrorKind::IllPosed, std::string(context) + ": algebraic loop matrix is numerically singular");
  }
  return loop.partialPivLu().inverse();
}

}  // namespace

StateSpace::StateSpace(Matrix a_, Matrix b_, Matrix c_, Matrix d_)
    : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)), d(std::move(d_)) {
  require(a.rows() == a.cols(), "A must be square");
  require(b.rows() == a.rows(), "B rows must equal nx");
  require(c.cols() == a.rows(), "C cols must equal nx");
  require(d.rows() == c.rows(), "D rows must equal C rows");
  require(d.cols() == b.cols(), "D cols must equal B cols");
  require_finite(a, "A");
  require_finite(b, "B");
  require_finite(c, "C");
  require_finite(d, "D");
}

StateSpace StateSpace::gain(const Matrix& d) {
  return StateSpace(Matrix(0, 0), Matrix(0, d.cols()), Matrix(d.rows(), 0), d);
}

StateSpace StateSpace::select(std::span<const int> inputs, std::span<const int> outputs) const {
  Matrix bs(nx(), static_cast<Eigen::Index>(inputs.size()));
  Matrix cs(static_cast<Eigen::Index>(outputs.size()), nx());
  Matrix ds(cs.rows(), bs.cols());
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    require(inputs[j] >= 0 && inputs[j] < nu(), "input index out of range");
    bs.col(j) = b.col(inputs[j]);
  }
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    require(outputs[i] >= 0 && outputs[i] < ny(), "output index out of range");
    cs.row(i) = c.row(outputs[i]);
    for (std::size_t j = 0; j < inputs.size(); ++j) ds(i, j) = d(outputs[i], inputs[j]);
  }
  return StateSpace(a, bs, cs, ds);
}

StateSpace StateSpace::scaled(double alpha) const { return StateSpace(a, b, alpha * c, alpha * d); }

PartitionedPlant::PartitionedPlant(Matrix a_, Matrix b1_, Matrix b2_, Matrix c1_, Matrix c2_,
                                   Matrix d11_, Matrix d12_, Matrix d21_, Matrix d22_)
    : a(std::move(a_)),
      b1(std::move(b1_)),
      b2(std::move(b2_)),
      c1(std::move(c1_)),
      c2(std::move(c2_)),
      d11(std::move(d11_)),
      d12(std::move(d12_)),
      d21(std::move(d21_)),
      d22(std::move(d22_)) {
  const auto n = a.rows();
  require(a.cols() == n, "A must be square");
  require(b1.rows() == n && b2.rows() == n, "B1/B2 rows must equal nP");
  require(c1.cols() == n && c2.cols() == n, "C1/C2 cols must equal nP");
  require(d11.rows() == c1.rows() && d11.cols() == b1.cols(), "D11 must be nz x nw");
  require(d12.rows() == c1.rows() && d12.cols() == b2.cols(), "D12 must be nz x nu");
  require(d21.rows() == c2.rows() && d21.cols() == b1.cols(), "D21 must be ny x nw");
  require(d22.rows() == c2.rows() && d22.cols() == b2.cols(), "D22 must be ny x nu");
  for (const Matrix* m : {&a, &b1, &b2, &c1, &c2, &d11, &d12, &d21, &d22}) require_finite(*m, "plant matrix");
}

StateSpace PartitionedPlant::as_state_space() const {
  Matrix b(nx(), nw() + nu());
  b << b1, b2;
  Matrix c(nz() + ny(), nx());
  c << c1, c2;
  Matrix d(nz() + ny(), nw() + nu());
  d << d11, d12, d21, d22;
  return StateSpace(a, b, c, d);
}

Spectrum Spectrum::from(std::vector<Complex> eigenvalues) {
  Spectrum s;
  s.eigenvalues = std::move(eigenvalues);
  for (const auto& l : s.eigenvalues) s.abscissa = std::max(s.abscissa, l.real());
  return s;
}

bool well_posed(const Matrix& loop, double d_norm) {
  if (loop.size() == 0) return true;
  Eigen::JacobiSVD<Matrix> svd(loop);
  return svd.singularValues().minCoeff() > 1e-10 * (1.0 + d_norm);
}

double max_singular_value(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

StateSpace lft_lower(const PartitionedPlant& p, const StateSpace& k) {
  require(k.nu() == p.ny() && k.ny() == p.nu(), "controller must map ny measurements to nu controls");
  const int nu = p.nu(), ny = p.ny();
  const Matrix& dk = k.d;
  const double dnorm = std::max(dk.norm(), p.d22.norm());
  const Matrix e1 = inverse_checked(Matrix::Identity(nu, nu) - dk * p.d22, dnorm, "lft_lower");
  const Matrix e2 = inverse_checked(Matrix::Identity(ny, ny) - p.d22 * dk, dnorm, "lft_lower");

  const int np = p.nx(), nk = k.nx();
  Matrix a(np + nk, np + nk);
  a.topLeftCorner(np, np) = p.a + p.b2 * e1 * dk * p.c2;
  a.topRightCorner(np, nk) = p.b2 * e1 * k.c;
  a.bottomLeftCorner(nk, np) = k.b * e2 * p.c2;
  a.bottomRightCorner(nk, nk) = k.a + k.b * e2 * p.d22 * k.c;

  Matrix b(np + nk, p.nw());
  b.topRows(np) = p.b1 + p.b2 * e1 * dk * p.d21;
  b.bottomRows(nk) = k.b * e2 * p.d21;

  Matrix c(p.nz(), np + nk);
  c.leftCols(np) = p.c1 + p.d12 * e1 * dk * p.c2;
  c.rightCols(nk) = p.d12 * e1 * k.c;

  Matrix d = p.d11 + p.d12 * e1 * dk * p.d21;
  return StateSpace(std::move(a), std::move(b), std::move(c), std::move(d));
}

ClosedPair closed_pair(const StateSpace& m, const StateSpace& n) {
  require(n.nu() == m.ny() && n.ny() == m.nu(), "feedback pair dimensions incompatible");
  const int nm = m.nx(), nn = n.nx();
  const int p = m.ny();  // size of the M output
  const double dnorm = std::max(m.d.norm(), n.d.norm());
  // yM = F (Cm xm - Dm Cn xn + Dm r), e = r - Cn xn - Dn yM
  const Matrix f = inverse_checked(Matrix::Identity(p, p) + m.d * n.d, dnorm, "closed_pair");

  Matrix ym_x(p, nm + nn);
  ym_x.leftCols(nm) = f * m.c;
  ym_x.rightCols(nn) = -f * m.d * n.c;
  const Matrix ym_r = f * m.d;

  Matrix e_x(m.nu(), nm + nn);
  e_x.leftCols(nm) = Matrix::Zero(m.nu(), nm);
  e_x.rightCols(nn) = -n.c;
  e_x -= n.d * ym_x;
  const Matrix e_r = Matrix::Identity(m.nu(), m.nu()) - n.d * ym_r;

  Matrix a = Matrix::Zero(nm + nn, nm + nn);
  a.topLeftCorner(nm, nm) = m.a;
  a.bottomRightCorner(nn, nn) = n.a;
  a.topRows(nm) += m.b * e_x;
  a.bottomRows(nn) += n.b * ym_x;

  Matrix b(nm + nn, m.nu());
  b.topRows(nm) = m.b * e_r;
  b.bottomRows(nn) = n.b * ym_r;

  StateSpace sys(std::move(a), std::move(b), ym_x, ym_r);
  Spectrum spec = sys.nx() > 0 ? poles(sys) : Spectrum{};
  return {std::move(sys), std::move(spec)};
}

CMatrix eval_at(const StateSpace& sys, Complex s) {
  CMatrix g = sys.d.cast<Complex>();
  if (sys.nx() == 0) return g;
  CMatrix resolvent = s * CMatrix::Identity(sys.nx(), sys.nx()) - sys.a.cast<Complex>();
  Eigen::PartialPivLU<CMatrix> lu(resolvent);
  if (!(lu.rcond() > 1e-12)) {
    std::ostringstream os;
    os << "s = " << s << " is (numerically) a pole of the system";
    throw Error(ErrorKind::ResolventSingular, os.str());
  }
  g += sys.c.cast<Complex>() * lu.solve(sys.b.cast<Complex>());
  return g;
}

CMatrix freq_response(const StateSpace& sys, double omega) { return eval_at(sys, Complex(0.0, omega)); }

Spectrum poles(const StateSpace& sys) {
  if (sys.nx() < 1) throw Error(ErrorKind::InvalidArgument, "poles of a static gain are undefined");
  Eigen::EigenSolver<Matrix> es(sys.a, true);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::EigenFailure, "eigenvalue iteration did not converge");
  std::vector<Complex> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  return Spectrum::from(std::move(ev));
}

StateSpace compose(ComposeMode mode, std::span<const StateSpace> systems) {
  require(!systems.empty(), "compose needs at least one system");
  StateSpace acc = systems[0];
  for (std::size_t i = 1; i < systems.size(); ++i) {
    const StateSpace& s = systems[i];
    const int n1 = acc.nx(), n2 = s.nx();
    Matrix a = Matrix::Zero(n1 + n2, n1 + n2);
    a.topLeftCorner(n1, n1) = acc.a;
    a.bottomRightCorner(n2, n2) = s.a;
    switch (mode) {
      case ComposeMode::Series: {
        require(s.nu() == acc.ny(), "series: output/input size mismatch");
        a.bottomLeftCorner(n2, n1) = s.b * acc.c;
        Matrix b(n1 + n2, acc.nu());
        b << acc.b, s.b * acc.d;
        Matrix c(s.ny(), n1 + n2);
        c << s.d * acc.c, s.c;
        acc = StateSpace(std::move(a), std::move(b), std::move(c), s.d * acc.d);
        break;
      }
      case ComposeMode::Parallel:
      case ComposeMode::Sum: {
        require(s.nu() == acc.nu(), "parallel/sum: input sizes differ");
        Matrix b(n1 + n2, acc.nu());
        b << acc.b, s.b;
        if (mode == ComposeMode::Sum) {
          require(s.ny() == acc.ny(), "sum: output sizes differ");
          Matrix c(acc.ny(), n1 + n2);
          c << acc.c, s.c;
          acc = StateSpace(std::move(a), std::move(b), std::move(c), acc.d + s.d);
        } else {
          Matrix c = Matrix::Zero(acc.ny() + s.ny(), n1 + n2);
          c.topLeftCorner(acc.ny(), n1) = acc.c;
          c.bottomRightCorner(s.ny(), n2) = s.c;
          Matrix d(acc.ny() + s.ny(), acc.nu());
          d << acc.d, s.d;
          acc = StateSpace(std::move(a), std::move(b), std::move(c), std::move(d));
        }
        break;
      }
      case ComposeMode::BlockDiag: {
        Matrix b = Matrix::Zero(n1 + n2, acc.nu() + s.nu());
        b.topLeftCorner(n1, acc.nu()) = acc.b;
        b.bottomRightCorner(n2, s.nu()) = s.b;
        Matrix c = Matrix::Zero(acc.ny() + s.ny(), n1 + n2);
        c.topLeftCorner(acc.ny(), n1) = acc.c;
        c.bottomRightCorner(s.ny(), n2) = s.c;
        Matrix d = Matrix::Zero(acc.ny() + s.ny(), acc.nu() + s.nu());
        d.topLeftCorner(acc.ny(), acc.nu()) = acc.d;
        d.bottomRightCorner(s.ny(), s.nu()) = s.d;
        acc = StateSpace(std::move(a), std::move(b), std::move(c), std::move(d));
        break;
      }
    }
  }
  return acc;
}

}  // namespace structune
