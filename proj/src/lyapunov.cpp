#include "structune/lyapunov.hpp"

#include <Eigen/Eigenvalues>

#include "structune/error.hpp"

namespace structune {

namespace {

Matrix solve_schur(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  Eigen::ComplexSchur<Matrix> schur(a);
  if (schur.info() != Eigen::Success) throw Error(ErrorKind::EigenFailure, "Schur decomposition failed");
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();
  // T Y + Y T^H = -U^H Q U, T upper triangular; columns solved right to left.
  const CMatrix rhs = -(u.adjoint() * q.cast<Complex>() * u);
  CMatrix y = CMatrix::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    CVector col = rhs.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) col -= std::conj(t(j, k)) * y.col(k);
    CMatrix m = t;
    m.diagonal().array() += std::conj(t(j, j));
    y.col(j) = m.triangularView<Eigen::Upper>().solve(col);
  }
  Matrix x = (u * y * u.adjoint()).real();
  return 0.5 * (x + x.transpose());
}

Matrix solve_kronecker(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  Matrix k = Matrix::Zero(n * n, n * n);
  // vec(A X + X A^T) = (I kron A + A kron I) vec(X), column-major vec.
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) += id(i, j) * a;
      k.block(i * n, j * n, n, n) += a(i, j) * id;
    }
  Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
  Vector v = k.fullPivLu().solve(rhs);
  Matrix x = Eigen::Map<Matrix>(v.data(), n, n);
  return 0.5 * (x + x.transpose());
}

double residual(const Matrix& a, const Matrix& q, const Matrix& x) {
  return (a * x + x * a.transpose() + q).norm() / (1.0 + q.norm() + 2.0 * a.norm() * x.norm());
}

}  // namespace

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "solve_lyapunov: A and Q must be square and of equal size");
  }
  if (a.rows() == 0) return Matrix(0, 0);
  Matrix x = solve_schur(a, q);
  if (residual(a, q, x) > 1e-10 && a.rows() <= 30) {
    Matrix xk = solve_kronecker(a, q);
    if (residual(a, q, xk) < residual(a, q, x)) x = std::move(xk);
  }
  return x;
}

}  // namespace structune
