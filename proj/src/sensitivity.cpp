#include "structune/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "structune/error.hpp"

namespace structune {

namespace {

struct EigenDecomposition {
  std::vector<Complex> values;
  CMatrix right;              // columns v_i, unit norm
  CMatrix left_h;             // rows w_i^H with w_i^H v_i = 1
  std::vector<double> cosines;  // |w^H v| / (|w| |v|); tiny means (nearly) defective
};

EigenDecomposition decompose(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, true);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::EigenFailure, "eigenvalue iteration did not converge");
  EigenDecomposition ed;
  ed.values.assign(es.eigenvalues().begin(), es.eigenvalues().end());
  ed.right = es.eigenvectors();
  const auto n = a.rows();
  ed.cosines.assign(n, 0.0);
  Eigen::FullPivLU<CMatrix> lu(ed.right);
  if (lu.isInvertible()) {
    ed.left_h = lu.inverse();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double wn = ed.left_h.row(i).norm(), vn = ed.right.col(i).norm();
      ed.cosines[i] = 1.0 / (wn * vn);
    }
  }
  return ed;
}

std::size_t nearest(const std::vector<Complex>& values, Complex target) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (std::abs(values[i] - target) < std::abs(values[best] - target)) best = i;
  return best;
}

double damping_term_derivative(Complex lambda, Complex dl, double zeta) {
  const double mag = std::abs(lambda);
  const double dmag = mag > 0.0 ? (std::conj(lambda) * dl).real() / mag : 0.0;
  return dl.real() + zeta * dmag;
}

double frequency_term_derivative(Complex lambda, Complex dl) {
  const double mag = std::abs(lambda);
  return mag > 0.0 ? (std::conj(lambda) * dl).real() / mag : std::abs(dl);
}

double term_derivative(int term, Complex lambda, Complex dl, const PoleGoal& goal) {
  switch (term) {
    case 0: return dl.real();
    case 1: return damping_term_derivative(lambda, dl, goal.min_damping);
    default: return frequency_term_derivative(lambda, dl);
  }
}

}  // namespace

DerivQuads closed_loop_jacobian(const PartitionedPlant& p, const StateSpace& k, const ParamJacobian& jac) {
  const int nu = p.nu(), ny = p.ny(), np = p.nx(), nk = k.nx();
  const double dnorm = std::max(k.d.norm(), p.d22.norm());
  const Matrix l1 = Matrix::Identity(nu, nu) - k.d * p.d22;
  const Matrix l2 = Matrix::Identity(ny, ny) - p.d22 * k.d;
  if (!well_posed(l1, dnorm) || !well_posed(l2, dnorm))
    throw Error(ErrorKind::IllPosed, "closed_loop_jacobian: I - D_K D22 is numerically singular");
  const Matrix e1 = l1.partialPivLu().inverse();
  const Matrix e2 = l2.partialPivLu().inverse();

  DerivQuads out;
  out.reserve(jac.quads.size());
  for (const auto& q : jac.quads) {
    const Matrix dak = q.a, dbk = q.b, dck = q.c, ddk = q.d;
    const Matrix de1 = e1 * ddk * p.d22 * e1;
    const Matrix de2 = e2 * p.d22 * ddk * e2;
    const Matrix d_e1dk = de1 * k.d + e1 * ddk;   // d(E1 D_K)
    const Matrix d_e1ck = de1 * k.c + e1 * dck;   // d(E1 C_K)
    const Matrix d_bke2 = dbk * e2 + k.b * de2;   // d(B_K E2)

    DerivQuad dq;
    dq.a = Matrix::Zero(np + nk, np + nk);
    dq.a.topLeftCorner(np, np) = p.b2 * d_e1dk * p.c2;
    dq.a.topRightCorner(np, nk) = p.b2 * d_e1ck;
    dq.a.bottomLeftCorner(nk, np) = d_bke2 * p.c2;
    dq.a.bottomRightCorner(nk, nk) = dak + d_bke2 * p.d22 * k.c + k.b * e2 * p.d22 * dck;

    dq.b = Matrix::Zero(np + nk, p.nw());
    dq.b.topRows(np) = p.b2 * d_e1dk * p.d21;
    dq.b.bottomRows(nk) = d_bke2 * p.d21;

    dq.c = Matrix::Zero(p.nz(), np + nk);
    dq.c.leftCols(np) = p.d12 * d_e1dk * p.c2;
    dq.c.rightCols(nk) = p.d12 * d_e1ck;

    dq.d = p.d12 * d_e1dk * p.d21;
    out.push_back(std::move(dq));
  }
  return out;
}

DerivQuads select_channel(const DerivQuads& quads, std::span<const int> inputs, std::span<const int> outputs) {
  DerivQuads out;
  out.reserve(quads.size());
  for (const auto& q : quads) {
    DerivQuad s;
    s.a = q.a;
    s.b.resize(q.b.rows(), static_cast<Eigen::Index>(inputs.size()));
    s.c.resize(static_cast<Eigen::Index>(outputs.size()), q.c.cols());
    s.d.resize(s.c.rows(), s.b.cols());
    for (std::size_t j = 0; j < inputs.size(); ++j) s.b.col(j) = q.b.col(inputs[j]);
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      s.c.row(i) = q.c.row(outputs[i]);
      for (std::size_t j = 0; j < inputs.size(); ++j) s.d(i, j) = q.d(outputs[i], inputs[j]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Subgradient> hinf_subgradients(const StateSpace& clp, const DerivQuads& dquads,
                                           std::span<const double> peaks) {
  std::vector<Subgradient> out;
  const auto n = static_cast<Eigen::Index>(dquads.size());
  for (double omega : peaks) {
    const bool at_infinity = std::isinf(omega);
    const CMatrix t = at_infinity ? CMatrix(clp.d.cast<Complex>()) : freq_response(clp, omega);
    Subgradient sg;
    sg.source = SubgradientSource::Frequency;
    sg.omega = omega;
    sg.vector = Vector::Zero(n);
    if (t.size() == 0) {
      out.push_back(std::move(sg));
      continue;
    }
    Eigen::JacobiSVD<CMatrix> svd(t, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv.size() > 1 && sv(0) - sv(1) < 1e-9 * sv(0)) sg.degenerate = true;
    const CVector u = svd.matrixU().col(0);
    const CVector v = svd.matrixV().col(0);

    if (at_infinity || clp.nx() == 0) {
      for (Eigen::Index k = 0; k < n; ++k)
        sg.vector(k) = (u.adjoint() * dquads[k].d.cast<Complex>() * v)(0, 0).real();
    } else {
      const auto nx = clp.nx();
      CMatrix resolvent = Complex(0.0, omega) * CMatrix::Identity(nx, nx) - clp.a.cast<Complex>();
      Eigen::PartialPivLU<CMatrix> lu(resolvent);
      // p = R B v, qh = u^H C R
      const CVector p = lu.solve(clp.b.cast<Complex>() * v);
      const CVector qh_t = lu.transpose().solve((u.adjoint() * clp.c.cast<Complex>()).transpose());
      const Eigen::RowVectorXcd qh = qh_t.transpose();
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto& dq = dquads[k];
        Complex g = (u.adjoint() * dq.c.cast<Complex>() * p)(0, 0);
        g += (qh * dq.a.cast<Complex>() * p)(0, 0);
        g += (qh * dq.b.cast<Complex>() * v)(0, 0);
        g += (u.adjoint() * dq.d.cast<Complex>() * v)(0, 0);
        sg.vector(k) = g.real();
      }
    }
    out.push_back(std::move(sg));
  }
  return out;
}

Subgradient h2_gradient(const StateSpace& clp, const DerivQuads& dquads) {
  auto nonzero = [](const Matrix& m) { return m.size() > 0 && m.cwiseAbs().maxCoeff() != 0.0; };
  if (nonzero(clp.d)) throw Error(ErrorKind::NonzeroFeedthrough, "h2_gradient: closed loop has D != 0");
  for (const auto& q : dquads)
    if (nonzero(q.d)) throw Error(ErrorKind::NonzeroFeedthrough, "h2_gradient: feedthrough depends on parameters");
  Subgradient sg;
  sg.source = SubgradientSource::H2;
  sg.vector = Vector::Zero(static_cast<Eigen::Index>(dquads.size()));
  if (clp.nx() == 0) return sg;
  const Gramians g = h2_gramians(clp, true);
  const Matrix& x = g.controllability;
  const Matrix& y = g.observability;
  const double norm2 = (clp.c * x * clp.c.transpose()).trace();
  if (!(norm2 > 0.0)) return sg;
  const double norm = std::sqrt(norm2);
  for (std::size_t k = 0; k < dquads.size(); ++k) {
    const auto& q = dquads[k];
    const double dj = 2.0 * (y * q.a * x).trace() + 2.0 * (y * q.b * clp.b.transpose()).trace() +
                      2.0 * (q.c * x * clp.c.transpose()).trace();
    sg.vector(static_cast<Eigen::Index>(k)) = dj / (2.0 * norm);
  }
  return sg;
}

std::vector<Subgradient> pole_subgradients(const StateSpace& clp, const DerivQuads& dquads, const PoleGoal& goal,
                                           std::span<const int> active) {
  std::vector<Subgradient> out;
  if (clp.nx() == 0) return out;
  const EigenDecomposition ed = decompose(clp.a);
  const auto n = static_cast<Eigen::Index>(dquads.size());

  double v = -std::numeric_limits<double>::infinity();
  for (const auto& l : ed.values) {
    const auto t = pole_terms(l, goal);
    v = std::max(v, *std::max_element(t.begin(), t.end()));
  }

  for (int idx : active) {
    if (idx < 0 || idx >= static_cast<int>(ed.values.size()))
      throw Error(ErrorKind::InvalidArgument, "pole_subgradients: active index out of range");
    const Complex lambda = ed.values[idx];
    const auto terms = pole_terms(lambda, goal);
    const bool defective = ed.cosines[idx] < 1e-8;
    for (int term = 0; term < 3; ++term) {
      if (terms[term] < v - 1e-8) continue;
      Subgradient sg;
      sg.source = SubgradientSource::Eigenvalue;
      sg.eigen_index = idx;
      sg.term = term;
      sg.vector = Vector::Zero(n);
      if (!defective) {
        const CVector vr = ed.right.col(idx);
        const Eigen::RowVectorXcd wh = ed.left_h.row(idx);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex dl = (wh * dquads[k].a.cast<Complex>() * vr)(0, 0);
          sg.vector(k) = term_derivative(term, lambda, dl, goal);
        }
      } else {
        // Forward differences on the linearized closed-loop matrix.
        constexpr double h = 1e-7;
        sg.finite_difference = true;
        for (Eigen::Index k = 0; k < n; ++k) {
          Eigen::EigenSolver<Matrix> es(clp.a + h * dquads[k].a, false);
          if (es.info() != Eigen::Success) throw Error(ErrorKind::EigenFailure, "perturbed eigenproblem failed");
          std::vector<Complex> vals(es.eigenvalues().begin(), es.eigenvalues().end());
          const Complex moved = vals[nearest(vals, lambda)];
          sg.vector(k) = (pole_terms(moved, goal)[term] - terms[term]) / h;
        }
      }
      out.push_back(std::move(sg));
    }
  }
  return out;
}

std::vector<Subgradient> abscissa_subgradients(const StateSpace& clp, const DerivQuads& dquads, double tol) {
  std::vector<Subgradient> out;
  if (clp.nx() == 0) return out;
  const EigenDecomposition ed = decompose(clp.a);
  double abscissa = -std::numeric_limits<double>::infinity();
  for (const auto& l : ed.values) abscissa = std::max(abscissa, l.real());
  const auto n = static_cast<Eigen::Index>(dquads.size());
  for (std::size_t i = 0; i < ed.values.size(); ++i) {
    const Complex lambda = ed.values[i];
    if (lambda.real() < abscissa - tol) continue;
    // One member of each conjugate pair suffices.
    if (lambda.imag() < 0.0) continue;
    Subgradient sg;
    sg.source = SubgradientSource::Abscissa;
    sg.eigen_index = static_cast<int>(i);
    sg.vector = Vector::Zero(n);
    if (ed.cosines[i] >= 1e-8) {
      const CVector vr = ed.right.col(static_cast<Eigen::Index>(i));
      const Eigen::RowVectorXcd wh = ed.left_h.row(static_cast<Eigen::Index>(i));
      for (Eigen::Index k = 0; k < n; ++k) sg.vector(k) = (wh * dquads[k].a.cast<Complex>() * vr)(0, 0).real();
    } else {
      constexpr double h = 1e-7;
      sg.finite_difference = true;
      for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::EigenSolver<Matrix> es(clp.a + h * dquads[k].a, false);
        if (es.info() != Eigen::Success) throw Error(ErrorKind::EigenFailure, "perturbed eigenproblem failed");
        double moved = -std::numeric_limits<double>::infinity();
        for (const auto& l : es.eigenvalues()) moved = std::max(moved, l.real());
        sg.vector(k) = (moved - abscissa) / h;
      }
    }
    out.push_back(std::move(sg));
  }
  return out;
}

Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& x, std::optional<double> h) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double step = h ? *h : 1e-6 * (1.0 + std::abs(x(k)));
    Vector xp = x, xm = x;
    xp(k) += step;
    xm(k) -= step;
    g(k) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

}  // namespace structune
