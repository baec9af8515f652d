#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "structune/state_space.hpp"

namespace testing {

using namespace structune;

inline Matrix random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

/// Random stable system with abscissa in [-1.1, -0.1].
inline StateSpace random_stable(std::mt19937_64& rng, int nx, int nu, int ny, bool feedthrough = false) {
  Matrix a = random_matrix(rng, nx, nx);
  const double abscissa = poles(StateSpace(a, Matrix::Zero(nx, 1), Matrix::Zero(1, nx), Matrix::Zero(1, 1))).abscissa;
  std::uniform_real_distribution<double> u(0.1, 1.1);
  a -= (abscissa + u(rng)) * Matrix::Identity(nx, nx);
  Matrix d = feedthrough ? random_matrix(rng, ny, nu) : Matrix::Zero(ny, nu);
  return StateSpace(a, random_matrix(rng, nx, nu), random_matrix(rng, ny, nx), d);
}

inline double sigma_max(const StateSpace& sys, double w) { return max_singular_value(freq_response(sys, w)); }

inline double golden_max(const StateSpace& sys, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = sigma_max(sys, c), fd = sigma_max(sys, d);
  for (int it = 0; it < 200 && (b - a) > 1e-14 * (1.0 + b); ++it) {
    if (fc > fd) {
      b = d, d = c, fd = fc, c = b - g * (b - a), fc = sigma_max(sys, c);
    } else {
      a = c, c = d, fc = fd, d = a + g * (b - a), fd = sigma_max(sys, d);
    }
  }
  return std::max(fc, fd);
}

/// Dense log grid over [1e-3, 1e3] (plus 0) with golden-section refinement of the best peaks.
inline double hinf_oracle(const StateSpace& sys, int points = 100000, int refine = 5) {
  // Modal form makes the dense sweep cheap.
  Eigen::ComplexEigenSolver<CMatrix> es(sys.a.cast<Complex>());
  const CMatrix v = es.eigenvectors();
  const CMatrix cv = sys.c.cast<Complex>() * v;
  const CMatrix vb = v.partialPivLu().solve(sys.b.cast<Complex>());
  const CVector lam = es.eigenvalues();
  std::vector<double> w(points), s(points);
  for (int k = 0; k < points; ++k) {
    w[k] = std::pow(10.0, -3.0 + 6.0 * k / (points - 1));
    CMatrix g = sys.d.cast<Complex>();
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      g += cv.col(i) * (vb.row(i) / (Complex(0.0, w[k]) - lam(i)));
    s[k] = max_singular_value(g);
  }
  double best = sigma_max(sys, 0.0);
  std::vector<int> peaks;
  for (int k = 1; k + 1 < points; ++k)
    if (s[k] >= s[k - 1] && s[k] >= s[k + 1]) peaks.push_back(k);
  std::sort(peaks.begin(), peaks.end(), [&](int a, int b) { return s[a] > s[b]; });
  if (peaks.size() > static_cast<std::size_t>(refine)) peaks.resize(refine);
  for (double x : s) best = std::max(best, x);
  for (int k : peaks) best = std::max(best, golden_max(sys, w[k - 1], w[k + 1]));
  return best;
}

/// H2 norm by adaptive Gauss-Kronrod quadrature of ||G(jw)||_F^2 over [0, inf).
inline double h2_oracle(const StateSpace& sys) {
  auto f = [&](double w) { return freq_response(sys, w).squaredNorm(); };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-12);
  return std::sqrt(integral / M_PI);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline StateSpace first_order(double kappa) {
  return StateSpace(Matrix::Constant(1, 1, -kappa), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
}

inline StateSpace resonant(double damping_coeff = 0.1) {
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << 0.0, 1.0, -1.0, -damping_coeff;
  b << 0.0, 1.0;
  c << 1.0, 0.0;
  return StateSpace(a, b, c, Matrix::Zero(1, 1));
}

}  // namespace testing
