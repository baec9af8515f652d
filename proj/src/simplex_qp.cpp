#include "structune/simplex_qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "structune/error.hpp"

namespace structune {

namespace {

// Equality-constrained minimizer on the support set: [H_SS 1; 1^T 0] [l; nu] = [a_S; 1].
Vector solve_on_support(const Matrix& h, const Vector& a, const std::vector<int>& support) {
  const auto m = static_cast<Eigen::Index>(support.size());
  if (m == 1) return Vector::Ones(1);
  Matrix kkt = Matrix::Zero(m + 1, m + 1);
  Vector rhs(m + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) kkt(i, j) = h(support[i], support[j]);
    kkt(i, m) = 1.0;
    kkt(m, i) = 1.0;
    rhs(i) = a(support[i]);
  }
  rhs(m) = 1.0;
  const Vector sol = kkt.fullPivLu().solve(rhs);
  return sol.head(m);
}

}  // namespace

SimplexQpResult solve_simplex_qp(const Matrix& h_in, const Vector& a, double tol) {
  const auto n = a.size();
  if (n == 0 || h_in.rows() != n || h_in.cols() != n)
    throw Error(ErrorKind::QPFailure, "simplex QP: empty or inconsistent data");
  if (!h_in.allFinite() || !a.allFinite()) throw Error(ErrorKind::QPFailure, "simplex QP: non-finite data");

  // The minimizer is invariant under a -> (a - c) / s, H -> H / s; normalize so that
  // the regularization and tolerances are relative.
  const double a_max = a.maxCoeff();
  const double scale = std::max({h_in.diagonal().cwiseAbs().maxCoeff(), (a.array() - a_max).abs().maxCoeff(), 1e-300});
  Matrix h = 0.5 * (h_in + h_in.transpose()) / scale;
  h.diagonal().array() += 1e-13;
  const Vector a_s = (a.array() - a_max).matrix() / scale;

  // Start at the best vertex.
  int start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = 0.5 * h(i, i) - a_s(i);
    if (v < best) {
      best = v;
      start = static_cast<int>(i);
    }
  }
  Vector lambda = Vector::Zero(n);
  lambda(start) = 1.0;
  std::vector<int> support{start};

  const double ftol = tol * 2.0;
  SimplexQpResult res;
  const int max_iter = 50 * static_cast<int>(n) + 100;
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const Vector target = solve_on_support(h, a_s, support);
    double alpha = 1.0;
    int blocking = -1;
    for (std::size_t i = 0; i < support.size(); ++i) {
      const double cur = lambda(support[i]);
      const double dir = target(static_cast<Eigen::Index>(i)) - cur;
      if (dir < 0.0) {
        const double step = cur / -dir;
        if (step < alpha) {
          alpha = step;
          blocking = static_cast<int>(i);
        }
      }
    }
    for (std::size_t i = 0; i < support.size(); ++i) {
      const int k = support[i];
      lambda(k) += alpha * (target(static_cast<Eigen::Index>(i)) - lambda(k));
    }
    if (blocking >= 0) {
      lambda(support[blocking]) = 0.0;
      support.erase(support.begin() + blocking);
      continue;
    }
    // Stationary on the support; check the multipliers of the inactive bounds.
    const Vector grad = h * lambda - a_s;
    double theta = 0.0;
    for (int k : support) theta += grad(k);
    theta /= static_cast<double>(support.size());
    int entering = -1;
    double most_negative = -ftol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::find(support.begin(), support.end(), static_cast<int>(j)) != support.end()) continue;
      const double reduced = grad(j) - theta;
      if (reduced < most_negative) {
        most_negative = reduced;
        entering = static_cast<int>(j);
      }
    }
    if (entering < 0) {
      lambda = lambda.cwiseMax(0.0);
      lambda /= lambda.sum();
      res.lambda = lambda;
      res.objective = 0.5 * lambda.dot(h_in * lambda) - a.dot(lambda);
      return res;
    }
    support.push_back(entering);
  }
  throw Error(ErrorKind::QPFailure, "simplex QP: active-set iteration limit reached");
}

}  // namespace structune
