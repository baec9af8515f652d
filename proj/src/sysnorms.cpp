#include "structune/sysnorms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>

#include "structune/error.hpp"
#include "structune/lyapunov.hpp"

namespace structune {

namespace {

void require_stable(const StateSpace& sys, const char* context) {
  if (sys.nx() == 0) return;
  const Spectrum s = poles(sys);
  if (!(s.abscissa < 0.0)) {
    throw Error(ErrorKind::Unstable, std::string(context) + ": system is not stable (abscissa " +
                                         std::to_string(s.abscissa) + ")");
  }
}

struct Sample {
  double omega;
  double sigma;
};

double sigma_at(const StateSpace& sys, double omega) {
  if (std::isinf(omega)) return max_singular_value(sys.d.cast<Complex>());
  return max_singular_value(freq_response(sys, omega));
}

// Imaginary-axis crossing frequencies (>= 0) of the Hamiltonian at level gamma.
std::vector<double> imaginary_crossings(const StateSpace& sys, double gamma) {
  const Eigen::Index n = sys.nx(), m = sys.nu(), p = sys.ny();
  const Matrix& a = sys.a;
  const Matrix& b = sys.b;
  const Matrix& c = sys.c;
  const Matrix& d = sys.d;
  const Matrix r = gamma * gamma * Matrix::Identity(m, m) - d.transpose() * d;
  Eigen::LLT<Matrix> llt(r);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularR, "gamma^2 I - D^T D is not positive definite");
  const Matrix rinv_dt = llt.solve(d.transpose());
  const Matrix rinv_bt = llt.solve(b.transpose());
  const Matrix a_h = a + b * rinv_dt * c;
  Matrix h(2 * n, 2 * n);
  h.topLeftCorner(n, n) = a_h;
  h.topRightCorner(n, n) = b * rinv_bt;
  h.bottomLeftCorner(n, n) = -c.transpose() * (Matrix::Identity(p, p) + d * rinv_dt) * c;
  h.bottomRightCorner(n, n) = -a_h.transpose();

  Eigen::EigenSolver<Matrix> es(h, false);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::EigenFailure, "Hamiltonian eigenvalues did not converge");
  const double thr = 1e-8 * (1.0 + h.norm());
  std::vector<double> omegas;
  for (const auto& l : es.eigenvalues()) {
    if (std::abs(l.real()) <= thr && l.imag() >= 0.0) omegas.push_back(l.imag());
  }
  std::sort(omegas.begin(), omegas.end());
  return omegas;
}

}  // namespace

void PoleGoal::validate() const {
  if (!(min_decay >= 0.0) || !(min_damping >= 0.0 && min_damping < 1.0) || !(max_frequency > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "pole goal requires alpha >= 0, 0 <= zeta < 1, omega_max > 0");
  }
}

Gramians h2_gramians(const StateSpace& sys, bool with_observability) {
  require_stable(sys, "h2");
  Gramians g;
  g.controllability = solve_lyapunov(sys.a, sys.b * sys.b.transpose());
  if (with_observability) g.observability = solve_lyapunov(sys.a.transpose(), sys.c.transpose() * sys.c);
  return g;
}

double h2_norm(const StateSpace& sys) {
  if (sys.d.size() > 0 && sys.d.cwiseAbs().maxCoeff() != 0.0) {
    throw Error(ErrorKind::NonzeroFeedthrough, "continuous-time H2 norm is infinite when D != 0");
  }
  if (sys.nx() == 0) return 0.0;
  const Gramians g = h2_gramians(sys, false);
  const double t = (sys.c * g.controllability * sys.c.transpose()).trace();
  return std::sqrt(std::max(t, 0.0));
}

HinfResult hinf_norm(const StateSpace& sys, double rel_tol) {
  if (!(rel_tol >= 1e-12 && rel_tol <= 1e-2)) {
    throw Error(ErrorKind::InvalidArgument, "hinf_norm: rel_tol must lie in [1e-12, 1e-2]");
  }
  HinfResult res;
  const double sigma_d = max_singular_value(sys.d.cast<Complex>());
  if (sys.nx() == 0) {
    res.value = sigma_d;
    res.peak_frequencies = {0.0};
    res.converged = true;
    return res;
  }
  require_stable(sys, "hinf");

  std::vector<Sample> samples;
  auto sample = [&](double omega) {
    const double s = sigma_at(sys, omega);
    samples.push_back({omega, s});
    return s;
  };
  sample(std::numeric_limits<double>::infinity());
  sample(0.0);
  for (const auto& l : poles(sys).eigenvalues) {
    const double mag = std::abs(l);
    if (mag > 0.0) sample(mag);
    if (l.imag() > 0.0) sample(l.imag());
  }
  auto best = [&] {
    return std::max_element(samples.begin(), samples.end(),
                            [](const Sample& x, const Sample& y) { return x.sigma < y.sigma; })
        ->sigma;
  };
  double gamma_lb = best();

  if (gamma_lb == 0.0) {
    res.value = 0.0;
    res.peak_frequencies = {0.0};
    res.converged = true;
    return res;
  }

  constexpr int kMaxIterations = 50;
  for (res.iterations = 1; res.iterations <= kMaxIterations; ++res.iterations) {
    double gamma = (1.0 + 2.0 * rel_tol) * gamma_lb;
    std::vector<double> crossings;
    for (int attempt = 0;; ++attempt) {
      try {
        crossings = imaginary_crossings(sys, gamma);
        break;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularR || attempt >= 5) throw;
        gamma *= 1.0 + 10.0 * rel_tol;
      }
    }
    if (crossings.empty()) {
      res.converged = true;
      break;
    }
    const double previous = gamma_lb;
    for (std::size_t i = 0; i + 1 < crossings.size(); ++i) sample(0.5 * (crossings[i] + crossings[i + 1]));
    for (double w : crossings) sample(w);
    gamma_lb = best();
    if (!(gamma_lb > previous)) {
      // Crossings flagged only by roundoff; no frequency beats the bound.
      res.converged = true;
      break;
    }
  }
  if (!res.converged) throw Error(ErrorKind::NoConvergence, "hinf_norm: level-set iteration did not converge");

  res.value = gamma_lb * (1.0 + rel_tol);
  const double threshold = (1.0 - 1e-6) * res.value;
  std::vector<Sample> active;
  for (const auto& s : samples)
    if (s.sigma >= threshold) active.push_back(s);
  std::sort(active.begin(), active.end(), [](const Sample& x, const Sample& y) { return x.omega < y.omega; });
  // Merge samples of the same peak, keeping the best one.
  std::vector<Sample> merged;
  for (const auto& s : active) {
    if (!merged.empty()) {
      Sample& last = merged.back();
      const bool same = std::isinf(s.omega) ? std::isinf(last.omega)
                                            : std::abs(s.omega - last.omega) <= 1e-4 * (1.0 + s.omega);
      if (same) {
        if (s.sigma > last.sigma) last = s;
        continue;
      }
    }
    merged.push_back(s);
  }
  for (const auto& s : merged) res.peak_frequencies.push_back(s.omega);
  return res;
}

std::array<double, 3> pole_terms(Complex lambda, const PoleGoal& goal) {
  const double mag = std::abs(lambda);
  // Real poles carry no damping constraint (a stable real pole has damping 1).
  const double damping = lambda.imag() != 0.0 ? lambda.real() + goal.min_damping * mag
                                              : -std::numeric_limits<double>::infinity();
  return {lambda.real() + goal.min_decay, damping, mag - goal.max_frequency};
}

PoleViolation pole_region_violation(const Spectrum& spectrum, const PoleGoal& goal) {
  if (spectrum.eigenvalues.empty()) throw Error(ErrorKind::InvalidArgument, "pole_region_violation: empty spectrum");
  PoleViolation out;
  out.value = -std::numeric_limits<double>::infinity();
  std::vector<double> per(spectrum.eigenvalues.size());
  for (std::size_t i = 0; i < per.size(); ++i) {
    const auto t = pole_terms(spectrum.eigenvalues[i], goal);
    per[i] = *std::max_element(t.begin(), t.end());
    out.value = std::max(out.value, per[i]);
  }
  for (std::size_t i = 0; i < per.size(); ++i)
    if (per[i] >= out.value - 1e-8) out.active.push_back(static_cast<int>(i));
  return out;
}

}  // namespace structune
