#include "structune/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "structune/error.hpp"
#include "structune/simplex_qp.hpp"

namespace structune {

namespace {

bool has_box(const BundleState& s) { return s.lo.size() > 0; }

void add_planes(BundleState& state, const OracleSample& sample) {
  for (const auto& p : sample.planes) state.bundle.push_back(Cut{sample.z, p.value, p.g, false});
}

double max_plane_norm(const OracleSample& s) {
  double m = 0.0;
  for (const auto& p : s.planes) m = std::max(m, p.g.norm());
  return m;
}

// Drops cuts beyond the size cap: inactive ones first, then oldest; never the aggregate.
void prune(BundleState& state, std::vector<bool> active, int max_bundle) {
  if (static_cast<int>(state.bundle.size()) <= max_bundle) return;
  active.resize(state.bundle.size(), true);
  std::vector<bool> keep(state.bundle.size(), true);
  auto count = [&] { return std::count(keep.begin(), keep.end(), true); };
  for (std::size_t j = 0; j < state.bundle.size() && count() > max_bundle; ++j)
    if (!state.bundle[j].aggregate && !active[j]) keep[j] = false;
  for (std::size_t j = 0; j < state.bundle.size() && count() > max_bundle; ++j)
    if (!state.bundle[j].aggregate && keep[j]) keep[j] = false;
  std::vector<Cut> next;
  for (std::size_t j = 0; j < state.bundle.size(); ++j)
    if (keep[j]) next.push_back(std::move(state.bundle[j]));
  state.bundle = std::move(next);
}

// Activity flags of the current cuts after removing the aggregate.
std::vector<bool> drop_aggregate(BundleState& state, const Vector& multipliers) {
  std::vector<bool> active;
  std::vector<Cut> next;
  for (std::size_t j = 0; j < state.bundle.size(); ++j) {
    if (state.bundle[j].aggregate) continue;
    active.push_back(static_cast<Eigen::Index>(j) < multipliers.size() && multipliers(j) > 1e-12);
    next.push_back(std::move(state.bundle[j]));
  }
  state.bundle = std::move(next);
  return active;
}

// After a serious step, cuts lying above the new value at the new iterate came from
// nonconvex regions; downshifting them would flatten the model next to x and stall
// the method, so they are discarded. Convex functions never trigger this.
void drop_overshooting(BundleState& state, std::vector<bool>& active) {
  std::vector<Cut> next;
  std::vector<bool> next_active;
  for (std::size_t j = 0; j < state.bundle.size(); ++j) {
    const Cut& c = state.bundle[j];
    if (c.value + c.g.dot(state.x - c.z) > state.fx) continue;
    next.push_back(c);
    next_active.push_back(j < active.size() ? active[j] : true);
  }
  state.bundle = std::move(next);
  active = std::move(next_active);
}

double model_at(const BundleState& state, const Vector& y, const BundleOptions& options) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& cut : state.bundle) {
    const double s = downshift(cut, state.x, state.fx, options.downshift_c);
    m = std::max(m, cut.value + cut.g.dot(y - cut.z) - s);
  }
  return m;
}

}  // namespace

const char* to_string(BundleStatus s) {
  switch (s) {
    case BundleStatus::Converged: return "converged";
    case BundleStatus::TargetReached: return "target_reached";
    case BundleStatus::MaxSeriousSteps: return "max_serious_steps";
    case BundleStatus::InnerExhausted: return "inner_exhausted";
  }
  return "unknown";
}

double downshift(const Cut& cut, const Vector& x, double fx, double c) {
  const Vector dx = x - cut.z;
  return std::max(0.0, cut.value + cut.g.dot(dx) - fx) + c * dx.squaredNorm();
}

TangentStep tangent_step(const BundleState& state, const BundleOptions& options) {
  if (state.bundle.empty()) throw Error(ErrorKind::QPFailure, "tangent_step: empty bundle");
  const auto m = static_cast<Eigen::Index>(state.bundle.size());
  const auto n = state.x.size();
  const double tau = state.tau;

  Matrix g(n, m);
  Vector a(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Cut& cut = state.bundle[j];
    g.col(j) = cut.g;
    a(j) = cut.value + cut.g.dot(state.x - cut.z) - downshift(cut, state.x, state.fx, options.downshift_c);
  }

  // Coordinates pinned at a bound; re-solve the multipliers on the rest.
  std::vector<bool> fixed(n, false);
  Vector d = Vector::Zero(n);
  Vector lambda;
  for (Eigen::Index round = 0; round <= n; ++round) {
    Matrix gf = g;
    Vector af = a;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed[i]) {
        af += g.row(i).transpose() * d(i);
        gf.row(i).setZero();
      }
    }
    const Matrix h = gf.transpose() * gf / tau;
    lambda = solve_simplex_qp(h, af).lambda;
    const Vector dfree = -gf * lambda / tau;
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      d(i) = dfree(i);
      if (has_box(state)) {
        const double lo = state.lo(i) - state.x(i), hi = state.hi(i) - state.x(i);
        if (d(i) < lo || d(i) > hi) {
          d(i) = std::clamp(d(i), lo, hi);
          fixed[i] = true;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }

  TangentStep ts;
  ts.multipliers = lambda;
  ts.y = state.x + d;
  ts.agg_g = g * lambda;
  ts.agg_value = a.dot(lambda);
  ts.model_value = (a + g.transpose() * d).maxCoeff();
  Vector projected = ts.agg_g;
  for (Eigen::Index i = 0; i < n; ++i)
    if (fixed[i]) projected(i) = 0.0;
  ts.certificate = projected.norm();
  const double primal = ts.model_value + 0.5 * tau * d.squaredNorm();
  const double dual = (a + g.transpose() * d).dot(lambda) + 0.5 * tau * d.squaredNorm();
  ts.dual_gap = primal - dual;
  return ts;
}

InnerResult inner_loop(BundleState& state, const Oracle& oracle, const BundleOptions& options) {
  if (!std::isfinite(state.fx)) throw Error(ErrorKind::InvalidArgument, "inner_loop: current value is not finite");
  InnerResult res;
  bool only_barrier = false;  // every trial so far hit the barrier
  for (int it = 0; it < options.inner_budget; ++it) {
    const TangentStep ts = tangent_step(state, options);
    const double predicted = state.fx - ts.model_value;
    const double step = (ts.y - state.x).norm();
    res.certificate = ts.certificate;
    res.step_norm = step;
    if (predicted <= options.tol_gap * (1.0 + std::abs(state.fx)) && step <= options.tol_step) {
      // A step crushed only by barrier escalation is not stationarity.
      res.outcome = only_barrier ? InnerOutcome::Exhausted : InnerOutcome::Converged;
      return res;
    }

    const OracleSample sample = oracle(ts.y);
    ++state.oracle_calls;
    Cut aggregate{state.x, ts.agg_value, ts.agg_g, true};
    if (!sample.feasible_eval || !std::isfinite(sample.value)) {
      ++state.null_steps;
      if (it == 0) only_barrier = true;
      state.tau = std::min(2.0 * state.tau, options.tau_max);
      // Saturated proximity with every trial rejected: no feasible descent to be found.
      if (state.tau >= options.tau_max) break;
      continue;
    }

    only_barrier = false;
    const double rho = predicted > 0.0 ? (state.fx - sample.value) / predicted : -1.0;
    if (rho >= options.gamma) {
      state.x = ts.y;
      state.fx = sample.value;
      state.aux = sample.aux;
      // The aggregate stays as an ordinary cut anchored at the previous iterate.
      std::vector<bool> active = drop_aggregate(state, ts.multipliers);
      aggregate.aggregate = false;
      state.bundle.push_back(std::move(aggregate));
      active.push_back(true);
      drop_overshooting(state, active);
      add_planes(state, sample);
      prune(state, std::move(active), options.max_bundle);
      if (rho >= options.big_gamma) state.tau = std::max(0.5 * state.tau, options.tau_min);
      ++state.serious_steps;
      res.outcome = InnerOutcome::Serious;
      return res;
    }

    ++state.null_steps;
    std::vector<bool> active = drop_aggregate(state, ts.multipliers);
    state.bundle.push_back(std::move(aggregate));
    add_planes(state, sample);
    prune(state, std::move(active), options.max_bundle);
    const double rho_tilde = (state.fx - model_at(state, ts.y, options)) / predicted;
    if (rho_tilde >= options.big_gamma) state.tau = std::min(2.0 * state.tau, options.tau_max);
  }
  res.outcome = InnerOutcome::Exhausted;
  return res;
}

BundleResult run_bundle(const Oracle& oracle, const Vector& x0, const BundleOptions& options) {
  BundleState state;
  state.lo = options.lo;
  state.hi = options.hi;
  state.x = x0;
  if (state.lo.size() > 0) state.x = x0.cwiseMax(state.lo).cwiseMin(state.hi);
  const OracleSample first = oracle(state.x);
  state.oracle_calls = 1;
  if (!first.feasible_eval || !std::isfinite(first.value) || first.planes.empty())
    throw Error(ErrorKind::InvalidArgument, "run_bundle: oracle rejected the start point");
  state.fx = first.value;
  state.aux = first.aux;
  add_planes(state, first);
  state.tau = std::clamp(options.tau0.value_or(std::max(1.0, max_plane_norm(first))), options.tau_min,
                         options.tau_max);

  BundleResult res;
  res.history.push_back({0, state.fx, state.aux, state.tau, 0.0, 0.0});
  res.status = BundleStatus::MaxSeriousSteps;
  if (options.target && state.fx <= *options.target) {
    res.status = BundleStatus::TargetReached;
  } else {
    while (state.serious_steps < options.max_serious) {
      const InnerResult inner = inner_loop(state, oracle, options);
      res.certificate = inner.certificate;
      if (inner.outcome == InnerOutcome::Converged) {
        res.status = BundleStatus::Converged;
        break;
      }
      if (inner.outcome == InnerOutcome::Exhausted) {
        res.status = BundleStatus::InnerExhausted;
        break;
      }
      res.history.push_back({state.serious_steps, state.fx, state.aux, state.tau, inner.step_norm, inner.certificate});
      if (options.target && state.fx <= *options.target) {
        res.status = BundleStatus::TargetReached;
        break;
      }
    }
  }
  res.x = state.x;
  res.f = state.fx;
  res.aux = state.aux;
  res.oracle_calls = state.oracle_calls;
  return res;
}

}  // namespace structune
