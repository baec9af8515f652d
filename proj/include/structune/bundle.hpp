#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "structune/state_space.hpp"

namespace structune {

/// One linearization handed back by the oracle: value of the branch at the
/// sample point and a subgradient of that branch.
struct Plane {
  Vector g;
  double value = 0.0;
};

struct OracleSample {
  Vector z;
  double value = 0.0;
  std::vector<Plane> planes;
  /// false: the point is rejected (barrier), value and planes are ignored.
  bool feasible_eval = true;
  /// Opaque auxiliary scalar recorded in the history (e.g. constraint value).
  double aux = 0.0;
};

using Oracle = std::function<OracleSample(const Vector&)>;

struct BundleOptions {
  double gamma = 0.1;        // serious-step acceptance
  double big_gamma = 0.6;    // good agreement: relax / tighten tau
  double downshift_c = 1e-4;
  double tau_min = 1e-6;
  double tau_max = 1e12;
  std::optional<double> tau0;  // default max(1, |g(x0)|)
  int max_bundle = 50;
  int inner_budget = 50;
  int max_serious = 300;
  double tol_gap = 1e-6;
  double tol_step = 1e-6;
  /// Stop as soon as a serious value drops below this.
  std::optional<double> target;
  /// Optional box; empty means unbounded.
  Vector lo, hi;
};

struct Cut {
  Vector z;
  double value = 0.0;
  Vector g;
  bool aggregate = false;
};

struct BundleState {
  Vector x;
  double fx = 0.0;
  double aux = 0.0;
  std::vector<Cut> bundle;
  double tau = 1.0;
  int serious_steps = 0;
  int null_steps = 0;
  int oracle_calls = 0;
  Vector lo, hi;
};

struct TangentStep {
  Vector y;
  double model_value = 0.0;
  Vector multipliers;
  /// Aggregate plane at x: model >= agg_value + agg_g^T (y - x).
  double agg_value = 0.0;
  Vector agg_g;
  /// Aggregate subgradient with components blocked by active bounds removed.
  double certificate = 0.0;
  double dual_gap = 0.0;
};

/// Downshift of a cut relative to the serious iterate.
double downshift(const Cut& cut, const Vector& x, double fx, double c);

/// Proximal step on the downshifted cutting-plane model.
TangentStep tangent_step(const BundleState& state, const BundleOptions& options);

enum class InnerOutcome { Serious, Converged, Exhausted };

struct InnerResult {
  InnerOutcome outcome = InnerOutcome::Exhausted;
  double certificate = 0.0;
  double step_norm = 0.0;
};

/// Runs null steps until a serious step is accepted, the stopping test fires,
/// or the inner budget runs out. Updates `state` in place.
InnerResult inner_loop(BundleState& state, const Oracle& oracle, const BundleOptions& options);

enum class BundleStatus { Converged, TargetReached, MaxSeriousSteps, InnerExhausted };

const char* to_string(BundleStatus s);

struct SeriousRecord {
  int index = 0;
  double f = 0.0;
  double aux = 0.0;
  double tau = 0.0;
  double step_norm = 0.0;
  double certificate = 0.0;
};

struct BundleResult {
  Vector x;
  double f = 0.0;
  double aux = 0.0;
  double certificate = 0.0;
  BundleStatus status = BundleStatus::Converged;
  std::vector<SeriousRecord> history;
  int oracle_calls = 0;
};

/// Requires a feasible start point (finite value); throws InvalidArgument otherwise.
BundleResult run_bundle(const Oracle& oracle, const Vector& x0, const BundleOptions& options = {});

}  // namespace structune
