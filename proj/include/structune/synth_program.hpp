#pragma once

#include <optional>
#include <string>
#include <vector>

#include "structune/bundle.hpp"
#include "structune/controller_structures.hpp"
#include "structune/sensitivity.hpp"
#include "structune/state_space.hpp"
#include "structune/sysnorms.hpp"

namespace structune {

enum class RequirementKind { Hinf, H2, PoleRegion };
enum class RequirementClass { Soft, Hard };

struct Requirement {
  int model = 0;
  std::vector<int> w, z;
  RequirementKind kind = RequirementKind::Hinf;
  double bound = 1.0;  // norm kinds
  PoleGoal goal;       // PoleRegion
  RequirementClass cls = RequirementClass::Soft;
  double weight = 1.0;
};

/// Multi-model program: minimize max soft values subject to max hard values <= 1,
/// over controllers that stabilize every model. When `schedule_samples` is set,
/// models[i] is the plant frozen at schedule value schedule_samples[i].
struct Program {
  std::vector<PartitionedPlant> models;
  StructureSpec structure;
  std::vector<Requirement> requirements;
  std::vector<double> schedule_samples;

  void validate() const;
  std::optional<double> schedule_for(int model) const;
};

struct ModelLoop {
  StateSpace controller;
  StateSpace closed_loop;
  DerivQuads dquads;
  Spectrum spectrum;
};

/// Closes the loop of one model at x, with derivative data.
ModelLoop close_model(const Program& program, int model, const Vector& x);

struct Evaluation {
  double f = 0.0;
  double g = 0.0;
  std::vector<Subgradient> soft, hard;
  bool stable = true;
  /// Normalized value per requirement (empty when unstable).
  std::vector<double> values;
  double abscissa = 0.0;  // max over models
};

Evaluation evaluate(const Program& program, const Vector& x, int threads = 0);

struct SolveOptions {
  BundleOptions bundle;
  double mu0 = 10.0;
  int max_rounds = 8;
  double feasibility_tol = 1e-6;
  double certificate_tol = 1e-5;
  double stability_margin = 0.05;
  int phase0_budget = 500;
  InitStrategy init = InitZeros{};
  int threads = 0;  // 0: STRUCTUNE_THREADS or 1
};

/// Returns x0 when it already stabilizes every model; otherwise minimizes
/// max(abscissa) + margin until negative. Throws Unstabilizable.
ParamVector phase0_stabilize(const Program& program, const ParamVector& x0, const SolveOptions& options = {});

enum class SynthStatus { LocalOptimum, Feasible, InfeasibleHard, Unstabilizable };
const char* to_string(SynthStatus s);

struct HistoryRecord {
  int round = 0;
  double mu = 0.0;
  SeriousRecord step;
};

struct SynthResult {
  ParamVector x_star;
  double f_star = 0.0;
  double g_star = 0.0;
  double certificate = 0.0;
  SynthStatus status = SynthStatus::Feasible;
  std::vector<HistoryRecord> history;
  std::vector<double> requirement_values;
  std::string message;
};

SynthResult solve(const Program& program, const SolveOptions& options = {});

/// Worker count from STRUCTUNE_THREADS (default 1).
int default_threads();

}  // namespace structune
