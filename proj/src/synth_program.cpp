#include "structune/synth_program.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "structune/error.hpp"

namespace structune {

namespace {

constexpr double kTieTol = 1e-8;

struct RequirementEval {
  double value = 0.0;
  std::vector<Subgradient> subgradients;
};

void scale(std::vector<Subgradient>& v, double s) {
  for (auto& sg : v) sg.vector *= s;
}

RequirementEval evaluate_requirement(const Requirement& r, const ModelLoop& loop) {
  RequirementEval out;
  switch (r.kind) {
    case RequirementKind::Hinf: {
      const StateSpace t = loop.closed_loop.select(r.w, r.z);
      const DerivQuads dq = select_channel(loop.dquads, r.w, r.z);
      const HinfResult h = hinf_norm(t, kDefaultHinfTol);
      out.value = r.weight * h.value / r.bound;
      out.subgradients = hinf_subgradients(t, dq, h.peak_frequencies);
      scale(out.subgradients, r.weight / r.bound);
      break;
    }
    case RequirementKind::H2: {
      const StateSpace t = loop.closed_loop.select(r.w, r.z);
      const DerivQuads dq = select_channel(loop.dquads, r.w, r.z);
      out.value = r.weight * h2_norm(t) / r.bound;
      out.subgradients = {h2_gradient(t, dq)};
      scale(out.subgradients, r.weight / r.bound);
      break;
    }
    case RequirementKind::PoleRegion: {
      const PoleViolation pv = pole_region_violation(loop.spectrum, r.goal);
      out.value = 1.0 + r.weight * pv.value;
      out.subgradients = pole_subgradients(loop.closed_loop, loop.dquads, r.goal, pv.active);
      scale(out.subgradients, r.weight);
      break;
    }
  }
  return out;
}

template <class F>
void parallel_for(int count, int threads, F&& body) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  const int workers = std::min(threads, count);
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Max over values with the subgradients of every branch within the tie tolerance.
double collect_max(const std::vector<std::size_t>& idx, const std::vector<RequirementEval>& evals,
                   std::vector<Subgradient>& out) {
  if (idx.empty()) return 0.0;
  double m = -std::numeric_limits<double>::infinity();
  for (auto i : idx) m = std::max(m, evals[i].value);
  for (auto i : idx)
    if (evals[i].value >= m - kTieTol)
      out.insert(out.end(), evals[i].subgradients.begin(), evals[i].subgradients.end());
  return m;
}

struct AbscissaEval {
  double value = 0.0;  // max abscissa over models
  std::vector<Subgradient> subgradients;
};

AbscissaEval abscissa_of(const std::vector<ModelLoop>& loops) {
  AbscissaEval out;
  out.value = -std::numeric_limits<double>::infinity();
  for (const auto& l : loops)
    if (l.closed_loop.nx() > 0) out.value = std::max(out.value, l.spectrum.abscissa);
  for (const auto& l : loops) {
    if (l.closed_loop.nx() == 0 || l.spectrum.abscissa < out.value - kTieTol) continue;
    auto sg = abscissa_subgradients(l.closed_loop, l.dquads, kTieTol);
    out.subgradients.insert(out.subgradients.end(), sg.begin(), sg.end());
  }
  return out;
}

std::vector<ModelLoop> close_all(const Program& program, const Vector& x, int threads) {
  std::vector<ModelLoop> loops(program.models.size());
  parallel_for(static_cast<int>(loops.size()), threads, [&](int i) { loops[i] = close_model(program, i, x); });
  return loops;
}

Vector box_lo(const ParamVector& pv) { return pv.lo; }
Vector box_hi(const ParamVector& pv) { return pv.hi; }

}  // namespace

int default_threads() {
  if (const char* env = std::getenv("STRUCTUNE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

void Program::validate() const {
  if (models.empty()) throw Error(ErrorKind::InvalidArgument, "program has no models");
  if (requirements.empty()) throw Error(ErrorKind::InvalidArgument, "program has no requirements");
  if (!schedule_samples.empty() && schedule_samples.size() != models.size())
    throw Error(ErrorKind::InvalidArgument, "schedule_samples must list one value per model");
  if (needs_schedule_value(structure) && schedule_samples.empty())
    throw Error(ErrorKind::MissingScheduleValue, "scheduled structure needs schedule_samples");
  const auto dims = controller_dims(structure);
  std::vector<bool> used(models.size(), false);
  for (const auto& r : requirements) {
    if (r.model < 0 || r.model >= static_cast<int>(models.size()))
      throw Error(ErrorKind::InvalidArgument, "requirement references unknown model");
    const auto& m = models[r.model];
    used[r.model] = true;
    if (!(r.weight > 0.0)) throw Error(ErrorKind::InvalidArgument, "requirement weight must be positive");
    if (r.kind == RequirementKind::PoleRegion) {
      r.goal.validate();
    } else {
      if (!(r.bound > 0.0)) throw Error(ErrorKind::InvalidArgument, "norm bound must be positive");
      if (r.w.empty() || r.z.empty()) throw Error(ErrorKind::InvalidArgument, "norm requirement needs w and z channels");
      for (int w : r.w)
        if (w < 0 || w >= m.nw()) throw Error(ErrorKind::InvalidArgument, "w index outside model inputs");
      for (int z : r.z)
        if (z < 0 || z >= m.nz()) throw Error(ErrorKind::InvalidArgument, "z index outside model outputs");
    }
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!used[i]) throw Error(ErrorKind::InvalidArgument, "model " + std::to_string(i) + " has no requirement");
    if (models[i].nu() != dims.nu || models[i].ny() != dims.ny)
      throw Error(ErrorKind::DimensionMismatch, "controller structure does not match model " + std::to_string(i));
  }
}

std::optional<double> Program::schedule_for(int model) const {
  if (schedule_samples.empty()) return std::nullopt;
  return schedule_samples.at(model);
}

ModelLoop close_model(const Program& program, int model, const Vector& x) {
  ModelLoop loop;
  const auto q = program.schedule_for(model);
  loop.controller = assemble(program.structure, x, q);
  const ParamJacobian jac = jacobian(program.structure, x, q);
  const auto& plant = program.models[model];
  loop.closed_loop = lft_lower(plant, loop.controller);
  loop.dquads = closed_loop_jacobian(plant, loop.controller, jac);
  if (loop.closed_loop.nx() > 0) loop.spectrum = poles(loop.closed_loop);
  return loop;
}

Evaluation evaluate(const Program& program, const Vector& x, int threads) {
  if (threads <= 0) threads = default_threads();
  Evaluation ev;
  const std::vector<ModelLoop> loops = close_all(program, x, threads);
  const AbscissaEval abs = abscissa_of(loops);
  ev.abscissa = abs.value;
  if (!(abs.value < 0.0)) {
    ev.stable = false;
    ev.f = ev.g = abs.value + SolveOptions{}.stability_margin;
    ev.soft = ev.hard = abs.subgradients;
    return ev;
  }

  const auto& reqs = program.requirements;
  std::vector<RequirementEval> evals(reqs.size());
  parallel_for(static_cast<int>(reqs.size()), threads,
               [&](int i) { evals[i] = evaluate_requirement(reqs[i], loops[reqs[i].model]); });

  std::vector<std::size_t> soft, hard;
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    (reqs[i].cls == RequirementClass::Soft ? soft : hard).push_back(i);
    ev.values.push_back(evals[i].value);
  }
  ev.f = collect_max(soft, evals, ev.soft);
  ev.g = collect_max(hard, evals, ev.hard);
  return ev;
}

const char* to_string(SynthStatus s) {
  switch (s) {
    case SynthStatus::LocalOptimum: return "LocalOptimum";
    case SynthStatus::Feasible: return "Feasible";
    case SynthStatus::InfeasibleHard: return "InfeasibleHard";
    case SynthStatus::Unstabilizable: return "Unstabilizable";
  }
  return "Unknown";
}

ParamVector phase0_stabilize(const Program& program, const ParamVector& x0, const SolveOptions& options) {
  program.validate();
  const int threads = options.threads > 0 ? options.threads : default_threads();
  {
    const AbscissaEval a0 = abscissa_of(close_all(program, x0.x, threads));
    if (a0.value < 0.0) return x0;
  }
  const double margin = options.stability_margin;
  Oracle oracle = [&](const Vector& x) {
    OracleSample s;
    s.z = x;
    try {
      const AbscissaEval a = abscissa_of(close_all(program, x, threads));
      s.value = a.value + margin;
      for (const auto& sg : a.subgradients) s.planes.push_back({sg.vector, s.value});
      if (s.planes.empty()) s.planes.push_back({Vector::Zero(x.size()), s.value});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::IllPosed) throw;
      s.feasible_eval = false;
    }
    return s;
  };
  BundleOptions bo = options.bundle;
  bo.max_serious = options.phase0_budget;
  bo.target = -1e-9;
  bo.lo = x0.lo;
  bo.hi = x0.hi;
  const BundleResult r = run_bundle(oracle, x0.x, bo);
  if (!(r.f < 0.0))
    throw Error(ErrorKind::Unstabilizable, "no stabilizing parameters found (best abscissa + margin = " +
                                               std::to_string(r.f) + ")");
  ParamVector out = x0;
  out.x = r.x;
  return out;
}

SynthResult solve(const Program& program, const SolveOptions& options) {
  program.validate();
  if (!(options.feasibility_tol > 0.0) || !(options.certificate_tol > 0.0) || !(options.mu0 > 0.0))
    throw Error(ErrorKind::InvalidArgument, "solve: tolerances and mu0 must be positive");
  const int threads = options.threads > 0 ? options.threads : default_threads();

  SynthResult res;
  ParamVector x = init_params(program.structure, options.init);
  try {
    x = phase0_stabilize(program, x, options);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Unstabilizable) throw;
    res.x_star = x;
    res.status = SynthStatus::Unstabilizable;
    res.message = e.what();
    return res;
  }

  double mu = options.mu0;
  BundleResult last;
  Evaluation final_eval;
  for (int round = 0; round < options.max_rounds; ++round) {
    Oracle oracle = [&, mu](const Vector& y) {
      OracleSample s;
      s.z = y;
      Evaluation ev;
      try {
        ev = evaluate(program, y, threads);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::IllPosed && e.kind() != ErrorKind::Unstable) throw;
        s.feasible_eval = false;
        return s;
      }
      if (!ev.stable) {
        s.feasible_eval = false;
        return s;
      }
      std::vector<Vector> soft;
      for (const auto& sg : ev.soft) soft.push_back(sg.vector);
      if (soft.empty()) soft.push_back(Vector::Zero(y.size()));
      const double excess = ev.g - 1.0;
      s.value = ev.f + mu * std::max(0.0, excess);
      s.aux = ev.g;
      if (excess <= kTieTol) {
        for (const auto& gs : soft) s.planes.push_back({gs, s.value});
      }
      if (excess >= -kTieTol) {
        for (const auto& gs : soft)
          for (const auto& gh : ev.hard) s.planes.push_back({gs + mu * gh.vector, s.value});
      }
      return s;
    };
    BundleOptions bo = options.bundle;
    bo.lo = box_lo(x);
    bo.hi = box_hi(x);
    last = run_bundle(oracle, x.x, bo);
    x.x = last.x;
    for (const auto& h : last.history) res.history.push_back({round, mu, h});
    final_eval = evaluate(program, x.x, threads);
    if (final_eval.g <= 1.0 + options.feasibility_tol) break;
    mu *= 10.0;
  }

  res.x_star = x;
  res.f_star = final_eval.f;
  res.g_star = final_eval.g;
  res.certificate = last.certificate;
  res.requirement_values = final_eval.values;
  if (final_eval.g > 1.0 + options.feasibility_tol) {
    res.status = SynthStatus::InfeasibleHard;
    res.message = "hard requirements remain violated after penalty escalation (g = " + std::to_string(final_eval.g) + ")";
  } else if (last.status == BundleStatus::Converged && last.certificate <= options.certificate_tol) {
    res.status = SynthStatus::LocalOptimum;
  } else {
    res.status = SynthStatus::Feasible;
    res.message = std::string("optimizer stopped with status ") + to_string(last.status);
  }
  return res;
}

}  // namespace structune
