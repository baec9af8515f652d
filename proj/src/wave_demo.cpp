#include "structune/wave_demo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "structune/error.hpp"
#include "structune/program_io.hpp"
#include "structune/synth_program.hpp"
#include "structune/wave_pde.hpp"

namespace structune {

using nlohmann::json;

namespace {

Matrix row_from_json(const json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 3) throw Error(ErrorKind::Parse, std::string("gain '") + key + "' must have 3 entries");
  Matrix m(1, 3);
  m << v[0], v[1], v[2];
  return m;
}

json row_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) a.push_back(m(i));
  return a;
}

std::string fmt_q(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", q);
  return buf;
}

PoleGoal tightened(const PoleGoal& g, double d) {
  PoleGoal t = g;
  t.min_decay += d;
  t.min_damping = std::min(g.min_damping + d, 0.999);
  t.max_frequency -= d;
  return t;
}

[[noreturn]] void stage_fail(const std::string& stage, const Error& e) {
  throw Error(e.kind(), "stage " + stage + ": " + e.what());
}

Requirement hard_pole(int model, const PoleGoal& goal) {
  Requirement r;
  r.model = model;
  r.kind = RequirementKind::PoleRegion;
  r.goal = goal;
  r.cls = RequirementClass::Hard;
  return r;
}

void check_status(const SynthResult& r, const std::string& stage) {
  if (r.status == SynthStatus::InfeasibleHard) stage_fail(stage, Error(ErrorKind::InfeasibleHard, r.message));
  if (r.status == SynthStatus::Unstabilizable) stage_fail(stage, Error(ErrorKind::Unstabilizable, r.message));
}

json goal_check(const Spectrum& sp, const PoleGoal& goal) {
  const PoleViolation v = pole_region_violation(sp, goal);
  return {{"goal", to_json(goal)}, {"violation", v.value}, {"margin", -v.value}, {"satisfied", v.value <= 0.0}};
}

json frozen_loop(int method, double q, const Matrix& kt, const WaveDemoOptions& o) {
  const StateSpace cl = lft_lower(wave_design_plant(q), StateSpace::gain(kt));
  const Spectrum sp = poles(cl);
  json poles_j = json::array();
  for (const auto& l : sp.eigenvalues) poles_j.push_back({l.real(), l.imag()});
  return {{"method", method},
          {"q", q},
          {"gains", row_json(kt)},
          {"poles", poles_j},
          {"nominal_goal", goal_check(sp, o.nominal_goal)},
          {"scheduled_goal", goal_check(sp, o.scheduled_goal)}};
}

double max_abs(const WaveTraces& tr) {
  double m = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k)
    m = std::max({m, std::abs(tr.y1[k]), std::abs(tr.y2[k]), std::abs(tr.y3[k]), std::abs(tr.u[k])});
  return m;
}

double max_diff(const WaveTraces& a, const WaveTraces& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k)
    m = std::max({m, std::abs(a.y1[k] - b.y1[k]), std::abs(a.y2[k] - b.y2[k]), std::abs(a.y3[k] - b.y3[k]),
                  std::abs(a.u[k] - b.u[k])});
  return m;
}

// Largest |y3| over the final second.
double tail_y3(const WaveTraces& tr) {
  double m = 0.0;
  const double t_end = tr.t.back();
  for (std::size_t k = 0; k < tr.size(); ++k)
    if (tr.t[k] >= t_end - 1.0) m = std::max(m, std::abs(tr.y3[k]));
  return m;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error(ErrorKind::InvalidArgument, "cannot write " + p.string());
  os << content;
}

}  // namespace

ScheduledGains gains_from_json(const json& j, double default_q0) {
  ScheduledGains g;
  try {
    g.nominal = row_from_json(j, "nominal");
    if (j.contains("k1")) g.terms.push_back(row_from_json(j, "k1"));
    if (j.contains("k2")) g.terms.push_back(row_from_json(j, "k2"));
    g.q0 = j.value("q0", default_q0);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
  return g;
}

json to_json(const ScheduledGains& g) {
  json j{{"q0", g.q0}, {"nominal", row_json(g.nominal)}};
  for (std::size_t i = 0; i < g.terms.size(); ++i) j["k" + std::to_string(i + 1)] = row_json(g.terms[i]);
  return j;
}

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return 0.5 * (1.0 - std::cos(M_PI * t));
}

json run_wave_demo(const WaveDemoOptions& o) {
  try {
    wave_q_factor(o.q0);
    for (double q : o.qs) wave_q_factor(q);
    o.nominal_goal.validate();
    o.scheduled_goal.validate();
  } catch (const Error& e) {
    stage_fail("setup", e);
  }
  std::filesystem::create_directories(o.out_dir);

  json report;
  report["q0"] = o.q0;
  report["qs"] = o.qs;
  report["goals"] = {{"nominal", to_json(o.nominal_goal)}, {"scheduled", to_json(o.scheduled_goal)}};

  ScheduledGains gains;
  if (o.gains_override) {
    gains = *o.gains_override;
    report["source"] = "override";
  } else {
    report["source"] = "synthesized";
    SolveOptions so;
    so.threads = o.threads;
    if (o.seed) so.init = InitRandom{*o.seed};

    // (i) nominal static gain at q0
    Program nominal;
    nominal.models = {wave_design_plant(o.q0)};
    nominal.structure.variant = StaticGain{1, 3};
    nominal.requirements = {hard_pole(0, tightened(o.nominal_goal, o.design_margin))};
    SynthResult rn;
    try {
      rn = solve(nominal, so);
    } catch (const Error& e) {
      stage_fail("nominal", e);
    }
    check_status(rn, "nominal");
    gains.q0 = o.q0;
    gains.nominal = rn.x_star.x.transpose();
    report["nominal_synthesis"] = {{"status", to_string(rn.status)},
                                   {"g_star", rn.g_star},
                                   {"certificate", rn.certificate},
                                   {"serious_steps", rn.history.size()}};

    // (iii) polynomial schedule around the nominal gains
    Program sched;
    sched.structure = scheduled_structure(gains.nominal, o.degree, o.q0);
    sched.schedule_samples = o.schedule_samples;
    for (std::size_t i = 0; i < o.schedule_samples.size(); ++i) {
      sched.models.push_back(wave_design_plant(o.schedule_samples[i]));
      sched.requirements.push_back(hard_pole(static_cast<int>(i), tightened(o.scheduled_goal, o.design_margin)));
    }
    SynthResult rs;
    so.init = InitZeros{};
    try {
      rs = solve(sched, so);
    } catch (const Error& e) {
      stage_fail("scheduled", e);
    }
    check_status(rs, "scheduled");
    for (int j = 0; j < o.degree; ++j) gains.terms.push_back(rs.x_star.x.segment(3 * j, 3).transpose());
    report["scheduled_synthesis"] = {{"status", to_string(rs.status)},
                                     {"g_star", rs.g_star},
                                     {"certificate", rs.certificate},
                                     {"serious_steps", rs.history.size()}};
  }
  report["gains"] = to_json(gains);

  json artifacts = json::array();
  write_file(o.out_dir / "gains.json", to_json(gains).dump(2) + "\n");
  artifacts.push_back("gains.json");

  // Feasibility of the frozen design loops: nominal at q0, schedule at every q and sample.
  json frozen = json::array();
  std::vector<double> sched_points = o.qs;
  for (double q : o.schedule_samples)
    if (std::find(sched_points.begin(), sched_points.end(), q) == sched_points.end()) sched_points.push_back(q);
  bool feasible = true;
  try {
    json nominal_loop = frozen_loop(1, o.q0, gains.nominal, o);
    feasible = feasible && nominal_loop["nominal_goal"]["satisfied"].get<bool>();
    report["nominal_loop"] = nominal_loop;
    for (double q : o.qs) frozen.push_back(frozen_loop(1, q, gains.nominal, o));
    for (double q : sched_points) {
      json f = frozen_loop(2, q, gains.at(q), o);
      feasible = feasible && f["scheduled_goal"]["satisfied"].get<bool>();
      frozen.push_back(f);
    }
  } catch (const Error& e) {
    stage_fail("feasibility", e);
  }
  report["frozen_loops"] = frozen;
  report["feasible"] = feasible;

  // (iv) simulations of K(1)(q) and K(2)(q) with both simulators.
  json sims = json::array();
  try {
    for (int method = 1; method <= 2; ++method) {
      for (double q : o.qs) {
        const Matrix kt = method == 1 ? gains.nominal : gains.at(q);
        const DelayNetwork k_star = recover_controller(kt, q);
        WaveScenario sc;
        sc.q = q;
        sc.n = o.grid;
        sc.horizon = o.horizon;
        sc.reference = [](double t) { return t >= 0.0 ? 1.0 : 0.0; };
        const WaveTraces pde = simulate_wave_pde(sc, &k_star);
        const WaveTraces net = simulate_wave_network(sc, kt);
        sc.reference = smooth_step;
        const double agreement = max_diff(simulate_wave_pde(sc, &k_star), simulate_wave_network(sc, kt));

        const std::string stem = "trace_method" + std::to_string(method) + "_q" + fmt_q(q);
        for (const auto& [suffix, tr] : {std::pair{"_pde.csv", &pde}, std::pair{"_network.csv", &net}}) {
          std::ofstream os(o.out_dir / (stem + suffix), std::ios::binary);
          write_trace_csv(os, *tr);
          artifacts.push_back(stem + suffix);
        }
        const double peak = max_abs(pde);
        sims.push_back({{"method", method},
                        {"q", q},
                        {"pde_trace", stem + "_pde.csv"},
                        {"network_trace", stem + "_network.csv"},
                        {"max_abs_signal", peak},
                        {"final_y1", pde.y1.back()},
                        {"tail_abs_y3", tail_y3(pde)},
                        {"bounded", std::isfinite(peak) && peak < 1e3},
                        {"smooth_reference_max_abs_diff", agreement}});
      }
    }
  } catch (const Error& e) {
    stage_fail("simulation", e);
  }
  report["simulations"] = sims;
  artifacts.push_back("report.json");
  report["artifacts"] = artifacts;
  write_file(o.out_dir / "report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace structune
