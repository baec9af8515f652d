#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "structune/error.hpp"
#include "structune/program_io.hpp"
#include "structune/sysnorms.hpp"
#include "structune/system_io.hpp"
#include "structune/wave_demo.hpp"

using namespace structune;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kParse = 2, kUnstable = 3, kInfeasible = 4, kUnstabilizable = 5 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::InvalidArgument:
    case ErrorKind::QEqualsOne:
    case ErrorKind::StepTooLarge:
    case ErrorKind::CFLViolation:
      return kParse;
    case ErrorKind::Unstable:
    case ErrorKind::IllPosed:
    case ErrorKind::NonzeroFeedthrough:
    case ErrorKind::ResolventSingular:
      return kUnstable;
    case ErrorKind::InfeasibleHard: return kInfeasible;
    case ErrorKind::Unstabilizable: return kUnstabilizable;
    default: return kFailure;
  }
}

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Parse, "cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parse, "bad number '" + item + "' in list");
    }
  }
  if (out.empty()) throw Error(ErrorKind::Parse, "empty list");
  return out;
}

int cmd_norm(const std::string& file, const std::string& kind, double tol) {
  const StateSpace sys = state_space_from_json(read_json(file));
  if (kind == "h2") {
    std::printf("%.10f\n", h2_norm(sys));
    return kOk;
  }
  const HinfResult r = hinf_norm(sys, tol);
  std::printf("%.10f\n", r.value);
  std::printf("peak_frequency %s\n",
              r.peak_frequencies.empty() ? "none"
              : std::isinf(r.peak_frequencies.front()) ? "inf"
                                                        : std::to_string(r.peak_frequencies.front()).c_str());
  return kOk;
}

int cmd_synth(const std::string& file, const std::string& out_dir, std::optional<std::uint64_t> seed, int threads) {
  const json pj = read_json(file);
  const Program program = program_from_json(pj);
  SolveOptions opts;
  opts.init = init_from_json(pj);
  if (seed) opts.init = InitRandom{*seed};
  opts.threads = threads;
  const SynthResult r = solve(program, opts);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream os(std::filesystem::path(out_dir) / "result.json");
    os << to_json(r, program).dump(2) << "\n";
  }
  {
    std::ofstream os(std::filesystem::path(out_dir) / "iterations.csv");
    write_history_csv(os, r.history);
  }
  std::printf("status %s\nf %.10g\ng %.10g\ncertificate %.3e\n", to_string(r.status), r.f_star, r.g_star,
              r.certificate);
  switch (r.status) {
    case SynthStatus::InfeasibleHard: return kInfeasible;
    case SynthStatus::Unstabilizable: return kUnstabilizable;
    default: return kOk;
  }
}

int cmd_wave_demo(WaveDemoOptions o, const std::string& qs, const std::string& override_spec) {
  o.qs = parse_list(qs);
  if (!override_spec.empty()) {
    if (override_spec == "published") {
      o.gains_override = published_gains();
    } else {
      o.gains_override = gains_from_json(read_json(override_spec), o.q0);
    }
  }
  const json report = run_wave_demo(o);
  std::printf("feasible %s\n", report["feasible"].get<bool>() ? "true" : "false");
  const auto& nl = report["nominal_loop"];
  std::printf("nominal q=%g pole %.5f margin %.5f\n", o.q0, nl["poles"][0][0].get<double>(),
              nl["nominal_goal"]["margin"].get<double>());
  for (const auto& f : report["frozen_loops"]) {
    if (f["method"].get<int>() != 2) continue;
    std::printf("scheduled q=%g pole %.5f margin %.5f\n", f["q"].get<double>(), f["poles"][0][0].get<double>(),
                f["scheduled_goal"]["margin"].get<double>());
  }
  std::printf("report %s\n", (o.out_dir / "report.json").string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured H-infinity / H2 controller synthesis toolkit"};
  app.require_subcommand(1);

  std::string file, kind = "hinf", out_dir = "synth_out", qs = "2,3,4", override_spec;
  double tol = 1e-12;
  std::optional<std::uint64_t> seed;
  int threads = 0;

  auto* norm = app.add_subcommand("norm", "H2 or H-infinity norm of a state-space system");
  norm->add_option("system", file, "system JSON file")->required();
  norm->add_option("--kind", kind, "h2 or hinf")->check(CLI::IsMember({"h2", "hinf"}));
  norm->add_option("--tol", tol, "relative tolerance for hinf")->check(CLI::Range(1e-12, 1e-2));

  auto* synth = app.add_subcommand("synth", "solve a synthesis program");
  synth->add_option("program", file, "program JSON file")->required();
  synth->add_option("--out", out_dir, "output directory");
  synth->add_option("--seed", seed, "random initialization seed");
  synth->add_option("--threads", threads, "worker threads (default STRUCTUNE_THREADS or 1)");

  WaveDemoOptions wave;
  std::string wave_out = "wave_demo_out";
  auto* demo = app.add_subcommand("wave-demo", "wave-equation design, scheduling and simulation");
  demo->add_option("--q0", wave.q0, "nominal anti-damping parameter");
  demo->add_option("--qs", qs, "comma-separated q values to evaluate");
  demo->add_option("--out", wave_out, "output directory");
  demo->add_option("--gains-override", override_spec, "'published' (reference gains) or a gains JSON file");
  demo->add_option("--seed", seed, "random initialization seed for the nominal design");
  demo->add_option("--threads", threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kParse;
  }

  try {
    if (*norm) return cmd_norm(file, kind, tol);
    if (*synth) return cmd_synth(file, out_dir, seed, threads);
    if (*demo) {
      wave.out_dir = wave_out;
      wave.seed = seed;
      wave.threads = threads;
      return cmd_wave_demo(wave, qs, override_spec);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
