#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "structune/sysnorms.hpp"
#include "structune/wave.hpp"

namespace structune {

struct WaveDemoOptions {
  double q0 = 3.0;
  std::vector<double> qs{2.0, 3.0, 4.0};
  PoleGoal nominal_goal{0.9, 0.9, 4.0};
  PoleGoal scheduled_goal{0.7, 0.9, 2.0};
  std::vector<double> schedule_samples{2.0, 2.5, 3.0, 3.5, 4.0};
  int degree = 2;
  /// Goals are tightened by this amount during synthesis so verified violations are strictly negative.
  double design_margin = 0.01;
  std::optional<ScheduledGains> gains_override;
  std::optional<std::uint64_t> seed;
  int grid = 400;
  double horizon = 20.0;
  std::filesystem::path out_dir = "wave_demo_out";
  int threads = 0;
};

/// Gains file: {"nominal": [3], "k1": [3], "k2": [3], "q0": q0}.
ScheduledGains gains_from_json(const nlohmann::json& j, double default_q0 = 3.0);
nlohmann::json to_json(const ScheduledGains& g);

/// Unit step delayed through a raised-cosine ramp over [0, 1]; used for cross-checks.
double smooth_step(double t);

/// Runs the full pipeline and writes traces, gains.json and report.json into out_dir.
/// Stage failures are rethrown as Error with a stage-labeled message.
nlohmann::json run_wave_demo(const WaveDemoOptions& options);

}  // namespace structune
