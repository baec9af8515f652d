#pragma once

#include <iosfwd>

#include <json.hpp>

#include "structune/synth_program.hpp"

namespace structune {

// Program JSON:
//   {"models": [plant...], "structure": {...},
//    "requirements": [{"model": i, "w": [...], "z": [...], "kind": "hinf"|"h2"|"poles",
//                      "bound": b | "goal": {"min_decay","min_damping","max_frequency"},
//                      "class": "soft"|"hard", "weight": 1.0}],
//    "schedule_samples": [...]}
// Optional "x0": [...] and "seed": n select the initial point.
Program program_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Program& program);
/// Initialization strategy encoded in a program file (zeros when absent).
InitStrategy init_from_json(const nlohmann::json& j);

PoleGoal pole_goal_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PoleGoal& goal);

nlohmann::json to_json(const SynthResult& result, const Program& program);

/// CSV with header serious_idx,f,g,tau,step_norm,certificate.
void write_history_csv(std::ostream& os, const std::vector<HistoryRecord>& history);

}  // namespace structune
