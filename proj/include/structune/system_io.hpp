#pragma once

#include <json.hpp>

#include "structune/state_space.hpp"

namespace structune {

// JSON system format: {"A","B","C","D"} as row-major nested arrays. A partitioned
// plant uses "A","B1","B2","C1","C2","D11","D12","D21","D22" plus integer dims
// "nw","nu","nz","ny". Empty blocks may be given as [] or omitted.

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows_hint = -1, Eigen::Index cols_hint = -1);
nlohmann::json matrix_to_json(const Matrix& m);

StateSpace state_space_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StateSpace& sys);

PartitionedPlant plant_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PartitionedPlant& p);

}  // namespace structune
