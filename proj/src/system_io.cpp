#include "structune/system_io.hpp"

#include <cmath>
#include <string>

#include "structune/error.hpp"

namespace structune {

using nlohmann::json;

namespace {

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorKind::Parse, what); }

Matrix field(const json& j, const char* key, Eigen::Index rows, Eigen::Index cols) {
  if (!j.contains(key)) {
    if (rows >= 0 && cols >= 0 && (rows == 0 || cols == 0)) return Matrix(rows, cols);
    parse_error(std::string("missing key \"") + key + "\"");
  }
  try {
    return matrix_from_json(j.at(key), rows, cols);
  } catch (const Error& e) {
    parse_error(std::string("key \"") + key + "\": " + e.what());
  }
}

Eigen::Index dim(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer() || j.at(key).get<long>() < 0) {
    parse_error(std::string("missing or invalid integer \"") + key + "\"");
  }
  return j.at(key).get<Eigen::Index>();
}

}  // namespace

Matrix matrix_from_json(const json& j, Eigen::Index rows_hint, Eigen::Index cols_hint) {
  if (j.is_number()) {
    Matrix m(1, 1);
    m(0, 0) = j.get<double>();
    if (!std::isfinite(m(0, 0))) parse_error("non-finite entry");
    return m;
  }
  if (!j.is_array()) parse_error("matrix must be a nested array");
  if (j.empty()) {
    if (rows_hint > 0 && cols_hint > 0) parse_error("empty matrix where a non-empty block is required");
    return Matrix(std::max<Eigen::Index>(rows_hint, 0), std::max<Eigen::Index>(cols_hint, 0));
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  for (const auto& row : j) {
    if (!row.is_array()) parse_error("matrix rows must be arrays");
    if (cols < 0) cols = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != cols) parse_error("ragged matrix rows");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = j[r][c];
      if (!v.is_number()) parse_error("matrix entries must be numbers");
      m(r, c) = v.get<double>();
      if (!std::isfinite(m(r, c))) parse_error("non-finite entry");
    }
  }
  if ((rows_hint >= 0 && rows != rows_hint) || (cols_hint >= 0 && cols != cols_hint)) {
    parse_error("matrix is " + std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                std::to_string(rows_hint) + "x" + std::to_string(cols_hint));
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

StateSpace state_space_from_json(const json& j) {
  if (!j.is_object()) parse_error("system must be a JSON object");
  const Matrix d = field(j, "D", -1, -1);
  Eigen::Index nx = 0;
  if (j.contains("A")) nx = matrix_from_json(j.at("A")).rows();
  const Matrix a = field(j, "A", nx, nx);
  const Matrix b = field(j, "B", nx, d.cols());
  const Matrix c = field(j, "C", d.rows(), nx);
  try {
    return StateSpace(a, b, c, d);
  } catch (const Error& e) {
    parse_error(e.what());
  }
}

json to_json(const StateSpace& sys) {
  return json{{"A", matrix_to_json(sys.a)},
              {"B", matrix_to_json(sys.b)},
              {"C", matrix_to_json(sys.c)},
              {"D", matrix_to_json(sys.d)}};
}

PartitionedPlant plant_from_json(const json& j) {
  if (!j.is_object()) parse_error("plant must be a JSON object");
  const Eigen::Index nw = dim(j, "nw"), nu = dim(j, "nu"), nz = dim(j, "nz"), ny = dim(j, "ny");
  Eigen::Index nx = 0;
  if (j.contains("A")) nx = matrix_from_json(j.at("A")).rows();
  try {
    return PartitionedPlant(field(j, "A", nx, nx), field(j, "B1", nx, nw), field(j, "B2", nx, nu),
                            field(j, "C1", nz, nx), field(j, "C2", ny, nx), field(j, "D11", nz, nw),
                            field(j, "D12", nz, nu), field(j, "D21", ny, nw), field(j, "D22", ny, nu));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Parse) throw;
    parse_error(e.what());
  }
}

json to_json(const PartitionedPlant& p) {
  return json{{"nw", p.nw()},
              {"nu", p.nu()},
              {"nz", p.nz()},
              {"ny", p.ny()},
              {"A", matrix_to_json(p.a)},
              {"B1", matrix_to_json(p.b1)},
              {"B2", matrix_to_json(p.b2)},
              {"C1", matrix_to_json(p.c1)},
              {"C2", matrix_to_json(p.c2)},
              {"D11", matrix_to_json(p.d11)},
              {"D12", matrix_to_json(p.d12)},
              {"D21", matrix_to_json(p.d21)},
              {"D22", matrix_to_json(p.d22)}};
}

}  // namespace structune
