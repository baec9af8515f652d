#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Sparse>
#include <json.hpp>

#include "structune/state_space.hpp"

namespace structune {

struct StructureSpec;

struct StaticGain {
  int nu = 1, ny = 1;
};

/// Realizable PID, SISO. Parameters (tau, kP, kI, kD), or (kP, kI, kD) when tau is fixed.
struct RealizablePid {
  std::optional<double> fixed_tau;
};

/// Observer-based controller on fixed plant data; parameters (Kc, Kf) row-major.
struct ObserverBased {
  Matrix a, b2, c2;
};

/// Unstructured (full- or reduced-order) controller of order nk.
struct FullOrder {
  int nk = 1, nu = 1, ny = 1;
};

struct Decentralized {
  std::vector<StructureSpec> blocks;
};

/// a / (s + a); one parameter.
struct FirstOrderFilter {};

/// Static gain base + sum_j (q - q0)^j K_j(x), j = 1..degree, K_j row-major in x.
struct PolynomialScheduled {
  Matrix base;
  int degree = 1;
  double q0 = 0.0;
};

struct FixedBlock {
  StateSpace sys;
};

struct StructureSpec {
  std::variant<StaticGain, RealizablePid, ObserverBased, FullOrder, Decentralized, FirstOrderFilter,
               PolynomialScheduled, FixedBlock>
      variant;
  /// Optional user bounds, overriding the variant defaults when present.
  std::optional<std::pair<Vector, Vector>> bounds;
};

inline constexpr double kPidTauMin = 1e-4;

struct ParamVector {
  Vector x;
  Vector lo, hi;

  bool within_bounds() const;
  Vector clipped(const Vector& v) const;
};

/// Derivative of (A_K, B_K, C_K, D_K) with respect to one parameter.
struct SparseQuad {
  Eigen::SparseMatrix<double> a, b, c, d;
};

struct ParamJacobian {
  int n = 0;
  std::vector<SparseQuad> quads;
};

int parameter_count(const StructureSpec& spec);
/// Controller dimensions (nu outputs, ny inputs, nk states).
struct ControllerDims {
  int nu = 0, ny = 0, nk = 0;
};
ControllerDims controller_dims(const StructureSpec& spec);
bool needs_schedule_value(const StructureSpec& spec);

/// Default or user bounds, as a ParamVector with x = 0.
ParamVector make_param_vector(const StructureSpec& spec, const Vector& x);

StateSpace assemble(const StructureSpec& spec, const ParamVector& x, std::optional<double> schedule_value = {});
StateSpace assemble(const StructureSpec& spec, const Vector& x, std::optional<double> schedule_value = {});
ParamJacobian jacobian(const StructureSpec& spec, const Vector& x, std::optional<double> schedule_value = {});

struct InitZeros {};
struct InitGiven {
  Vector x;
};
struct InitRandom {
  std::uint64_t seed = 0;
};
using InitStrategy = std::variant<InitZeros, InitGiven, InitRandom>;

ParamVector init_params(const StructureSpec& spec, const InitStrategy& strategy);

StructureSpec structure_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StructureSpec& spec);

}  // namespace structune
