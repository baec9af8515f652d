#include "structune/controller_structures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "structune/error.hpp"
#include "structune/system_io.hpp"

namespace structune {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using Triplets = std::vector<Eigen::Triplet<double>>;

// Accumulates one controller realization plus, optionally, its per-parameter derivatives.
struct Builder {
  Matrix a, b, c, d;
  bool with_jacobian = false;
  // Per parameter: triplets for A, B, C, D.
  std::vector<std::array<Triplets, 4>> partials;

  enum Part { A = 0, B = 1, C = 2, D = 3 };

  void add(int param, Part part, Eigen::Index r, Eigen::Index col, double v) {
    if (with_jacobian && v != 0.0) partials[param][part].emplace_back(r, col, v);
  }
};

struct Offsets {
  int param = 0;
  Eigen::Index state = 0, in = 0, out = 0;
};

void build(const StructureSpec& spec, const Vector& x, std::optional<double> q, Builder& bld, Offsets off);

void build_variant(const StructureSpec& spec, const Vector& x, std::optional<double> q, Builder& bld,
                   Offsets off) {
  const int p0 = off.param;
  const auto s0 = off.state, i0 = off.in, o0 = off.out;
  std::visit(
      overloaded{
          [&](const StaticGain& g) {
            for (int r = 0; r < g.nu; ++r)
              for (int c = 0; c < g.ny; ++c) {
                const int k = p0 + r * g.ny + c;
                bld.d(o0 + r, i0 + c) = x(k);
                bld.add(k, Builder::D, o0 + r, i0 + c, 1.0);
              }
          },
          [&](const RealizablePid& pid) {
            int k = p0;
            const bool tunable_tau = !pid.fixed_tau.has_value();
            const double tau = tunable_tau ? x(k++) : *pid.fixed_tau;
            const int ktau = p0;
            const int kp = k, ki = k + 1, kd = k + 2;
            const double kP = x(kp), kI = x(ki), kD = x(kd);
            if (!(tau > 0.0)) throw Error(ErrorKind::BoundViolation, "PID tau must be positive");
            // [0 0 | 1; 0 -1/tau | -kD/tau; kI 1/tau | kP + kD/tau]
            bld.a(s0 + 1, s0 + 1) = -1.0 / tau;
            bld.b(s0, i0) = 1.0;
            bld.b(s0 + 1, i0) = -kD / tau;
            bld.c(o0, s0) = kI;
            bld.c(o0, s0 + 1) = 1.0 / tau;
            bld.d(o0, i0) = kP + kD / tau;
            const double t2 = tau * tau;
            if (tunable_tau) {
              bld.add(ktau, Builder::A, s0 + 1, s0 + 1, 1.0 / t2);
              bld.add(ktau, Builder::B, s0 + 1, i0, kD / t2);
              bld.add(ktau, Builder::C, o0, s0 + 1, -1.0 / t2);
              bld.add(ktau, Builder::D, o0, i0, -kD / t2);
            }
            bld.add(kp, Builder::D, o0, i0, 1.0);
            bld.add(ki, Builder::C, o0, s0, 1.0);
            bld.add(kd, Builder::B, s0 + 1, i0, -1.0 / tau);
            bld.add(kd, Builder::D, o0, i0, 1.0 / tau);
          },
          [&](const ObserverBased& ob) {
            const auto n = ob.a.rows(), nu = ob.b2.cols(), ny = ob.c2.rows();
            Matrix kc(nu, n), kf(n, ny);
            int k = p0;
            for (Eigen::Index r = 0; r < nu; ++r)
              for (Eigen::Index c = 0; c < n; ++c) kc(r, c) = x(k++);
            for (Eigen::Index r = 0; r < n; ++r)
              for (Eigen::Index c = 0; c < ny; ++c) kf(r, c) = x(k++);
            bld.a.block(s0, s0, n, n) = ob.a - ob.b2 * kc - kf * ob.c2;
            bld.b.block(s0, i0, n, ny) = kf;
            bld.c.block(o0, s0, nu, n) = -kc;
            k = p0;
            for (Eigen::Index r = 0; r < nu; ++r)
              for (Eigen::Index c = 0; c < n; ++c, ++k) {
                // dA = -B2 E_rc, dC = -E_rc
                for (Eigen::Index i = 0; i < n; ++i) bld.add(k, Builder::A, s0 + i, s0 + c, -ob.b2(i, r));
                bld.add(k, Builder::C, o0 + r, s0 + c, -1.0);
              }
            for (Eigen::Index r = 0; r < n; ++r)
              for (Eigen::Index c = 0; c < ny; ++c, ++k) {
                // dA = -E_rc C2, dB = E_rc
                for (Eigen::Index j = 0; j < n; ++j) bld.add(k, Builder::A, s0 + r, s0 + j, -ob.c2(c, j));
                bld.add(k, Builder::B, s0 + r, i0 + c, 1.0);
              }
          },
          [&](const FullOrder& fo) {
            int k = p0;
            auto fill = [&](Matrix& m, Builder::Part part, Eigen::Index rows, Eigen::Index cols, Eigen::Index r0,
                            Eigen::Index c0) {
              for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c, ++k) {
                  m(r0 + r, c0 + c) = x(k);
                  bld.add(k, part, r0 + r, c0 + c, 1.0);
                }
            };
            fill(bld.a, Builder::A, fo.nk, fo.nk, s0, s0);
            fill(bld.b, Builder::B, fo.nk, fo.ny, s0, i0);
            fill(bld.c, Builder::C, fo.nu, fo.nk, o0, s0);
            fill(bld.d, Builder::D, fo.nu, fo.ny, o0, i0);
          },
          [&](const Decentralized& dec) {
            Offsets child = off;
            for (const auto& blk : dec.blocks) {
              build(blk, x, q, bld, child);
              const auto dims = controller_dims(blk);
              child.param += parameter_count(blk);
              child.state += dims.nk;
              child.in += dims.ny;
              child.out += dims.nu;
            }
          },
          [&](const FirstOrderFilter&) {
            const double a = x(p0);
            bld.a(s0, s0) = -a;
            bld.b(s0, i0) = a;
            bld.c(o0, s0) = 1.0;
            bld.add(p0, Builder::A, s0, s0, -1.0);
            bld.add(p0, Builder::B, s0, i0, 1.0);
          },
          [&](const PolynomialScheduled& ps) {
            if (!q) throw Error(ErrorKind::MissingScheduleValue, "polynomial scheduled gain needs a schedule value");
            const auto nu = ps.base.rows(), ny = ps.base.cols();
            bld.d.block(o0, i0, nu, ny) = ps.base;
            int k = p0;
            double pw = 1.0;
            for (int j = 1; j <= ps.degree; ++j) {
              pw *= *q - ps.q0;
              for (Eigen::Index r = 0; r < nu; ++r)
                for (Eigen::Index c = 0; c < ny; ++c, ++k) {
                  bld.d(o0 + r, i0 + c) += pw * x(k);
                  bld.add(k, Builder::D, o0 + r, i0 + c, pw);
                }
            }
          },
          [&](const FixedBlock& fb) {
            const auto& s = fb.sys;
            bld.a.block(s0, s0, s.nx(), s.nx()) = s.a;
            bld.b.block(s0, i0, s.nx(), s.nu()) = s.b;
            bld.c.block(o0, s0, s.ny(), s.nx()) = s.c;
            bld.d.block(o0, i0, s.ny(), s.nu()) = s.d;
          },
      },
      spec.variant);
}

void build(const StructureSpec& spec, const Vector& x, std::optional<double> q, Builder& bld, Offsets off) {
  build_variant(spec, x, q, bld, off);
}

Builder run_builder(const StructureSpec& spec, const Vector& x, std::optional<double> q, bool with_jacobian) {
  const int n = parameter_count(spec);
  if (x.size() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                "parameter vector has " + std::to_string(x.size()) + " entries, structure needs " + std::to_string(n));
  }
  if (!x.allFinite()) throw Error(ErrorKind::InvalidArgument, "parameter vector has non-finite entries");
  if (needs_schedule_value(spec) && !q) {
    throw Error(ErrorKind::MissingScheduleValue, "structure is scheduled but no schedule value was given");
  }
  const auto dims = controller_dims(spec);
  Builder bld;
  bld.a = Matrix::Zero(dims.nk, dims.nk);
  bld.b = Matrix::Zero(dims.nk, dims.ny);
  bld.c = Matrix::Zero(dims.nu, dims.nk);
  bld.d = Matrix::Zero(dims.nu, dims.ny);
  bld.with_jacobian = with_jacobian;
  if (with_jacobian) bld.partials.resize(n);
  build(spec, x, q, bld, Offsets{});
  return bld;
}

Matrix json_matrix(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::Parse, std::string("structure: missing \"") + key + "\"");
  return matrix_from_json(j.at(key));
}

int json_int(const json& j, const char* key, int fallback = -1) {
  if (!j.contains(key)) {
    if (fallback >= 0) return fallback;
    throw Error(ErrorKind::Parse, std::string("structure: missing \"") + key + "\"");
  }
  if (!j.at(key).is_number_integer() || j.at(key).get<int>() < 0)
    throw Error(ErrorKind::Parse, std::string("structure: \"") + key + "\" must be a non-negative integer");
  return j.at(key).get<int>();
}

}  // namespace

bool ParamVector::within_bounds() const {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) < lo(i) || x(i) > hi(i)) return false;
  return true;
}

Vector ParamVector::clipped(const Vector& v) const { return v.cwiseMax(lo).cwiseMin(hi); }

int parameter_count(const StructureSpec& spec) {
  return std::visit(
      overloaded{
          [](const StaticGain& g) { return g.nu * g.ny; },
          [](const RealizablePid& p) { return p.fixed_tau ? 3 : 4; },
          [](const ObserverBased& o) {
            return static_cast<int>(o.a.rows() * o.b2.cols() + o.c2.rows() * o.a.rows());
          },
          [](const FullOrder& f) { return f.nk * f.nk + f.nk * f.ny + f.nk * f.nu + f.ny * f.nu; },
          [](const Decentralized& d) {
            int n = 0;
            for (const auto& b : d.blocks) n += parameter_count(b);
            return n;
          },
          [](const FirstOrderFilter&) { return 1; },
          [](const PolynomialScheduled& p) { return static_cast<int>(p.degree * p.base.size()); },
          [](const FixedBlock&) { return 0; },
      },
      spec.variant);
}

ControllerDims controller_dims(const StructureSpec& spec) {
  return std::visit(overloaded{
                        [](const StaticGain& g) { return ControllerDims{g.nu, g.ny, 0}; },
                        [](const RealizablePid&) { return ControllerDims{1, 1, 2}; },
                        [](const ObserverBased& o) {
                          return ControllerDims{static_cast<int>(o.b2.cols()), static_cast<int>(o.c2.rows()),
                                                static_cast<int>(o.a.rows())};
                        },
                        [](const FullOrder& f) { return ControllerDims{f.nu, f.ny, f.nk}; },
                        [](const Decentralized& d) {
                          ControllerDims t;
                          for (const auto& b : d.blocks) {
                            const auto c = controller_dims(b);
                            t.nu += c.nu;
                            t.ny += c.ny;
                            t.nk += c.nk;
                          }
                          return t;
                        },
                        [](const FirstOrderFilter&) { return ControllerDims{1, 1, 1}; },
                        [](const PolynomialScheduled& p) {
                          return ControllerDims{static_cast<int>(p.base.rows()), static_cast<int>(p.base.cols()), 0};
                        },
                        [](const FixedBlock& f) { return ControllerDims{f.sys.ny(), f.sys.nu(), f.sys.nx()}; },
                    },
                    spec.variant);
}

bool needs_schedule_value(const StructureSpec& spec) {
  if (std::holds_alternative<PolynomialScheduled>(spec.variant)) return true;
  if (const auto* d = std::get_if<Decentralized>(&spec.variant)) {
    for (const auto& b : d->blocks)
      if (needs_schedule_value(b)) return true;
  }
  return false;
}

namespace {

void default_bounds(const StructureSpec& spec, Vector& lo, Vector& hi, int offset) {
  if (const auto* pid = std::get_if<RealizablePid>(&spec.variant)) {
    if (!pid->fixed_tau) lo(offset) = kPidTauMin;
  } else if (const auto* d = std::get_if<Decentralized>(&spec.variant)) {
    for (const auto& b : d->blocks) {
      default_bounds(b, lo, hi, offset);
      offset += parameter_count(b);
    }
  }
}

}  // namespace

ParamVector make_param_vector(const StructureSpec& spec, const Vector& x) {
  const int n = parameter_count(spec);
  ParamVector pv;
  pv.x = x;
  if (spec.bounds) {
    pv.lo = spec.bounds->first;
    pv.hi = spec.bounds->second;
    if (pv.lo.size() != n || pv.hi.size() != n)
      throw Error(ErrorKind::DimensionMismatch, "bounds must have one entry per parameter");
  } else {
    pv.lo = Vector::Constant(n, -kInf);
    pv.hi = Vector::Constant(n, kInf);
    default_bounds(spec, pv.lo, pv.hi, 0);
  }
  return pv;
}

StateSpace assemble(const StructureSpec& spec, const ParamVector& x, std::optional<double> schedule_value) {
  if (!x.within_bounds()) throw Error(ErrorKind::BoundViolation, "parameter vector outside its bounds");
  return assemble(spec, x.x, schedule_value);
}

StateSpace assemble(const StructureSpec& spec, const Vector& x, std::optional<double> schedule_value) {
  Builder bld = run_builder(spec, x, schedule_value, false);
  return StateSpace(std::move(bld.a), std::move(bld.b), std::move(bld.c), std::move(bld.d));
}

ParamJacobian jacobian(const StructureSpec& spec, const Vector& x, std::optional<double> schedule_value) {
  Builder bld = run_builder(spec, x, schedule_value, true);
  ParamJacobian jac;
  jac.n = static_cast<int>(x.size());
  jac.quads.resize(jac.n);
  const std::array<std::pair<Eigen::Index, Eigen::Index>, 4> shapes = {
      std::pair{bld.a.rows(), bld.a.cols()}, std::pair{bld.b.rows(), bld.b.cols()},
      std::pair{bld.c.rows(), bld.c.cols()}, std::pair{bld.d.rows(), bld.d.cols()}};
  for (int k = 0; k < jac.n; ++k) {
    std::array<Eigen::SparseMatrix<double>*, 4> parts = {&jac.quads[k].a, &jac.quads[k].b, &jac.quads[k].c,
                                                         &jac.quads[k].d};
    for (int p = 0; p < 4; ++p) {
      parts[p]->resize(shapes[p].first, shapes[p].second);
      parts[p]->setFromTriplets(bld.partials[k][p].begin(), bld.partials[k][p].end());
    }
  }
  return jac;
}

ParamVector init_params(const StructureSpec& spec, const InitStrategy& strategy) {
  const int n = parameter_count(spec);
  ParamVector pv = make_param_vector(spec, Vector::Zero(n));
  std::visit(overloaded{
                 [&](const InitZeros&) {
                   pv.x = pv.clipped(Vector::Zero(n));
                   // A zero time constant is meaningless; start PIDs at tau = 0.01.
                   std::function<void(const StructureSpec&, int&)> snap = [&](const StructureSpec& s, int& off) {
                     if (const auto* pid = std::get_if<RealizablePid>(&s.variant)) {
                       if (!pid->fixed_tau) pv.x(off) = std::clamp(0.01, pv.lo(off), pv.hi(off));
                     } else if (const auto* d = std::get_if<Decentralized>(&s.variant)) {
                       for (const auto& b : d->blocks) snap(b, off);
                       return;
                     }
                     off += parameter_count(s);
                   };
                   int off = 0;
                   snap(spec, off);
                 },
                 [&](const InitGiven& g) {
                   if (g.x.size() != n) throw Error(ErrorKind::DimensionMismatch, "given initial vector has wrong size");
                   pv.x = pv.clipped(g.x);
                 },
                 [&](const InitRandom& r) {
                   std::mt19937_64 rng(r.seed);
                   std::uniform_real_distribution<double> u(-1.0, 1.0);
                   Vector v(n);
                   for (int i = 0; i < n; ++i) v(i) = u(rng);
                   pv.x = pv.clipped(v);
                 },
             },
             strategy);
  return pv;
}

StructureSpec structure_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw Error(ErrorKind::Parse, "structure must be an object with a string \"type\"");
  const std::string type = j.at("type").get<std::string>();
  StructureSpec spec;
  if (type == "static") {
    spec.variant = StaticGain{json_int(j, "nu"), json_int(j, "ny")};
  } else if (type == "pid") {
    RealizablePid pid;
    if (j.contains("tau") && !j.at("tau").is_null()) pid.fixed_tau = j.at("tau").get<double>();
    spec.variant = pid;
  } else if (type == "observer") {
    ObserverBased ob{json_matrix(j, "A"), json_matrix(j, "B2"), json_matrix(j, "C2")};
    if (ob.a.rows() != ob.a.cols() || ob.b2.rows() != ob.a.rows() || ob.c2.cols() != ob.a.rows())
      throw Error(ErrorKind::Parse, "observer: inconsistent A/B2/C2 dimensions");
    spec.variant = std::move(ob);
  } else if (type == "full_order") {
    spec.variant = FullOrder{json_int(j, "nk"), json_int(j, "nu"), json_int(j, "ny")};
  } else if (type == "decentralized") {
    if (!j.contains("blocks") || !j.at("blocks").is_array())
      throw Error(ErrorKind::Parse, "decentralized: missing \"blocks\" array");
    Decentralized d;
    for (const auto& b : j.at("blocks")) d.blocks.push_back(structure_from_json(b));
    spec.variant = std::move(d);
  } else if (type == "filter1") {
    spec.variant = FirstOrderFilter{};
  } else if (type == "poly_scheduled") {
    PolynomialScheduled ps;
    ps.base = json_matrix(j, "base");
    ps.degree = json_int(j, "degree");
    if (!j.contains("q0") || !j.at("q0").is_number()) throw Error(ErrorKind::Parse, "poly_scheduled: missing \"q0\"");
    ps.q0 = j.at("q0").get<double>();
    spec.variant = std::move(ps);
  } else if (type == "fixed") {
    spec.variant = FixedBlock{state_space_from_json(j)};
  } else {
    throw Error(ErrorKind::Parse, "unknown structure type \"" + type + "\"");
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    const int n = parameter_count(spec);
    if (!b.is_array() || static_cast<int>(b.size()) != n)
      throw Error(ErrorKind::Parse, "structure: \"bounds\" must list one [lo, hi] pair per parameter");
    Vector lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      const auto& pair = b[i];
      if (!pair.is_array() || pair.size() != 2) throw Error(ErrorKind::Parse, "structure: malformed bound pair");
      lo(i) = pair[0].is_null() ? -kInf : pair[0].get<double>();
      hi(i) = pair[1].is_null() ? kInf : pair[1].get<double>();
      if (lo(i) > hi(i)) throw Error(ErrorKind::Parse, "structure: empty bound interval");
    }
    spec.bounds = std::make_pair(lo, hi);
  }
  return spec;
}

json to_json(const StructureSpec& spec) {
  json j = std::visit(
      overloaded{
          [](const StaticGain& g) { return json{{"type", "static"}, {"nu", g.nu}, {"ny", g.ny}}; },
          [](const RealizablePid& p) {
            json o{{"type", "pid"}};
            if (p.fixed_tau) o["tau"] = *p.fixed_tau;
            return o;
          },
          [](const ObserverBased& o) {
            return json{{"type", "observer"},
                        {"A", matrix_to_json(o.a)},
                        {"B2", matrix_to_json(o.b2)},
                        {"C2", matrix_to_json(o.c2)}};
          },
          [](const FullOrder& f) { return json{{"type", "full_order"}, {"nk", f.nk}, {"nu", f.nu}, {"ny", f.ny}}; },
          [](const Decentralized& d) {
            json blocks = json::array();
            for (const auto& b : d.blocks) blocks.push_back(to_json(b));
            return json{{"type", "decentralized"}, {"blocks", blocks}};
          },
          [](const FirstOrderFilter&) { return json{{"type", "filter1"}}; },
          [](const PolynomialScheduled& p) {
            return json{{"type", "poly_scheduled"}, {"base", matrix_to_json(p.base)}, {"degree", p.degree}, {"q0", p.q0}};
          },
          [](const FixedBlock& f) {
            json o = to_json(f.sys);
            o["type"] = "fixed";
            return o;
          },
      },
      spec.variant);
  if (spec.bounds) {
    json b = json::array();
    for (Eigen::Index i = 0; i < spec.bounds->first.size(); ++i) {
      const double lo = spec.bounds->first(i), hi = spec.bounds->second(i);
      b.push_back(json::array({std::isinf(lo) ? json(nullptr) : json(lo), std::isinf(hi) ? json(nullptr) : json(hi)}));
    }
    j["bounds"] = b;
  }
  return j;
}

}  // namespace structune
