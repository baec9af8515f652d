#include <doctest.h>

#include "helpers.hpp"
#include "structune/controller_structures.hpp"
#include "structune/error.hpp"

using namespace structune;

namespace {

StructureSpec spec_of(auto v) {
  StructureSpec s;
  s.variant = std::move(v);
  return s;
}

Matrix dense(const Eigen::SparseMatrix<double>& m) { return Matrix(m); }

// Every Jacobian entry against central differences of assemble.
void check_jacobian(const StructureSpec& spec, const Vector& x, std::optional<double> q = {}) {
  const ParamJacobian jac = jacobian(spec, x, q);
  REQUIRE(jac.n == x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * (1.0 + std::abs(x(k)));
    Vector xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    const StateSpace p = assemble(spec, xp, q), m = assemble(spec, xm, q);
    const auto& dq = jac.quads[k];
    const Matrix fa = (p.a - m.a) / (2 * h), fb = (p.b - m.b) / (2 * h), fc = (p.c - m.c) / (2 * h),
                 fd = (p.d - m.d) / (2 * h);
    CHECK((dense(dq.a) - fa).norm() <= 1e-6 * (1.0 + fa.norm()));
    CHECK((dense(dq.b) - fb).norm() <= 1e-6 * (1.0 + fb.norm()));
    CHECK((dense(dq.c) - fc).norm() <= 1e-6 * (1.0 + fc.norm()));
    CHECK((dense(dq.d) - fd).norm() <= 1e-6 * (1.0 + fd.norm()));
  }
}

std::vector<StructureSpec> all_variants() {
  std::mt19937_64 rng(20);
  Matrix base(1, 3);
  base << -1.049, -1.049, -0.05402;
  std::vector<StructureSpec> v;
  v.push_back(spec_of(StaticGain{2, 3}));
  v.push_back(spec_of(RealizablePid{}));
  v.push_back(spec_of(RealizablePid{0.05}));
  v.push_back(spec_of(ObserverBased{testing::random_matrix(rng, 3, 3), testing::random_matrix(rng, 3, 1),
                                    testing::random_matrix(rng, 2, 3)}));
  v.push_back(spec_of(FullOrder{2, 1, 2}));
  v.push_back(spec_of(FirstOrderFilter{}));
  v.push_back(spec_of(PolynomialScheduled{base, 2, 3.0}));
  v.push_back(spec_of(FixedBlock{testing::first_order(2.0)}));
  v.push_back(spec_of(Decentralized{{spec_of(FirstOrderFilter{}), spec_of(RealizablePid{1.0}), spec_of(StaticGain{1, 2})}}));
  return v;
}

}  // namespace

TEST_CASE("realizable PID assembly") {
  const StructureSpec pid = spec_of(RealizablePid{});
  Vector x(4);
  x << 1.0, 2.0, 3.0, 4.0;
  const StateSpace k = assemble(pid, x);
  CHECK(k.d(0, 0) == doctest::Approx(6.0));
  CHECK(k.c(0, 0) == doctest::Approx(3.0));
  CHECK(k.c(0, 1) == doctest::Approx(1.0));
  CHECK(k.b(0, 0) == doctest::Approx(1.0));
  CHECK(k.b(1, 0) == doctest::Approx(-4.0));
  CHECK(k.a(0, 0) == 0.0);
  CHECK(k.a(0, 1) == 0.0);
  CHECK(k.a(1, 0) == 0.0);
  CHECK(k.a(1, 1) == doctest::Approx(-1.0));
}

TEST_CASE("realizable PID time-constant derivative") {
  Vector x(4);
  x << 1.0, 2.0, 3.0, 4.0;
  const ParamJacobian j = jacobian(spec_of(RealizablePid{}), x);
  const auto& dt = j.quads[0];
  CHECK(dense(dt.a)(1, 1) == doctest::Approx(1.0));
  CHECK(dense(dt.b)(1, 0) == doctest::Approx(4.0));
  CHECK(dense(dt.c)(0, 1) == doctest::Approx(-1.0));
  CHECK(dense(dt.d)(0, 0) == doctest::Approx(-4.0));
}

TEST_CASE("polynomial scheduled gain reproduces the published schedule") {
  Matrix base(1, 3);
  base << -1.049, -1.049, -0.05402;
  const StructureSpec s = spec_of(PolynomialScheduled{base, 2, 3.0});
  Vector x(6);
  x << -0.1102, -0.1102, -0.1053, 0.03901, 0.03901, 0.02855;
  const StateSpace k = assemble(s, x, 2.0);
  CHECK(k.nx() == 0);
  CHECK(k.d(0, 0) == doctest::Approx(-0.89979).epsilon(1e-9));
  CHECK(k.d(0, 1) == doctest::Approx(-0.89979).epsilon(1e-9));
  CHECK(k.d(0, 2) == doctest::Approx(0.07983).epsilon(1e-9));

  const ParamJacobian j = jacobian(s, x, 3.0);
  for (const auto& q : j.quads) CHECK(q.d.norm() == 0.0);

  try {
    assemble(s, x);
    FAIL("expected MissingScheduleValue");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingScheduleValue);
  }
}

TEST_CASE("fixed block is returned unchanged") {
  const StateSpace sys = testing::first_order(2.0);
  const StateSpace k = assemble(spec_of(FixedBlock{sys}), Vector(0));
  CHECK((k.a - sys.a).norm() == 0.0);
  CHECK((k.b - sys.b).norm() == 0.0);
  CHECK((k.c - sys.c).norm() == 0.0);
  CHECK((k.d - sys.d).norm() == 0.0);
}

TEST_CASE("static gain jacobian is an indicator") {
  const StructureSpec s = spec_of(StaticGain{2, 2});
  const ParamJacobian j = jacobian(s, Vector::Zero(4));
  for (int k = 0; k < 4; ++k) {
    const Matrix d = dense(j.quads[k].d);
    CHECK(d.sum() == 1.0);
    CHECK(d(k / 2, k % 2) == 1.0);
  }
}

TEST_CASE("parameter counts") {
  CHECK(parameter_count(spec_of(StaticGain{2, 3})) == 6);
  CHECK(parameter_count(spec_of(RealizablePid{})) == 4);
  CHECK(parameter_count(spec_of(RealizablePid{0.1})) == 3);
  for (int nk : {1, 2, 4})
    for (int nu : {1, 2})
      for (int ny : {1, 3})
        CHECK(parameter_count(spec_of(FullOrder{nk, nu, ny})) == nk * nk + nk * ny + nk * nu + ny * nu);
  std::mt19937_64 rng(21);
  CHECK(parameter_count(spec_of(ObserverBased{testing::random_matrix(rng, 3, 3), testing::random_matrix(rng, 3, 2),
                                              testing::random_matrix(rng, 1, 3)})) == 3 * 2 + 1 * 3);
  CHECK(parameter_count(spec_of(FirstOrderFilter{})) == 1);
  CHECK(parameter_count(spec_of(PolynomialScheduled{Matrix::Zero(1, 3), 2, 3.0})) == 6);
  CHECK(parameter_count(spec_of(FixedBlock{testing::first_order(1.0)})) == 0);
}

TEST_CASE("every variant's jacobian matches finite differences") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& spec : all_variants()) {
    const int n = parameter_count(spec);
    const std::optional<double> q = needs_schedule_value(spec) ? std::optional<double>(2.4) : std::nullopt;
    for (int trial = 0; trial < 10; ++trial) {
      Vector x(n);
      for (int i = 0; i < n; ++i) x(i) = u(rng);
      // Keep time constants and filter poles away from zero.
      if (std::holds_alternative<RealizablePid>(spec.variant) && !std::get<RealizablePid>(spec.variant).fixed_tau)
        x(0) = 0.5 + std::abs(x(0));
      if (std::holds_alternative<Decentralized>(spec.variant)) x(0) = 0.5 + std::abs(x(0));
      check_jacobian(spec, x, q);
    }
  }
}

TEST_CASE("decentralized assembly equals block-diagonal composition") {
  const StructureSpec f = spec_of(FirstOrderFilter{}), p = spec_of(RealizablePid{0.2}), g = spec_of(StaticGain{1, 2});
  const StructureSpec dec = spec_of(Decentralized{{f, p, g}});
  Vector x(6);
  x << 2.0, 1.0, 0.5, 0.1, -0.3, 0.7;
  const StateSpace k = assemble(dec, x);
  const std::vector<StateSpace> parts{assemble(f, x.segment(0, 1)), assemble(p, x.segment(1, 3)),
                                      assemble(g, x.segment(4, 2))};
  const StateSpace ref = compose(ComposeMode::BlockDiag, parts);
  CHECK((k.a - ref.a).norm() == 0.0);
  CHECK((k.b - ref.b).norm() == 0.0);
  CHECK((k.c - ref.c).norm() == 0.0);
  CHECK((k.d - ref.d).norm() == 0.0);
}

TEST_CASE("init_params strategies") {
  const StructureSpec s = spec_of(StaticGain{1, 3});
  CHECK(init_params(s, InitZeros{}).x.isZero());
  const ParamVector a = init_params(spec_of(FullOrder{2, 1, 1}), InitRandom{7});
  const ParamVector b = init_params(spec_of(FullOrder{2, 1, 1}), InitRandom{7});
  CHECK(a.x == b.x);
  CHECK(a.x.cwiseAbs().maxCoeff() <= 1.0);
  Vector given(3);
  given << 0.1, -0.2, 0.3;
  CHECK(init_params(s, InitGiven{given}).x == given);
  const ParamVector pid = init_params(spec_of(RealizablePid{}), InitZeros{});
  CHECK(pid.x(0) == doctest::Approx(0.01));
  CHECK(pid.lo(0) == kPidTauMin);
}

TEST_CASE("bounds are enforced by the ParamVector overload") {
  StructureSpec s = spec_of(StaticGain{1, 1});
  s.bounds = std::make_pair(Vector::Constant(1, 0.5), Vector::Constant(1, 4.0));
  ParamVector pv = make_param_vector(s, Vector::Constant(1, 5.0));
  try {
    assemble(s, pv);
    FAIL("expected BoundViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BoundViolation);
  }
  CHECK(init_params(s, InitGiven{Vector::Constant(1, 9.0)}).x(0) == 4.0);
}

TEST_CASE("structure JSON round trip") {
  for (const auto& spec : all_variants()) {
    const StructureSpec back = structure_from_json(to_json(spec));
    CHECK(parameter_count(back) == parameter_count(spec));
    CHECK(to_json(back) == to_json(spec));
  }
  CHECK_THROWS_AS(structure_from_json(nlohmann::json{{"type", "nope"}}), Error);
  CHECK_THROWS_AS(structure_from_json(nlohmann::json::array()), Error);
}
