#include <doctest.h>

#include "helpers.hpp"
#include "structune/error.hpp"
#include "structune/wave.hpp"

using namespace structune;
using testing::first_order;
using testing::random_matrix;
using testing::random_stable;

namespace {

PartitionedPlant integrator_plant() {
  const Matrix one = Matrix::Ones(1, 1), zero = Matrix::Zero(1, 1);
  return PartitionedPlant(zero, one, one, one, one, zero, zero, zero, zero);
}

PartitionedPlant random_plant(std::mt19937_64& rng, int nx, int nw, int nu, int nz, int ny, bool d22) {
  const StateSpace s = random_stable(rng, nx, nw + nu, nz + ny, true);
  Matrix d = s.d;
  if (!d22) d.bottomRightCorner(ny, nu).setZero();
  return PartitionedPlant(s.a, s.b.leftCols(nw), s.b.rightCols(nu), s.c.topRows(nz), s.c.bottomRows(ny),
                          d.topLeftCorner(nz, nw), d.topRightCorner(nz, nu), d.bottomLeftCorner(ny, nw),
                          d.bottomRightCorner(ny, nu));
}

CMatrix star(const PartitionedPlant& p, const StateSpace& k, double w) {
  const CMatrix pw = freq_response(p.as_state_space(), w);
  const CMatrix kw = freq_response(k, w);
  const int nz = p.nz(), nw = p.nw(), ny = p.ny(), nu = p.nu();
  const CMatrix p11 = pw.topLeftCorner(nz, nw), p12 = pw.topRightCorner(nz, nu);
  const CMatrix p21 = pw.bottomLeftCorner(ny, nw), p22 = pw.bottomRightCorner(ny, nu);
  const CMatrix loop = CMatrix::Identity(ny, ny) - p22 * kw;
  return p11 + p12 * kw * loop.partialPivLu().solve(p21);
}

}  // namespace

TEST_CASE("lft_lower with a zero controller disconnects the loop") {
  std::mt19937_64 rng(1);
  const PartitionedPlant p = random_plant(rng, 3, 1, 1, 1, 1, true);
  const StateSpace k = StateSpace::gain(Matrix::Zero(1, 1));
  const StateSpace t = lft_lower(p, k);
  CHECK((t.a - p.a).norm() == doctest::Approx(0.0));
  CHECK((t.b - p.b1).norm() == doctest::Approx(0.0));
  CHECK((t.c - p.c1).norm() == doctest::Approx(0.0));
  CHECK((t.d - p.d11).norm() == doctest::Approx(0.0));
}

TEST_CASE("lft_lower closes an integrator with static gain") {
  const double kappa = 2.5;
  const StateSpace t = lft_lower(integrator_plant(), StateSpace::gain(Matrix::Constant(1, 1, -kappa)));
  CHECK(t.a(0, 0) == doctest::Approx(-kappa));
  const CMatrix g = freq_response(t, 0.7);
  CHECK(std::abs(g(0, 0) - 1.0 / Complex(kappa, 0.7)) < 1e-14);
}

TEST_CASE("lft_lower rejects an ill-posed loop") {
  PartitionedPlant p = integrator_plant();
  p.d22 = Matrix::Ones(1, 1);
  try {
    lft_lower(p, StateSpace::gain(Matrix::Ones(1, 1)));
    FAIL("expected IllPosed");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IllPosed);
  }
  CHECK_THROWS_AS(lft_lower(p, StateSpace::gain(Matrix::Ones(2, 1))), Error);
}

TEST_CASE("closed_pair examples") {
  std::mt19937_64 rng(2);
  const StateSpace m = random_stable(rng, 3, 2, 2, true);
  const ClosedPair same = closed_pair(m, StateSpace::gain(Matrix::Zero(2, 2)));
  for (double w : {0.0, 0.3, 2.0, 40.0}) CHECK((freq_response(same.system, w) - freq_response(m, w)).norm() < 1e-12);

  const ClosedPair half = closed_pair(StateSpace::gain(Matrix::Ones(1, 1)), StateSpace::gain(Matrix::Ones(1, 1)));
  CHECK(half.system.d(0, 0) == doctest::Approx(0.5));

  Matrix kt(1, 3);
  kt << -1.049, -1.049, -0.05402;
  const ClosedPair wave = closed_pair(build_gtilde(3.0), StateSpace::gain(kt));
  REQUIRE(wave.spectrum.eigenvalues.size() == 1);
  CHECK(wave.spectrum.eigenvalues[0].real() == doctest::Approx(-1.0781).epsilon(1e-3 / 1.0781));
  CHECK(wave.spectrum.abscissa < 0.0);
}

TEST_CASE("closed_pair rejects a singular loop") {
  CHECK_THROWS_AS(closed_pair(StateSpace::gain(Matrix::Ones(1, 1)), StateSpace::gain(-Matrix::Ones(1, 1))), Error);
}

TEST_CASE("freq_response examples") {
  const StateSpace g = first_order(1.0);
  CHECK(std::abs(freq_response(g, 0.0)(0, 0) - 1.0) < 1e-15);
  const Complex v = freq_response(g, 1.0)(0, 0);
  CHECK(std::abs(v - 1.0 / Complex(1.0, 1.0)) < 1e-15);
  CHECK(std::abs(v) == doctest::Approx(0.70711).epsilon(1e-5));
  Matrix d(2, 1);
  d << 0.25, -3.0;
  const CMatrix r = freq_response(StateSpace::gain(d), 17.0);
  CHECK((r - d.cast<Complex>()).norm() == 0.0);
}

TEST_CASE("freq_response at an imaginary-axis pole") {
  const StateSpace integ(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  try {
    freq_response(integ, 0.0);
    FAIL("expected ResolventSingular");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResolventSingular);
  }
}

TEST_CASE("poles examples") {
  Matrix a(2, 2);
  a << 0.0, 1.0, -1.0, -1.0;
  const Spectrum s = poles(StateSpace(a, Matrix::Zero(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1)));
  REQUIRE(s.eigenvalues.size() == 2);
  for (const auto& l : s.eigenvalues) {
    CHECK(l.real() == doctest::Approx(-0.5));
    CHECK(std::abs(l.imag()) == doctest::Approx(0.8660).epsilon(1e-4));
  }
  CHECK(s.abscissa == doctest::Approx(-0.5));
  CHECK(poles(first_order(1.0)).abscissa == doctest::Approx(-1.0));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << -1.0, 2.0;
  CHECK(poles(StateSpace(d, Matrix::Zero(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1))).abscissa == doctest::Approx(2.0));
  CHECK_THROWS_AS(poles(StateSpace::gain(Matrix::Ones(1, 1))), Error);
}

TEST_CASE("compose examples") {
  const StateSpace s1 = first_order(1.0), s2 = first_order(2.0);
  const std::vector<StateSpace> pair{s1, s2};
  const StateSpace bd = compose(ComposeMode::BlockDiag, pair);
  CHECK(bd.nx() == 2);
  CHECK(bd.nu() == 2);
  CHECK(bd.ny() == 2);
  CHECK(bd.a(0, 1) == 0.0);
  CHECK(bd.a(1, 0) == 0.0);

  const StateSpace ser = compose(ComposeMode::Series, pair);
  CHECK(std::abs(freq_response(ser, 0.0)(0, 0) - 0.5) < 1e-14);

  Matrix k0(1, 3), kd(1, 3);
  k0 << 0.0, 0.0, 1.0;
  kd << 0.3, -0.2, 0.1;
  const std::vector<StateSpace> gains{StateSpace::gain(k0), StateSpace::gain(kd)};
  CHECK((compose(ComposeMode::Sum, gains).d - (k0 + kd)).norm() < 1e-15);

  const StateSpace par = compose(ComposeMode::Parallel, pair);
  CHECK(par.nu() == 1);
  CHECK(par.ny() == 2);

  const std::vector<StateSpace> bad{StateSpace::gain(k0), StateSpace::gain(k0)};
  CHECK_THROWS_AS(compose(ComposeMode::Series, bad), Error);
}

TEST_CASE("lft_lower matches the pointwise star product") {
  std::mt19937_64 rng(3);
  const PartitionedPlant p = random_plant(rng, 4, 2, 2, 2, 2, true);
  const StateSpace k = random_stable(rng, 2, 2, 2, true).scaled(0.2);
  const StateSpace t = lft_lower(p, k);
  std::uniform_real_distribution<double> lw(-2.0, 2.0);
  for (int i = 0; i < 30; ++i) {
    const double w = std::pow(10.0, lw(rng));
    const CMatrix ref = star(p, k, w);
    CHECK((freq_response(t, w) - ref).norm() <= 1e-10 * ref.norm());
  }
}

TEST_CASE("block-diagonal poles are the union of the parts") {
  std::mt19937_64 rng(4);
  const StateSpace a = random_stable(rng, 3, 1, 1), b = random_stable(rng, 2, 1, 1);
  const std::vector<StateSpace> parts{a, b};
  auto all = poles(compose(ComposeMode::BlockDiag, parts)).eigenvalues;
  auto expect = poles(a).eigenvalues;
  for (const auto& l : poles(b).eigenvalues) expect.push_back(l);
  REQUIRE(all.size() == expect.size());
  for (const auto& l : expect) {
    auto it = std::min_element(all.begin(), all.end(),
                               [&](Complex x, Complex y) { return std::abs(x - l) < std::abs(y - l); });
    CHECK(std::abs(*it - l) < 1e-8);
    all.erase(it);
  }
}

TEST_CASE("lft_lower equals a closed_pair assembly when D22 = 0") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const PartitionedPlant p = random_plant(rng, 3, 1, 1, 1, 1, false);
    const StateSpace k = random_stable(rng, 1, 1, 1, true).scaled(0.3);
    const StateSpace p11(p.a, p.b1, p.c1, p.d11), p12(p.a, p.b2, p.c1, p.d12);
    const StateSpace p21(p.a, p.b1, p.c2, p.d21), p22(p.a, p.b2, p.c2, p.d22);
    // K (I - P22 K)^{-1} is the negative-feedback pair of K and -P22.
    const StateSpace f = closed_pair(k, p22.scaled(-1.0)).system;
    const std::vector<StateSpace> chain{p21, f, p12};
    const std::vector<StateSpace> sum{p11, compose(ComposeMode::Series, chain)};
    const StateSpace assembled = compose(ComposeMode::Sum, sum);
    const StateSpace t = lft_lower(p, k);
    for (double w : {0.0, 0.5, 3.0}) {
      const CMatrix ref = freq_response(assembled, w);
      CHECK((freq_response(t, w) - ref).norm() <= 1e-9 * (1.0 + ref.norm()));
    }
  }
}

TEST_CASE("StateSpace validates dimensions and finiteness") {
  CHECK_THROWS_AS(StateSpace(Matrix::Zero(2, 2), Matrix::Zero(1, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1)), Error);
  Matrix bad = Matrix::Zero(1, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(StateSpace(bad, Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1)), Error);
}
