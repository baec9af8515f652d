#include <doctest.h>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "structune/delay_network.hpp"
#include "structune/error.hpp"
#include "structune/wave.hpp"
#include "structune/wave_demo.hpp"
#include "structune/wave_pde.hpp"

using namespace structune;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidArgument;
}

double crel(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

// Independent solution of x_tt = x_xixi, x_xi(0) = -q x_t(0), x_xi(1) = u in the Laplace domain.
CVector wave_oracle(double q, Complex s) {
  const Complex den = s * (std::sinh(s) - q * std::cosh(s));
  const Complex g0 = 1.0 / den, g1 = (std::cosh(s) - q * std::sinh(s)) / den;
  CVector g(3);
  g << g0, g1, s * g1;
  return g / (1.0 + g(2));
}

CVector phi_oracle(double q, Complex s) {
  const double big_q = (1 + q) / (1 - q);
  CVector p(3);
  p << -(1.0 - std::exp(-s)) / (s * (1 - q)), -big_q * (1.0 - std::exp(-2.0 * s)) / (2.0 * s),
      big_q / 2.0 * std::exp(-2.0 * s);
  return p;
}

std::size_t index_at(const std::vector<double>& t, double tq) {
  return static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), tq - 1e-12) - t.begin());
}

Vector step(double) { return Vector::Ones(1); }

}  // namespace

TEST_CASE("build_gtilde examples") {
  const StateSpace g3 = build_gtilde(3.0);
  CHECK(g3.nx() == 1);
  CHECK(g3.a(0, 0) == 0.0);
  CHECK(g3.b(0, 0) == 1.0);
  CHECK(g3.c(0, 0) == doctest::Approx(-0.5));
  CHECK(g3.c(1, 0) == doctest::Approx(-0.5));
  CHECK(g3.c(2, 0) == 0.0);
  CHECK(g3.d(2, 0) == doctest::Approx(0.5));
  CHECK(build_gtilde(2.0).c(0, 0) == doctest::Approx(-1.0));
  for (double q : {0.3, 2.0, 5.0}) CHECK(build_gtilde(q).c.row(0) == build_gtilde(q).c.row(1));
  CHECK(kind_of([] { build_gtilde(1.0); }) == ErrorKind::QEqualsOne);
  CHECK(kind_of([] { build_phi(1.0); }) == ErrorKind::QEqualsOne);
  CHECK(kind_of([] { build_gtilde(-2.0); }) == ErrorKind::InvalidArgument);
  CHECK(wave_q_factor(3.0) == doctest::Approx(-2.0));
}

TEST_CASE("phi network matches the closed form") {
  const Complex s(0.0, 0.7);
  const CMatrix net = build_phi(3.0).response(s);
  CHECK((net.col(0) - phi_oracle(3.0, s)).norm() <= 1e-10);
  CHECK((phi_closed_form(3.0, s) - phi_oracle(3.0, s)).norm() <= 1e-12);
  // Finite DC limit.
  CHECK(phi_closed_form(3.0, 0.0)(0).real() == doctest::Approx(-1.0 / (1.0 - 3.0)));
  CHECK(std::abs(build_phi(3.0).response(Complex(0.0, 1e-7))(0, 0) - Complex(0.5, 0.0)) <= 1e-6);
}

TEST_CASE("G~ + Phi equals the prestabilized wave transfer") {
  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> w(0.05, 20.0);
  for (double q : {2.0, 3.0, 4.0}) {
    const StateSpace gt = build_gtilde(q);
    for (int i = 0; i < 20; ++i) {
      const Complex s(0.0, w(rng));
      const CVector sum = eval_at(gt, s).col(0) + phi_closed_form(q, s);
      const CVector oracle = wave_oracle(q, s);
      CHECK(crel(sum, oracle) <= 1e-9);
      CHECK(crel(prestabilized_network(q).response(s).col(0), oracle) <= 1e-9);
      CHECK(crel(prestabilized_outputs(q, s), oracle) <= 1e-9);
    }
  }
}

TEST_CASE("recovered controller matches the hand formula") {
  const Matrix kt = published_gains().nominal;
  const Complex s(0.0, 1.0);
  const CMatrix ktc = kt.cast<Complex>();
  const CMatrix phi = phi_oracle(3.0, s);
  const CMatrix hand =
      wave_k0().cast<Complex>() + ktc * (CMatrix::Identity(3, 3) - phi * ktc).inverse();
  // Push-through form of the same expression.
  const CMatrix scalar = wave_k0().cast<Complex>() + ktc / (1.0 - (ktc * phi)(0, 0));
  CHECK(crel(hand, scalar) <= 1e-12);
  CHECK(crel(recover_controller(kt, 3.0).response(s), hand) <= 1e-9);
}

TEST_CASE("scheduled controller collapses to the nominal one at q0") {
  const ScheduledGains g = published_gains();
  CHECK((g.at(g.q0) - g.nominal).norm() == 0.0);
  const DelayNetwork k1 = recover_controller(g.nominal, 3.0), k2 = recover_controller(g.at(3.0), 3.0);
  for (double w : {0.1, 1.0, 5.0}) CHECK(crel(k2.freq_response(w), k1.freq_response(w)) == 0.0);
  // Published schedule values.
  const Matrix at2 = g.at(2.0);
  CHECK(at2(0, 0) == doctest::Approx(-0.89979).epsilon(1e-9));
  CHECK(at2(0, 2) == doctest::Approx(0.07983).epsilon(1e-9));
}

TEST_CASE("loop transformation equivalence") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> w(0.01, 30.0);
  const DelayNetwork gt = DelayNetwork::from_system(build_gtilde(3.0));
  const DelayNetwork phi = build_phi(3.0);
  const DelayNetwork plant = parallel_sum(gt, phi);
  std::vector<DelayNetwork> controllers{DelayNetwork::gain(published_gains().nominal),
                                        recover_inner(published_gains().nominal, 3.0)};
  StateSpace dyn = testing::random_stable(rng, 2, 3, 1, true);
  dyn = dyn.scaled(0.3);
  controllers.push_back(DelayNetwork::from_system(dyn));
  for (const auto& k : controllers) {
    const DelayNetwork loop1 = feedback(k, plant);
    const DelayNetwork loop2 = feedback(feedback(k, phi), gt);
    for (int i = 0; i < 20; ++i) {
      const Complex s(0.0, w(rng));
      CHECK(crel(loop1.response(s), loop2.response(s)) <= 1e-8);
    }
  }
}

TEST_CASE("simulate_network examples") {
  SUBCASE("pure delay") {
    DelayNetwork d(1, 1);
    const int b = d.add_delay(1.0);
    d.connect_input(0, b, 0);
    d.connect_output(b, 0, 0);
    const double dt = 0.01;
    const Traces tr = simulate_network(d, step, dt, 2.0);
    CHECK(tr.outputs(index_at(tr.t, 1.0 - dt), 0) == doctest::Approx(0.0));
    CHECK(tr.outputs(index_at(tr.t, 1.0 + dt), 0) == doctest::Approx(1.0));
    CHECK(tr.outputs(index_at(tr.t, 0.5), 0) == 0.0);
  }
  SUBCASE("integrator ramp") {
    const StateSpace integ(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
    const double horizon = 10.0;
    const Traces tr = simulate_network(DelayNetwork::from_system(integ), step, 1e-3, horizon);
    double err = 0.0;
    for (std::size_t i = 0; i < tr.t.size(); ++i) err = std::max(err, std::abs(tr.outputs(i, 0) - tr.t[i]));
    CHECK(err <= 1e-9 * horizon);
  }
  SUBCASE("first-order lag") {
    const Traces tr = simulate_network(DelayNetwork::from_system(testing::first_order(1.0)), step, 1e-3, 1.5);
    CHECK(std::abs(tr.outputs(index_at(tr.t, 1.0), 0) - (1.0 - std::exp(-1.0))) <= 1e-8);
  }
}

TEST_CASE("simulator guards") {
  DelayNetwork d(1, 1);
  const int b = d.add_delay(1.0);
  d.connect_input(0, b, 0);
  d.connect_output(b, 0, 0);
  CHECK(kind_of([&] { NetworkSimulator(d, 0.2); }) == ErrorKind::StepTooLarge);

  const DelayNetwork loop = feedback(DelayNetwork::gain(Matrix::Ones(1, 1)), DelayNetwork::gain(Matrix::Ones(1, 1)), -1.0);
  CHECK(kind_of([&] { NetworkSimulator(loop, 0.01); }) == ErrorKind::AlgebraicLoop);
  CHECK(kind_of([] { DelayNetwork(1, 1).add_delay(-1.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("phi step response stays bounded") {
  const double q = 3.0, big_q = wave_q_factor(q);
  const Traces tr = simulate_network(build_phi(q), step, 0.01, 100.0);
  CHECK(tr.outputs.cwiseAbs().maxCoeff() <= std::abs(big_q) + 1.0);
  const Eigen::Index last = tr.outputs.rows() - 1;
  // Fixed-step RK4 samples the delayed step discontinuity once, an O(dt) effect.
  CHECK(tr.outputs(last, 0) == doctest::Approx(-1.0 / (1.0 - q)).epsilon(0.01));
  CHECK(tr.outputs(last, 1) == doctest::Approx(-big_q).epsilon(0.01));
  CHECK(tr.outputs(last, 2) == doctest::Approx(big_q / 2.0).epsilon(1e-12));
}

TEST_CASE("leapfrog reproduces d'Alembert translation") {
  auto bump = [](double xi) {
    const double r = (xi - 0.5) / 0.1;
    return std::abs(r) < 1.0 ? std::pow(std::cos(M_PI * r / 2.0), 4) : 0.0;
  };
  for (double q : {0.5, 2.0, 3.0}) {
    WaveScenario sc;
    sc.q = q;
    sc.n = 400;
    sc.horizon = 0.3;
    sc.displacement = bump;
    const WaveTraces tr = simulate_wave_pde(sc, nullptr);
    const double t = tr.t.back();
    double err = 0.0;
    for (int i = 0; i <= sc.n; ++i) {
      const double xi = static_cast<double>(i) / sc.n;
      err = std::max(err, std::abs(tr.profile[i] - 0.5 * (bump(xi - t) + bump(xi + t))));
    }
    CHECK(err <= 1e-12);
    for (double y : tr.y1) CHECK(y == 0.0);
  }
}

TEST_CASE("wave simulators with zero data stay at rest") {
  WaveScenario sc;
  sc.horizon = 2.0;
  const DelayNetwork k = recover_controller(published_gains().nominal, 3.0);
  const WaveTraces a = simulate_wave_pde(sc, &k);
  const WaveTraces b = simulate_wave_network(sc, published_gains().nominal);
  for (const auto* tr : {&a, &b})
    for (const auto* v : {&tr->y1, &tr->y2, &tr->y3, &tr->u})
      for (double x : *v) CHECK(x == 0.0);
}

TEST_CASE("wave scenario validation") {
  WaveScenario sc;
  sc.cfl = 0.9;
  CHECK(kind_of([&] { simulate_wave_pde(sc, nullptr); }) == ErrorKind::CFLViolation);
  sc.cfl = 1.0;
  sc.n = 20;
  CHECK_THROWS_AS(simulate_wave_pde(sc, nullptr), Error);
  sc.n = 400;
  sc.q = 1.0;
  CHECK(kind_of([&] { simulate_wave_pde(sc, nullptr); }) == ErrorKind::QEqualsOne);
}

TEST_CASE("PDE and delay-network closed loops agree") {
  const Matrix kt = published_gains().nominal;
  WaveScenario sc;
  sc.q = 3.0;
  sc.reference = smooth_step;
  const DelayNetwork k = recover_controller(kt, sc.q);
  const WaveTraces pde = simulate_wave_pde(sc, &k);
  const WaveTraces net = simulate_wave_network(sc, kt);
  REQUIRE(pde.size() == net.size());
  double err = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < pde.size(); ++i) {
    err = std::max({err, std::abs(pde.y1[i] - net.y1[i]), std::abs(pde.y2[i] - net.y2[i]),
                    std::abs(pde.y3[i] - net.y3[i]), std::abs(pde.u[i] - net.u[i])});
    peak = std::max(peak, std::abs(pde.y1[i]));
  }
  CHECK(err <= 1e-3);
  CHECK(std::isfinite(peak));
  // The boundary velocity settles once the reference has been tracked.
  double tail = 0.0;
  for (std::size_t i = pde.size() * 3 / 4; i < pde.size(); ++i) tail = std::max(tail, std::abs(pde.y3[i]));
  CHECK(tail <= 1e-2);
}

TEST_CASE("trace CSV layout") {
  WaveTraces tr;
  tr.t = {0.0, 0.5};
  tr.y1 = {1.0, 2.0};
  tr.y2 = {0.0, 0.0};
  tr.y3 = {0.0, 1.0 / 3.0};
  tr.u = {0.0, 0.0};
  tr.r = {1.0, 1.0};
  std::ostringstream os;
  write_trace_csv(os, tr);
  CHECK(os.str() == "t,y1,y2,y3,u,r\n0,1,0,0,0,1\n0.5,2,0,0.333333333333,0,1\n");
  std::ostringstream no_r;
  write_trace_csv(no_r, tr, false);
  CHECK(no_r.str().substr(0, 13) == "t,y1,y2,y3,u\n");
}
