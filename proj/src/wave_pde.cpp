#include "structune/wave_pde.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "structune/error.hpp"
#include "structune/wave.hpp"

namespace structune {

namespace {

double eval_or_zero(const std::function<double(double)>& f, double x) { return f ? f(x) : 0.0; }

// (1/2) * integral of g over [a, b], composite Simpson.
double half_integral(const std::function<double(double)>& g, double a, double b) {
  if (!g) return 0.0;
  constexpr int m = 16;
  const double h = (b - a) / m;
  double s = g(a) + g(b);
  for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * g(a + k * h);
  return 0.5 * s * h / 3.0;
}

}  // namespace

void WaveScenario::validate() const {
  wave_q_factor(q);
  if (n < 50) throw Error(ErrorKind::InvalidArgument, "wave grid needs at least 50 intervals");
  if (!(horizon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be >= 0");
  if (std::abs(cfl - 1.0) > 1e-15) throw Error(ErrorKind::CFLViolation, "leapfrog scheme requires CFL = 1");
}

WaveTraces simulate_wave_pde(const WaveScenario& sc, const DelayNetwork* controller) {
  sc.validate();
  const int n = sc.n;
  const double h = 1.0 / n;
  const double q = sc.q;
  const int steps = static_cast<int>(std::llround(sc.horizon / h));

  std::vector<double> prev(n + 1), cur(n + 1), next(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double xi = i * h;
    cur[i] = eval_or_zero(sc.displacement, xi);
    // d'Alembert at t = -h.
    prev[i] = 0.5 * (eval_or_zero(sc.displacement, xi - h) + eval_or_zero(sc.displacement, xi + h)) -
              half_integral(sc.velocity, xi - h, xi + h);
  }

  std::optional<NetworkSimulator> sim;
  if (controller) {
    if (controller->n_inputs() != 3 || controller->n_outputs() != 1)
      throw Error(ErrorKind::DimensionMismatch, "controller must map 3 outputs to 1 input");
    sim.emplace(*controller, h);
  }

  WaveTraces tr;
  tr.t.reserve(steps + 1);
  double y3_prev = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double t = k * h;
    const double r = eval_or_zero(sc.reference, t);
    const double a = (cur[n - 1] - prev[n]) / h;  // y3 = a + u
    const double y1 = cur[0], y2 = cur[n];
    double u = r;
    if (sim) {
      Vector yv(3);
      yv << y1, y2, a;
      const double out0 = sim->outputs(yv)(0);
      yv(2) = a + 1.0;
      const double slope = sim->outputs(yv)(0) - out0;
      if (std::abs(1.0 + slope) < 1e-12) throw Error(ErrorKind::AlgebraicLoop, "boundary loop is singular");
      u = (r - out0) / (1.0 + slope);
      yv(2) = a + u;
      sim->commit(yv);
    }
    const double y3 = a + u;
    tr.t.push_back(t);
    tr.y1.push_back(y1);
    tr.y2.push_back(y2);
    tr.y3.push_back(y3);
    tr.u.push_back(u);
    tr.r.push_back(r);
    if (k == steps) break;

    for (int i = 1; i < n; ++i) next[i] = cur[i + 1] + cur[i - 1] - prev[i];
    next[0] = (2.0 * cur[1] - (1.0 + q) * prev[0]) / (1.0 - q);
    next[n] = 2.0 * cur[n - 1] + 2.0 * h * u - prev[n];

    if (sim) {
      const double n1 = next[0], n2 = next[n];
      const double slope3 = k > 0 ? (y3 - y3_prev) : 0.0;
      sim->advance([&](double tq) {
        const double s = (tq - t) / h;
        Vector yv(3);
        yv << (1.0 - s) * y1 + s * n1, (1.0 - s) * y2 + s * n2, y3 + s * slope3;
        return yv;
      });
    }
    y3_prev = y3;
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  tr.profile = cur;
  return tr;
}

WaveTraces simulate_wave_network(const WaveScenario& sc, const Matrix& k_tilde) {
  sc.validate();
  if (sc.displacement || sc.velocity)
    throw Error(ErrorKind::InvalidArgument, "network model starts from zero initial data");
  const double h = 1.0 / sc.n;
  const DelayNetwork net = wave_closed_loop_network(k_tilde, sc.q);
  auto ref = [&](double t) {
    Vector e(1);
    e(0) = eval_or_zero(sc.reference, t);
    return e;
  };
  const Traces raw = simulate_network(net, ref, h, sc.horizon);
  WaveTraces tr;
  tr.t = raw.t;
  for (std::size_t k = 0; k < raw.t.size(); ++k) {
    const auto row = raw.outputs.row(static_cast<Eigen::Index>(k));
    tr.y1.push_back(row(0));
    tr.y2.push_back(row(1));
    tr.y3.push_back(row(2));
    tr.u.push_back(row(3));
    tr.r.push_back(raw.inputs(static_cast<Eigen::Index>(k), 0));
  }
  return tr;
}

void write_trace_csv(std::ostream& os, const WaveTraces& tr, bool with_reference) {
  os << (with_reference ? "t,y1,y2,y3,u,r\n" : "t,y1,y2,y3,u\n");
  char buf[512];
  for (std::size_t k = 0; k < tr.size(); ++k) {
    int len = std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g", tr.t[k], tr.y1[k], tr.y2[k], tr.y3[k],
                            tr.u[k]);
    if (with_reference) len += std::snprintf(buf + len, sizeof buf - len, ",%.12g", tr.r[k]);
    os.write(buf, len);
    os << '\n';
  }
}

}  // namespace structune
