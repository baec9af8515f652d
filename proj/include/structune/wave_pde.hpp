#pragma once

#include <functional>
#include <optional>
#include <iosfwd>
#include <vector>

#include "structune/delay_network.hpp"

namespace structune {

struct WaveScenario {
  double q = 3.0;
  int n = 400;           // grid intervals; dxi = 1/n, dt = dxi
  double horizon = 20.0;
  double cfl = 1.0;      // must be exactly 1
  std::function<double(double)> displacement;  // x(xi, 0); zero when empty
  std::function<double(double)> velocity;      // x_t(xi, 0); zero when empty
  std::function<double(double)> reference;     // r(t); zero when empty

  void validate() const;
};

struct WaveTraces {
  std::vector<double> t;
  std::vector<double> y1, y2, y3, u, r;
  /// Displacement on the grid at the final time.
  std::vector<double> profile;

  std::size_t size() const { return t.size(); }
};

/// Leapfrog at CFL 1. With a controller network (inputs y, one output K* y) the plant
/// input is u = r - K* y, resolved against the controller's feedthrough each step;
/// without one, u = r.
WaveTraces simulate_wave_pde(const WaveScenario& scenario, const DelayNetwork* controller);

/// Same closed loop through the delay model of the prestabilized plant (zero initial data).
WaveTraces simulate_wave_network(const WaveScenario& scenario, const Matrix& k_tilde);

/// CSV header t,y1,y2,y3,u[,r]; 12 significant digits.
void write_trace_csv(std::ostream& os, const WaveTraces& traces, bool with_reference = true);

}  // namespace structune
