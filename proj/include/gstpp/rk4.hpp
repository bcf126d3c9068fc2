#pragma once

#include <cmath>
#include <utility>
#include <vector>

namespace gstpp {

/// Classical 4th-order fixed-step integrator over [t0, t1], step count
/// n = ceil((t1−t0)/h_max) so every step is equal and ≤ h_max.
///
/// Ops must provide:
///   Deriv rhs(const State&, double t)
///   State add_scaled(const State&, const std::vector<std::pair<double, const Deriv*>>&)
template <class State, class Deriv, class Ops>
State rk4_step(const State& y, double t, double h, Ops&& ops) {
  Deriv k1 = ops.rhs(y, t);
  State y2 = ops.add_scaled(y, {{h / 2, &k1}});
  Deriv k2 = ops.rhs(y2, t + h / 2);
  State y3 = ops.add_scaled(y, {{h / 2, &k2}});
  Deriv k3 = ops.rhs(y3, t + h / 2);
  State y4 = ops.add_scaled(y, {{h, &k3}});
  Deriv k4 = ops.rhs(y4, t + h);
  return ops.add_scaled(y, {{h / 6, &k1}, {h / 3, &k2}, {h / 3, &k3}, {h / 6, &k4}});
}

template <class State, class Deriv, class Ops>
State rk4_integrate(State y, double t0, double t1, double h_max, Ops&& ops) {
  if (!(t1 > t0)) return y;
  const long n = static_cast<long>(std::ceil((t1 - t0) / h_max));
  const double h = (t1 - t0) / static_cast<double>(n);
  for (long i = 0; i < n; ++i) y = rk4_step<State, Deriv>(y, t0 + static_cast<double>(i) * h, h, ops);
  return y;
}

}  // namespace gstpp
