#pragma once

namespace pnrace {

/// Classic fixed-step fourth-order Runge-Kutta step for x' = f(x).
/// State must form a vector space under + and scalar *.
template <typename State, typename Deriv>
State rk4_step(const State& x, double dt, Deriv&& f) {
  const State k1 = f(x);
  const State k2 = f(State(x + (0.5 * dt) * k1));
  const State k3 = f(State(x + (0.5 * dt) * k2));
  const State k4 = f(State(x + dt * k3));
  return State(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace pnrace
