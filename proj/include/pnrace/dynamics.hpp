#pragma once

// Quadrotor rigid-body model: thrust along body z, quadratic drag, a
// quaternion-error attitude controller and a first-order rate loop.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "pnrace/common.hpp"
#include "pnrace/control.hpp"
#include "pnrace/rk4.hpp"

namespace pnrace {

struct QuadrotorState {
  Vec3 p_w = Vec3::Zero();
  Quat q_bw = Quat::Identity();  // body to world
  Vec3 v_w = Vec3::Zero();
  Vec3 omega_b = Vec3::Zero();
};

struct VehicleParams {
  double m = 2.0;  // [kg]
  double tau_omega = 0.05;  // rate-loop time constant [s]
  double tau_att = 0.15;  // attitude-loop time constant [s]
  double f_th_max_newtons = 60.0;
  double drag_coeff = 0.02;  // [kg/m]
  Vec3 g = gravity_world();

  /// Thrust ceiling as an acceleration.
  double f_th_max() const { return f_th_max_newtons / m; }

  void validate() const {
    if (!(m > 0.0 && tau_omega > 0.0 && tau_att > 0.0)) {
      throw std::invalid_argument("mass and time constants must be positive");
    }
    // A zero thrust ceiling is accepted to model a disabled vehicle.
    if (!(f_th_max_newtons >= 0.0 && drag_coeff >= 0.0)) {
      throw std::invalid_argument("thrust ceiling and drag must be non-negative");
    }
  }
};

struct WindField {
  Vec3 v_wind = Vec3::Zero();
};

/// omega_c = (2 / tau) sgn(q_e0) q_e,vec with q_e = q_bw^-1 q_c; sgn(0) = +1.
inline Vec3 attitude_rate_command(const Quat& q_bw, const Quat& q_c, double tau_att) {
  const Quat q_e = q_bw.conjugate() * q_c;
  const double sgn = q_e.w() < 0.0 ? -1.0 : 1.0;
  return (2.0 / tau_att) * sgn * q_e.vec();
}

/// Quadratic drag in the body frame, f = c |v_air| v_air.
inline Vec3 aero_force_body(const QuadrotorState& x, const VehicleParams& p, const WindField& wind) {
  const Vec3 v_air_b = x.q_bw.conjugate() * (x.v_w - wind.v_wind);
  return p.drag_coeff * v_air_b.norm() * v_air_b;
}

/// State packed as (p, q[w x y z], v, omega).
using StateVector = Eigen::Matrix<double, 13, 1>;

inline StateVector pack(const QuadrotorState& x) {
  StateVector s;
  s << x.p_w, x.q_bw.w(), x.q_bw.x(), x.q_bw.y(), x.q_bw.z(), x.v_w, x.omega_b;
  return s;
}

inline QuadrotorState unpack(const StateVector& s) {
  QuadrotorState x;
  x.p_w = s.segment<3>(0);
  x.q_bw = Quat(s(3), s(4), s(5), s(6));
  x.v_w = s.segment<3>(7);
  x.omega_b = s.segment<3>(10);
  return x;
}

/// Time derivative of the packed state for a held command. Rotations use
/// the normalized stage quaternion.
inline StateVector dynamics_derivative(const QuadrotorState& x, const ControlCommand& u,
                                       const VehicleParams& p, const WindField& wind) {
  const Quat q = x.q_bw;
  const Quat q_dot_half = q * Quat(0.0, x.omega_b.x(), x.omega_b.y(), x.omega_b.z());
  QuadrotorState unit = x;
  unit.q_bw.normalize();
  const Mat3 r_bw = unit.q_bw.toRotationMatrix();
  const Vec3 thrust_b = u.f_th * p.m * Vec3::UnitZ();
  const Vec3 v_dot = r_bw * (thrust_b - aero_force_body(unit, p, wind)) / p.m + p.g;
  const Vec3 omega_c = attitude_rate_command(unit.q_bw, u.q_c, p.tau_att);

  StateVector d;
  d << x.v_w, 0.5 * q_dot_half.w(), 0.5 * q_dot_half.x(), 0.5 * q_dot_half.y(),
      0.5 * q_dot_half.z(), v_dot, (omega_c - x.omega_b) / p.tau_omega;
  return d;
}

/// One RK4 step with the command held, thrust clamped to [0, f_th_max] and
/// the attitude quaternion renormalized afterwards.
inline QuadrotorState integrate_step(const QuadrotorState& x, ControlCommand u, const VehicleParams& p,
                                     const WindField& wind, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  u.f_th = std::clamp(u.f_th, 0.0, p.f_th_max());
  const StateVector next = rk4_step(pack(x), dt, [&](const StateVector& s) {
    return dynamics_derivative(unpack(s), u, p, wind);
  });
  if (!next.allFinite()) throw SimulationDivergedError("non-finite quadrotor state");
  QuadrotorState out = unpack(next);
  out.q_bw.normalize();
  return out;
}

}  // namespace pnrace
