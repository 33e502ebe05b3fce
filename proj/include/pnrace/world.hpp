#pragma once

// Gate motion models, gate-plane crossing detection and the engagement
// scenario sampler.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pnrace/common.hpp"
#include "pnrace/control.hpp"
#include "pnrace/dynamics.hpp"
#include "pnrace/pn_core.hpp"

namespace pnrace {

enum class MotionKind { stationary, linear, planar, knot };

/// Default angular rates of the periodic motions. Planar: peak acceleration
/// 4.0 m/s^2 at amplitude 2 m (peak speed is then 2.36 m/s; 1.24 rad/s gives
/// the 3.1 m/s speed instead). Knot: 1.2 m/s and 0.89 m/s^2 at amplitude 1 m.
inline constexpr double kPlanarOmega = 0.94574;
inline constexpr double kPlanarOmegaSpeedMatched = 1.24;
inline constexpr double kKnotOmega = 0.19931;

struct GateTrajectory {
  MotionKind kind = MotionKind::stationary;
  Vec3 p0 = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();  // linear only
  double amplitude = 0.0;  // d_plan or d_knot [m]
  double omega = 0.0;  // [rad/s]
  double radius = 1.0;  // [m]
  double phase = 0.0;  // [s], shifts the time argument
  Vec3 normal = Vec3::UnitX();  // gate-plane normal, fixed

  void validate() const {
    if (!(radius > 0.0)) throw std::invalid_argument("gate radius must be positive");
    if ((kind == MotionKind::planar || kind == MotionKind::knot) && !(amplitude > 0.0 && omega > 0.0)) {
      throw std::invalid_argument("periodic gate motion needs positive amplitude and omega");
    }
  }
};

namespace detail {
/// Peak of |planar_shape_d|: sin^2 a = 5/8 gives sqrt(25/16).
inline constexpr double kPlanarPeakShapeSpeed = 1.25;

/// Unit-amplitude shape and its first derivative w.r.t. the angle a = omega t.
inline Vec3 planar_shape(double a) { return {std::cos(a), 0.5 * std::cos(2 * a), 0.0}; }
inline Vec3 planar_shape_d(double a) { return {-std::sin(a), -std::sin(2 * a), 0.0}; }

inline Vec3 knot_shape(double a) {
  return {std::sin(3 * a) * (1.0 + 0.5 * std::cos(2 * a)), std::sin(3 * a) * std::sin(2 * a),
          std::sin(4 * a)};
}
inline Vec3 knot_shape_d(double a) {
  const double s3 = std::sin(3 * a), c3 = std::cos(3 * a);
  const double s2 = std::sin(2 * a), c2 = std::cos(2 * a);
  return {3 * c3 * (1.0 + 0.5 * c2) - s3 * s2, 3 * c3 * s2 + 2 * s3 * c2, 4 * std::cos(4 * a)};
}
}  // namespace detail

/// Offset of the gate from p0 at path time tau (phase already applied).
inline Vec3 gate_offset(const GateTrajectory& g, double tau) {
  switch (g.kind) {
    case MotionKind::stationary: return Vec3::Zero();
    case MotionKind::linear: return g.velocity * tau;
    case MotionKind::planar: return g.amplitude * detail::planar_shape(g.omega * tau);
    case MotionKind::knot: return g.amplitude * detail::knot_shape(g.omega * tau);
  }
  return Vec3::Zero();
}

inline Vec3 gate_position(const GateTrajectory& g, double t) { return g.p0 + gate_offset(g, t + g.phase); }

inline Vec3 gate_velocity(const GateTrajectory& g, double t) {
  const double tau = t + g.phase;
  switch (g.kind) {
    case MotionKind::stationary: return Vec3::Zero();
    case MotionKind::linear: return g.velocity;
    case MotionKind::planar: return g.amplitude * g.omega * detail::planar_shape_d(g.omega * tau);
    case MotionKind::knot: return g.amplitude * g.omega * detail::knot_shape_d(g.omega * tau);
  }
  return Vec3::Zero();
}

struct GateCrossing {
  double d_center = 0.0;
  double t_gate = 0.0;
  Vec3 point = Vec3::Zero();
};

/// Detects a crossing of the gate plane (normal fixed, through the moving
/// gate center) between two consecutive states, front to back. The crossing
/// point and time are interpolated linearly.
inline std::optional<GateCrossing> check_gate_pass(const QuadrotorState& prev, double t_prev,
                                                   const QuadrotorState& curr, double t_curr,
                                                   const GateTrajectory& gate) {
  const double s0 = (prev.p_w - gate_position(gate, t_prev)).dot(gate.normal);
  const double s1 = (curr.p_w - gate_position(gate, t_curr)).dot(gate.normal);
  if (!(s0 < 0.0 && s1 >= 0.0)) return std::nullopt;
  const double frac = s0 / (s0 - s1);
  GateCrossing c;
  c.t_gate = t_prev + frac * (t_curr - t_prev);
  c.point = prev.p_w + frac * (curr.p_w - prev.p_w);
  c.d_center = (c.point - gate_position(gate, c.t_gate)).norm();
  return c;
}

/// Named gate motions used by the experiments.
enum class GateMotion { stationary, linear_slow, linear_fast, planar, knot };

inline constexpr GateMotion kAllMotions[] = {GateMotion::stationary, GateMotion::linear_slow,
                                             GateMotion::linear_fast, GateMotion::planar,
                                             GateMotion::knot};

inline std::string_view to_string(GateMotion m) {
  switch (m) {
    case GateMotion::stationary: return "stationary";
    case GateMotion::linear_slow: return "linear_slow";
    case GateMotion::linear_fast: return "linear_fast";
    case GateMotion::planar: return "planar";
    case GateMotion::knot: return "knot";
  }
  return "?";
}

inline GateMotion parse_motion(std::string_view s) {
  for (GateMotion m : kAllMotions) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown gate motion '" + std::string(s) + "'");
}

/// Shape parameters of one motion condition.
struct MotionSpec {
  GateMotion motion = GateMotion::stationary;
  double linear_speed = 0.0;  // 0 selects the named default
  double amplitude = 0.0;  // 0 selects the named default
  double omega = 0.0;  // 0 selects the named default
};

/// Ranges of the sampled initial conditions.
struct InitialConditionRanges {
  double distance_min = 20.0;
  double distance_max = 30.0;
  double speed = 10.0;
  double max_offset_angle = deg2rad(10.0);

  void validate() const {
    if (!(distance_min > 0.0 && distance_max >= distance_min)) {
      throw std::invalid_argument("invalid initial distance range");
    }
    if (!(speed >= 0.0 && max_offset_angle >= 0.0)) {
      throw std::invalid_argument("invalid initial speed/angle");
    }
  }
};

struct Scenario {
  GateTrajectory gate;
  double initial_distance = 25.0;
  double initial_speed = 10.0;
  double velocity_offset_angle = 0.0;  // horizontal, from the initial LOS
  std::uint64_t seed = 0;

  /// Quadrotor starts at the origin, level, camera on the gate (+x).
  QuadrotorState initial_state() const {
    QuadrotorState x;
    x.v_w = initial_speed *
            Vec3(std::cos(velocity_offset_angle), std::sin(velocity_offset_angle), 0.0);
    return x;
  }
};

/// Samples initial distance, velocity offset and gate phase. The initial LOS
/// is +x and the gate plane faces the quadrotor.
inline Scenario sample_scenario(const MotionSpec& spec, double radius, const InitialConditionRanges& ranges,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scenario s;
  s.seed = seed;
  s.initial_distance = ranges.distance_min + (ranges.distance_max - ranges.distance_min) * unit(rng);
  s.initial_speed = ranges.speed;
  s.velocity_offset_angle = (2.0 * unit(rng) - 1.0) * ranges.max_offset_angle;
  const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
  const double u_phase = unit(rng);

  GateTrajectory& g = s.gate;
  g.radius = radius;
  g.normal = Vec3::UnitX();
  const Vec3 start(s.initial_distance, 0.0, 0.0);
  switch (spec.motion) {
    case GateMotion::stationary: g.kind = MotionKind::stationary; break;
    case GateMotion::linear_slow:
    case GateMotion::linear_fast: {
      g.kind = MotionKind::linear;
      double speed = spec.linear_speed;
      if (speed <= 0.0) speed = spec.motion == GateMotion::linear_slow ? 2.5 : 5.0;
      // Horizontal and perpendicular to the initial LOS, random side.
      g.velocity = Vec3(0.0, side * speed, 0.0);
      break;
    }
    case GateMotion::planar:
      g.kind = MotionKind::planar;
      g.amplitude = spec.amplitude > 0.0 ? spec.amplitude : 2.0;
      g.omega = spec.omega > 0.0 ? spec.omega : kPlanarOmega;
      break;
    case GateMotion::knot:
      g.kind = MotionKind::knot;
      g.amplitude = spec.amplitude > 0.0 ? spec.amplitude : 1.0;
      g.omega = spec.omega > 0.0 ? spec.omega : kKnotOmega;
      break;
  }
  if (g.kind == MotionKind::planar || g.kind == MotionKind::knot) {
    g.phase = u_phase * 2.0 * kPi / g.omega;
  }
  g.p0 = start - gate_offset(g, g.phase);
  return s;
}

enum class FailureReason { none, missed_gate, collision, gate_lost, timeout, diverged };

inline std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::none: return "ok";
    case FailureReason::missed_gate: return "missed_gate";
    case FailureReason::collision: return "collision";
    case FailureReason::gate_lost: return "gate_lost";
    case FailureReason::timeout: return "timeout";
    case FailureReason::diverged: return "diverged";
  }
  return "?";
}

/// One control-tick record of a run.
struct LogRow {
  double t = 0.0;
  QuadrotorState state;
  Vec3 gate = Vec3::Zero();
  ControlCommand command;
  double gamma = 0.0;  // commanded optical axis vs LOS estimate [rad]
  double lambda_dot = 0.0;
  bool fresh_command = false;  // command solved this tick (not held)
};

struct RunResult {
  bool success = false;
  FailureReason reason = FailureReason::timeout;
  double t_gate = 0.0;
  double d_center = 0.0;
  double top_speed = 0.0;
  double t_end = 0.0;  // simulated time when the run stopped
  bool crossed = false;  // t_gate and d_center are meaningful
  std::vector<LogRow> trajectory_log;
};

/// Trajectory CSV, one row per control tick.
inline void write_trajectory_csv(std::ostream& os, const std::vector<LogRow>& log) {
  os << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,gate_x,gate_y,gate_z,f_th,gamma,lambda_dot\n";
  const auto old_precision = os.precision(10);
  for (const LogRow& r : log) {
    const auto& x = r.state;
    os << r.t << ',' << x.p_w.x() << ',' << x.p_w.y() << ',' << x.p_w.z() << ',' << x.q_bw.w() << ','
       << x.q_bw.x() << ',' << x.q_bw.y() << ',' << x.q_bw.z() << ',' << x.v_w.x() << ',' << x.v_w.y()
       << ',' << x.v_w.z() << ',' << r.gate.x() << ',' << r.gate.y() << ',' << r.gate.z() << ','
       << r.command.f_th << ',' << r.gamma << ',' << r.lambda_dot << '\n';
  }
  os.precision(old_precision);
}

}  // namespace pnrace
