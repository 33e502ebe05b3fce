#pragma once

// Closed-loop single-gate run: perception at f_est, controller with
// zero-order hold, rigid-body integration at 1 kHz.

#include <cmath>
#include <optional>
#include <random>

#include "pnrace/common.hpp"
#include "pnrace/control.hpp"
#include "pnrace/dynamics.hpp"
#include "pnrace/perception.hpp"
#include "pnrace/pn_core.hpp"
#include "pnrace/world.hpp"

namespace pnrace {

struct SimConfig {
  ControllerConfig controller;
  PerceptionConfig perception;
  VehicleParams vehicle;
  WindField wind;
  CameraModel camera = CameraModel::with_angle_of_view(deg2rad(33.5));
  double dt = 1e-3;
  double timeout = 15.0;
  double rim_width = 0.1;
  int max_lost_ticks = 5;
  /// Replace v_rel_bar by the true relative speed every tick.
  bool perfect_vrel = false;
  bool log_trajectory = false;

  void validate() const {
    controller.validate();
    perception.validate();
    vehicle.validate();
    camera.validate();
    if (!(dt > 0.0 && timeout > 0.0 && rim_width >= 0.0 && max_lost_ticks >= 0)) {
      throw std::invalid_argument("invalid simulation settings");
    }
  }
};

namespace detail {
/// Noise stream for one run, decorrelated from the scenario sampler.
inline std::uint64_t noise_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }
}  // namespace detail

inline RunResult run_scenario(const Scenario& scn, const SimConfig& cfg) {
  RunResult result;
  std::mt19937_64 noise_rng(detail::noise_seed(scn.seed));
  const GateTrajectory& gate = scn.gate;

  QuadrotorState x = scn.initial_state();
  ControlCommand cmd;  // hover, level, until the first LOS arrives
  cmd.q_c = x.q_bw;
  DelayFilter delay_filter(cfg.perception);
  LosTracker tracker(cfg.perception.f_est);
  ControllerConfig ctrl = cfg.controller;

  const double tick = 1.0 / cfg.perception.f_est;
  const long max_steps = static_cast<long>(std::ceil(cfg.timeout / cfg.dt));
  long next_tick_step = 0;
  long tick_index = 0;
  int lost_ticks = 0;
  result.top_speed = x.v_w.norm();

  for (long k = 0; k < max_steps; ++k) {
    const double t = k * cfg.dt;
    if (k == next_tick_step) {
      ++tick_index;
      next_tick_step = static_cast<long>(std::ceil(tick_index * tick / cfg.dt - 1e-9));

      const Vec3 g_pos = gate_position(gate, t);
      Capture cap;
      cap.q_bw = x.q_bw;
      cap.box = project_gate(cfg.camera, x, g_pos, gate.normal, gate.radius, t, cfg.perception.noise_px, noise_rng);
      const Release rel = delay_filter.push(cap);

      LogRow row;
      row.t = t;
      row.state = x;
      row.gate = g_pos;
      if (rel.released && !rel.capture.box) {
        if (++lost_ticks > cfg.max_lost_ticks) {
          result.reason = FailureReason::gate_lost;
          result.t_end = t;
          if (cfg.log_trajectory) result.trajectory_log.push_back(row);
          return result;
        }
      } else if (rel.released) {
        lost_ticks = 0;
        const Vec3 l = bbox_to_los(cfg.camera, *rel.capture.box, rel.capture.q_bw);
        const Los los = tracker.update(l, t);
        if (cfg.perfect_vrel) {
          ctrl.pn.v_rel_bar = std::max((x.v_w - gate_velocity(gate, t)).norm(), 1e-3);
        }
        try {
          cmd = control_step(los, cfg.vehicle.g, ctrl);
          row.fresh_command = true;
        } catch (const DegenerateFrameError&) {
          // hold the previous command
        }
        row.gamma = commanded_axis_angle(cmd, los.l);
        row.lambda_dot = los.rate;
      }
      row.command = cmd;
      if (cfg.log_trajectory) result.trajectory_log.push_back(row);
    }

    const QuadrotorState prev = x;
    try {
      x = integrate_step(x, cmd, cfg.vehicle, cfg.wind, cfg.dt);
    } catch (const SimulationDivergedError&) {
      result.reason = FailureReason::diverged;
      result.t_end = t;
      return result;
    }
    result.top_speed = std::max(result.top_speed, x.v_w.norm());
    result.t_end = t + cfg.dt;

    if (auto crossing = check_gate_pass(prev, t, x, t + cfg.dt, gate)) {
      result.crossed = true;
      result.t_gate = crossing->t_gate;
      result.d_center = crossing->d_center;
      if (crossing->d_center < gate.radius) {
        result.success = true;
        result.reason = FailureReason::none;
      } else if (crossing->d_center < gate.radius + cfg.rim_width) {
        result.reason = FailureReason::collision;
      } else {
        result.reason = FailureReason::missed_gate;
      }
      return result;
    }
  }
  result.reason = FailureReason::timeout;
  return result;
}

}  // namespace pnrace
