#pragma once

// Closed-form thrust and attitude command that realizes the PN normal
// acceleration while maximizing acceleration along the LOS under a thrust
// ceiling and a field-of-view bound.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pnrace/common.hpp"
#include "pnrace/pn_core.hpp"

namespace pnrace {

struct ControllerConfig {
  double gamma_bar = deg2rad(21.05);  // FOV bound on the LOS-to-axis angle
  double gamma_cam = deg2rad(33.5);
  double f_th_bar = 30.0;  // mass-normalized thrust ceiling [m/s^2]
  PnConfig pn;

  void validate() const {
    if (!(gamma_bar > 0.0 && gamma_bar <= gamma_cam && gamma_cam < kPi / 2)) {
      throw std::invalid_argument("require 0 < gamma_bar <= gamma_cam < pi/2");
    }
    if (!(f_th_bar > 0.0)) throw std::invalid_argument("f_th_bar must be positive");
    pn.validate();
  }
};

struct ControlCommand {
  double f_th = kGravity;  // mass-normalized collective thrust [m/s^2]
  Quat q_c = Quat::Identity();  // commanded body-to-world attitude
  double phi = 0.0;  // pitch in the PN frame
  double theta = 0.0;  // roll in the PN frame
};

/// Gravity expressed in the PN frame; the y component vanishes by construction.
struct PnFrameGravity {
  Vec3 g_pn{0.0, 0.0, -kGravity};

  static PnFrameGravity from_world(const Mat3& r_pn_w, const Vec3& g_world) {
    PnFrameGravity g{r_pn_w.transpose() * g_world};
    g.g_pn.y() = 0.0;  // exact zero; residual is round-off only
    return g;
  }
  double z() const { return g_pn.z(); }
};

/// PN-frame components (n_y a_n, n_z a_n) of the demanded normal acceleration.
struct NormalDemand {
  double y = 0.0;
  double z = 0.0;
};

struct OptimalControl {
  double f_th = 0.0;
  double phi = 0.0;
  double theta = 0.0;

  /// Thrust acceleration along the LOS.
  double objective() const { return f_th * std::sin(phi) * std::cos(theta); }
};

/// gamma with cos(gamma) = cos(phi) cos(theta). Bounds the true angle between
/// optical axis and LOS from above.
inline double fov_angle(double phi, double theta) {
  return std::acos(std::clamp(std::cos(phi) * std::cos(theta), -1.0, 1.0));
}

namespace detail {
inline double ceiling_thrust(const NormalDemand& a, double g_z, const ControllerConfig& cfg) {
  return std::min(cfg.f_th_bar, (a.z - g_z) / std::cos(cfg.gamma_bar));
}

inline bool demand_feasible(const NormalDemand& a, double g_z, const ControllerConfig& cfg) {
  const double up = a.z - g_z;
  if (!(up > 0.0)) return false;
  const double f = ceiling_thrust(a, g_z, cfg);
  return a.y * a.y + up * up <= f * f * (1.0 + 1e-12);
}
}  // namespace detail

inline OptimalControl solve_optimal_control(const NormalDemand& a, const PnFrameGravity& g,
                                            const ControllerConfig& cfg) {
  const double up = a.z - g.z();
  if (!(up > 0.0)) throw InfeasibleDemandError("required upward force is non-positive");
  const double f = detail::ceiling_thrust(a, g.z(), cfg);
  const double lateral = f * f - a.y * a.y;
  if (!(std::abs(a.y) <= f) || a.y * a.y + up * up > f * f * (1.0 + 1e-12)) {
    throw InfeasibleDemandError("normal acceleration exceeds the thrust/FOV envelope");
  }
  OptimalControl out;
  out.f_th = f;
  out.theta = std::asin(std::clamp(-a.y / f, -1.0, 1.0));
  out.phi = std::acos(std::clamp(up / std::sqrt(std::max(lateral, 0.0)), -1.0, 1.0));
  return out;
}

/// Largest s in [0, 1] such that the demand s * a is feasible. Feasible
/// scales form an interval containing 0 whenever s = 0 itself is feasible.
inline double feasible_demand_scale(const NormalDemand& a, const PnFrameGravity& g,
                                    const ControllerConfig& cfg) {
  const auto scaled = [&](double s) { return NormalDemand{s * a.y, s * a.z}; };
  if (detail::demand_feasible(a, g.z(), cfg)) return 1.0;
  if (!detail::demand_feasible(scaled(0.0), g.z(), cfg)) return 0.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 64; ++i) {
    const double mid = 0.5 * (lo + hi);
    (detail::demand_feasible(scaled(mid), g.z(), cfg) ? lo : hi) = mid;
  }
  return lo;
}

inline Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }

/// Commanded attitude R_B^W = R_PN^W * R_y(phi) * R_x(theta).
inline ControlCommand assemble_command(const OptimalControl& u, const Mat3& r_pn_w) {
  ControlCommand cmd;
  cmd.f_th = u.f_th;
  cmd.phi = u.phi;
  cmd.theta = u.theta;
  cmd.q_c = Quat(r_pn_w * rot_y(u.phi) * rot_x(u.theta)).normalized();
  return cmd;
}

/// Full controller tick: PN frame, gravity and PN acceleration in that frame,
/// closed-form solve, attitude assembly. An infeasible demand is scaled
/// radially onto the feasible set and solved again.
/// Throws DegenerateFrameError for a vertical LOS; callers hold the previous
/// command.
inline ControlCommand control_step(const Los& los, const Vec3& g_world, const ControllerConfig& cfg) {
  const Mat3 r_pn_w = pn_frame(los.l);
  const PnFrameGravity g = PnFrameGravity::from_world(r_pn_w, g_world);
  const Vec3 a_n_pn = r_pn_w.transpose() * pn_acceleration(cfg.pn, los);
  NormalDemand demand{a_n_pn.y(), a_n_pn.z()};

  const double s = feasible_demand_scale(demand, g, cfg);
  if (s <= 0.0 && !detail::demand_feasible(NormalDemand{}, g.z(), cfg)) {
    // Not even hovering along the LOS is possible: spend the full ceiling
    // with the camera on the LOS.
    return assemble_command(OptimalControl{cfg.f_th_bar, 0.0, 0.0}, r_pn_w);
  }
  if (s < 1.0) demand = NormalDemand{s * demand.y, s * demand.z};
  return assemble_command(solve_optimal_control(demand, g, cfg), r_pn_w);
}

/// Angle between the commanded optical axis (body e_x) and the LOS.
inline double commanded_axis_angle(const ControlCommand& cmd, const Vec3& l) {
  return angle_between(cmd.q_c * Vec3::UnitX(), l);
}

}  // namespace pnrace
