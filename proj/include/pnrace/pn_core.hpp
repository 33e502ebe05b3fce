#pragma once

// Line-of-sight geometry and the velocity-free proportional navigation law.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "pnrace/common.hpp"
#include "pnrace/rk4.hpp"

namespace pnrace {

/// Below this LOS rotation-axis norm the LOS is treated as not rotating.
inline constexpr double kAxisEpsilon = 1e-8;
/// Minimum horizontal LOS component for the PN frame to be defined.
inline constexpr double kVerticalEpsilon = 1e-3;
inline constexpr double kUnitTolerance = 1e-6;

struct PnConfig {
  double k_pn = 2.10;
  /// Fixed overestimate of the relative speed [m/s].
  double v_rel_bar = 15.0;

  double k_v() const { return k_pn * v_rel_bar; }

  void validate() const {
    if (!(k_pn > 0.0)) throw std::invalid_argument("k_pn must be positive");
    if (!(v_rel_bar > 0.0)) throw std::invalid_argument("v_rel_bar must be positive");
  }
};

/// One LOS sample together with its finite-difference rate.
struct Los {
  Vec3 l = Vec3::UnitX();
  Vec3 l_prev = Vec3::UnitX();
  double rate = 0.0;  // [rad/s]
  Vec3 axis = Vec3::Zero();  // l x l_prev, not normalized
  double t = 0.0;
};

namespace detail {
inline void require_unit(const Vec3& v, const char* name) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > kUnitTolerance) {
    throw std::invalid_argument(std::string(name) + " must be a unit vector");
  }
}
}  // namespace detail

inline double los_rate(const Vec3& l, const Vec3& l_prev, double f_est) {
  detail::require_unit(l, "l");
  detail::require_unit(l_prev, "l_prev");
  if (!(f_est > 0.0)) throw std::invalid_argument("f_est must be positive");
  return f_est * std::acos(std::clamp(l.dot(l_prev), -1.0, 1.0));
}

inline Vec3 los_rotation_axis(const Vec3& l, const Vec3& l_prev) { return l.cross(l_prev); }

/// Builds a LOS sample from the current and previous unit LOS vectors.
inline Los make_los(const Vec3& l, const Vec3& l_prev, double f_est, double t) {
  Los los;
  los.l = l;
  los.l_prev = l_prev;
  los.rate = los_rate(l, l_prev, f_est);
  los.axis = los_rotation_axis(l, l_prev);
  los.t = t;
  return los;
}

/// Normal acceleration k_pn * v_rel_bar * rate along n = l x k_hat.
/// n points in the direction the LOS is turning.
inline Vec3 pn_acceleration(const PnConfig& cfg, const Los& los) {
  const double axis_norm = los.axis.norm();
  if (axis_norm < kAxisEpsilon || los.rate == 0.0) return Vec3::Zero();
  const Vec3 n = los.l.cross(los.axis / axis_norm);
  return cfg.k_v() * los.rate * n;
}

/// Rotation from the PN frame to the world frame. Columns are the LOS,
/// the horizontal normal e_z x l and their cross product, all unit length.
inline Mat3 pn_frame(const Vec3& l) {
  detail::require_unit(l, "l");
  const Vec3 side = Vec3::UnitZ().cross(l);
  const double side_norm = side.norm();
  if (side_norm < kVerticalEpsilon) {
    throw DegenerateFrameError("PN frame undefined for a vertical LOS");
  }
  Mat3 r;
  r.col(0) = l;
  r.col(1) = side / side_norm;
  r.col(2) = l.cross(r.col(1));
  return r;
}

/// Planar engagement: LOS angle, its rate, range and closing speed.
struct PlanarEngagementState {
  double lambda = 0.0;
  double lambda_dot = 0.0;
  double r = 1.0;  // [m], > 0
  double v_rel = 1.0;  // closing speed [m/s], range shrinks at this rate
};

template <typename G>
concept PlanarGuidance = std::invocable<G, const PlanarEngagementState&> &&
    std::convertible_to<std::invoke_result_t<G, const PlanarEngagementState&>, double>;

/// RK4 step of the small-angle LOS dynamics
///   lambda_ddot = (w - u + 2 * lambda_dot * v_rel) / r,   r_dot = -v_rel
/// with the pursuer acceleration u given as a function of the state, so the
/// guidance loop is closed inside the integration stages.
/// Returns nullopt once the range would reach zero within the step.
template <PlanarGuidance G>
std::optional<PlanarEngagementState> planar_engagement_step(const PlanarEngagementState& s,
                                                            G&& guidance, double w, double dt) {
  if (!(s.r > 0.0)) throw std::invalid_argument("range must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (s.r - s.v_rel * dt <= 0.0) return std::nullopt;

  using V = Eigen::Vector3d;  // (lambda, lambda_dot, r)
  const auto f = [&](const V& x) -> V {
    PlanarEngagementState st{x(0), x(1), x(2), s.v_rel};
    const double u = guidance(st);
    return V(x(1), (w - u + 2.0 * x(1) * s.v_rel) / x(2), -s.v_rel);
  };
  const V next = rk4_step(V(s.lambda, s.lambda_dot, s.r), dt, f);
  if (!(next(2) > 0.0)) return std::nullopt;
  return PlanarEngagementState{next(0), next(1), next(2), s.v_rel};
}

/// Constant pursuer acceleration over the step.
inline std::optional<PlanarEngagementState> planar_engagement_step(const PlanarEngagementState& s,
                                                                   double u, double w, double dt) {
  return planar_engagement_step(s, [u](const PlanarEngagementState&) { return u; }, w, dt);
}

/// The classical PN law u = k_pn * v_rel * lambda_dot.
inline auto pn_guidance(double k_pn) {
  return [k_pn](const PlanarEngagementState& s) { return k_pn * s.v_rel * s.lambda_dot; };
}

}  // namespace pnrace
