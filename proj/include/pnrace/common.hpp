#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace pnrace {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kGravity = 9.81;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline Vec3 gravity_world() { return {0.0, 0.0, -kGravity}; }

/// Angle between two non-zero vectors, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

// Error types. Recoverable per-run conditions (gate lost, timeout) are
// reported through RunResult instead.

/// PN frame undefined because the LOS is (nearly) vertical.
class DegenerateFrameError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The normal-acceleration demand cannot be met under the thrust and
/// field-of-view limits.
class InfeasibleDemandError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class SimulationDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kernel matrix stayed non positive-definite after the maximum jitter.
class NumericalFailureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pnrace
