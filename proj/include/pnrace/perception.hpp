#pragma once

// Synthetic monocular gate detection: pinhole projection to a bounding box,
// pixel noise, measurement delay, low-pass filtering and back-projection to
// a world-frame line of sight.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "pnrace/common.hpp"
#include "pnrace/dynamics.hpp"
#include "pnrace/pn_core.hpp"

namespace pnrace {

/// Pinhole camera looking along body +x (zero camera pitch). Camera axes:
/// x right, y down, z forward.
struct CameraModel {
  double fx = 0.0, fy = 0.0;
  double cx = 320.0, cy = 240.0;
  int width = 640, height = 480;

  /// Square pixels, principal point at the image center, focal length set
  /// so that the narrower half-angle of view equals gamma_cam.
  static CameraModel with_angle_of_view(double gamma_cam, int width = 640, int height = 480) {
    if (!(gamma_cam > 0.0 && gamma_cam < kPi / 2)) throw std::invalid_argument("gamma_cam out of range");
    CameraModel cam;
    cam.width = width;
    cam.height = height;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.fx = cam.fy = std::min(cam.cx, cam.cy) / std::tan(gamma_cam);
    return cam;
  }

  double gamma_cam() const { return std::atan(std::min(cx / fx, cy / fy)); }

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0 && width > 0 && height > 0)) throw std::invalid_argument("invalid intrinsics");
  }

  static Vec3 body_to_camera(const Vec3& b) { return {-b.y(), -b.z(), b.x()}; }
  static Vec3 camera_to_body(const Vec3& c) { return {c.z(), -c.x(), -c.y()}; }
};

struct BoundingBox {
  double cx_px = 0.0, cy_px = 0.0;
  double w_px = 0.0, h_px = 0.0;
  double t_capture = 0.0;
};

struct PerceptionConfig {
  double f_est = 30.0;  // [Hz]
  double delay = 0.0;  // T_bb [s]
  double noise_px = 0.0;  // std-dev of the additive center noise
  double lpf_alpha = 0.6;

  void validate() const {
    if (!(f_est > 0.0)) throw std::invalid_argument("f_est must be positive");
    if (!(delay >= 0.0 && delay <= 0.3 + 1e-12)) throw std::invalid_argument("delay must be in [0, 0.3] s");
    if (!(noise_px >= 0.0)) throw std::invalid_argument("noise_px must be non-negative");
    if (!(lpf_alpha > 0.0 && lpf_alpha <= 1.0)) throw std::invalid_argument("lpf_alpha must be in (0, 1]");
  }

  /// Delay in estimation ticks, rounded up.
  int delay_ticks() const { return static_cast<int>(std::ceil(delay * f_est - 1e-9)); }
};

inline constexpr int kGateRimSamples = 64;

/// Noise-free projection of a circular gate (center, plane normal, radius).
/// Empty when the center is behind the camera or the clipped box center
/// would leave the image.
inline std::optional<BoundingBox> project_gate(const CameraModel& cam, const QuadrotorState& x,
                                               const Vec3& gate_center, const Vec3& gate_normal,
                                               double radius, double t_capture = 0.0) {
  const Quat q_wb = x.q_bw.conjugate();
  const auto to_camera = [&](const Vec3& p_w) { return CameraModel::body_to_camera(q_wb * (p_w - x.p_w)); };

  if (to_camera(gate_center).z() <= 0.0) return std::nullopt;

  const Vec3 n = gate_normal.normalized();
  Vec3 u = n.cross(Vec3::UnitZ());
  if (u.norm() < 1e-6) u = n.cross(Vec3::UnitY());
  u.normalize();
  const Vec3 w = n.cross(u);

  double u_min = std::numeric_limits<double>::infinity(), u_max = -u_min;
  double v_min = u_min, v_max = -u_min;
  int in_front = 0;
  for (int i = 0; i < kGateRimSamples; ++i) {
    const double a = 2.0 * kPi * i / kGateRimSamples;
    const Vec3 c = to_camera(gate_center + radius * (std::cos(a) * u + std::sin(a) * w));
    if (c.z() <= 1e-6) continue;
    ++in_front;
    const double px = cam.cx + cam.fx * c.x() / c.z();
    const double py = cam.cy + cam.fy * c.y() / c.z();
    u_min = std::min(u_min, px);
    u_max = std::max(u_max, px);
    v_min = std::min(v_min, py);
    v_max = std::max(v_max, py);
  }
  if (in_front == 0) return std::nullopt;

  // A detector only sees the part of the gate inside the image.
  u_min = std::max(u_min, 0.0);
  v_min = std::max(v_min, 0.0);
  u_max = std::min(u_max, static_cast<double>(cam.width));
  v_max = std::min(v_max, static_cast<double>(cam.height));
  if (u_min > u_max || v_min > v_max) return std::nullopt;

  BoundingBox box;
  box.cx_px = 0.5 * (u_min + u_max);
  box.cy_px = 0.5 * (v_min + v_max);
  box.w_px = u_max - u_min;
  box.h_px = v_max - v_min;
  box.t_capture = t_capture;
  return box;
}

inline bool center_inside_image(const CameraModel& cam, const BoundingBox& b) {
  return b.cx_px >= 0.0 && b.cx_px <= cam.width && b.cy_px >= 0.0 && b.cy_px <= cam.height;
}

/// Projection with zero-mean Gaussian noise of std-dev noise_px on the box
/// center.
template <typename Rng>
std::optional<BoundingBox> project_gate(const CameraModel& cam, const QuadrotorState& x, const Vec3& gate_center,
                                        const Vec3& gate_normal, double radius, double t_capture,
                                        double noise_px, Rng& rng) {
  auto box = project_gate(cam, x, gate_center, gate_normal, radius, t_capture);
  if (!box || noise_px <= 0.0) return box;
  std::normal_distribution<double> noise(0.0, noise_px);
  box->cx_px += noise(rng);
  box->cy_px += noise(rng);
  if (!center_inside_image(cam, *box)) return std::nullopt;
  return box;
}

/// World-frame unit LOS through the box center.
inline Vec3 bbox_to_los(const CameraModel& cam, const BoundingBox& box, const Quat& q_bw) {
  const Vec3 ray_c((box.cx_px - cam.cx) / cam.fx, (box.cy_px - cam.cy) / cam.fy, 1.0);
  return (q_bw * CameraModel::camera_to_body(ray_c)).normalized();
}

/// A detection slot: the box (empty if the gate was not found) and the
/// attitude at capture time.
struct Capture {
  std::optional<BoundingBox> box;
  Quat q_bw = Quat::Identity();
};

struct Release {
  bool released = false;  // false while the delay line is still filling
  Capture capture;  // box center low-pass filtered
};

/// FIFO delay of whole ticks followed by a first-order filter on the box
/// center. One push per estimation tick.
class DelayFilter {
 public:
  explicit DelayFilter(const PerceptionConfig& cfg) : alpha_(cfg.lpf_alpha), delay_ticks_(cfg.delay_ticks()) {}

  Release push(const Capture& c) {
    queue_.push_back(c);
    Release out;
    if (static_cast<int>(queue_.size()) <= delay_ticks_) return out;
    out.released = true;
    out.capture = queue_.front();
    queue_.pop_front();
    if (auto& box = out.capture.box) {
      if (!filtered_) {
        filtered_ = Vec2(box->cx_px, box->cy_px);
      } else {
        *filtered_ = alpha_ * Vec2(box->cx_px, box->cy_px) + (1.0 - alpha_) * *filtered_;
      }
      box->cx_px = filtered_->x();
      box->cy_px = filtered_->y();
    }
    return out;
  }

  int delay_ticks() const { return delay_ticks_; }

 private:
  double alpha_;
  int delay_ticks_;
  std::deque<Capture> queue_;
  std::optional<Vec2> filtered_;
};

/// Batch form of DelayFilter. Slots not yet released (and empty detections)
/// come out empty.
inline std::vector<std::optional<BoundingBox>> delay_and_filter(std::span<const std::optional<BoundingBox>> stream,
                                                                const PerceptionConfig& cfg) {
  DelayFilter filter(cfg);
  std::vector<std::optional<BoundingBox>> out;
  out.reserve(stream.size());
  for (const auto& box : stream) {
    Release r = filter.push(Capture{box, Quat::Identity()});
    out.push_back(r.released ? r.capture.box : std::nullopt);
  }
  return out;
}

/// Turns successive LOS vectors into Los samples; the first sample has zero
/// rate.
class LosTracker {
 public:
  explicit LosTracker(double f_est) : f_est_(f_est) {}

  Los update(const Vec3& l, double t) {
    const Vec3 prev = prev_.value_or(l);
    prev_ = l;
    return make_los(l, prev, f_est_, t);
  }

 private:
  double f_est_;
  std::optional<Vec3> prev_;
};

}  // namespace pnrace
