#pragma once

#include "fvv/common.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <filesystem>
#include <string>
#include <vector>

namespace fvv::calib {

// Pinhole camera with Bouguet-style distortion (k1, k2, p1, p2, k3).
// World frame: millimetres, right-handed, z up. Camera frame: x right,
// y down, z forward. A world point p maps to camera coordinates R p + t.
struct CameraModel {
  int id = 0;
  int width = 0;
  int height = 0;
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  double skew = 0;
  std::array<double, 5> dist{};
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 center() const { return -rotation.transpose() * translation; }
  Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }
  bool has_distortion() const;

  // Throws Error naming the camera id when an invariant is violated.
  void validate() const;

  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

struct Projection {
  Vec2 pixel = Vec2::Zero();
  double depth = 0;
  bool in_frustum = false;
};

// Distortion of normalized image coordinates.
inline Vec2 distort(const CameraModel& cam, const Vec2& n) {
  const auto& [k1, k2, p1, p2, k3] = cam.dist;
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  const double dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
  const double dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
  return {x * radial + dx, y * radial + dy};
}

inline bool inside_image(const CameraModel& cam, const Vec2& px) {
  return px.x() >= -0.5 && px.x() < cam.width - 0.5 && px.y() >= -0.5 &&
         px.y() < cam.height - 0.5;
}

// Nearest pixel index for an in-image position.
// floor(coord + 0.5), saturating far outside any image (NaN gives INT_MIN).
// Truncation avoids a libm call on baseline x86-64.
inline int pixel_index(double coord) {
  const double f = coord + 0.5;
  if (!(std::abs(f) < 1e9))
    return f > 0 ? std::numeric_limits<int>::max() : std::numeric_limits<int>::min();
  const int t = static_cast<int>(f);
  return t - (f < t ? 1 : 0);
}

namespace detail {
inline Projection finish_projection(const CameraModel& cam, const Vec3& pc, bool distorted) {
  Projection out;
  out.depth = pc.z();
  if (!(pc.z() > 0.0)) {
    out.pixel = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  Vec2 n(pc.x() / pc.z(), pc.y() / pc.z());
  if (distorted) n = distort(cam, n);
  out.pixel = Vec2(cam.fx * (n.x() + cam.skew * n.y()) + cam.cx, cam.fy * n.y() + cam.cy);
  out.in_frustum = inside_image(cam, out.pixel);
  return out;
}
}  // namespace detail

// Full chain: camera frame, normalize, distort, apply intrinsics. A point is
// in frustum when depth > 0 and the distorted pixel lies inside
// [-0.5, width - 0.5) x [-0.5, height - 0.5), i.e. it rounds to a valid pixel.
inline Projection project(const CameraModel& cam, const Vec3& p) {
  return detail::finish_projection(cam, cam.to_camera(p), true);
}

// Same as project but ignores distortion. Used by rasterization.
inline Projection project_linear(const CameraModel& cam, const Vec3& p) {
  return detail::finish_projection(cam, cam.to_camera(p), false);
}

// Inverse of distort by fixed-point iteration.
Vec2 undistort(const CameraModel& cam, const Vec2& distorted, int iterations = 30);

// Pixel to normalized coordinates (inverse of the intrinsic matrix), no distortion.
Vec2 pixel_to_normalized(const CameraModel& cam, const Vec2& pixel);

// World point on the (linear) ray through `pixel` at camera-space depth.
Vec3 backproject(const CameraModel& cam, const Vec2& pixel, double depth);

// World-space unit direction of the viewing ray through `pixel`, distortion
// removed.
Vec3 ray_direction(const CameraModel& cam, const Vec2& pixel);

// Rotation/translation for a camera at `eye` looking at `target`; `up` is
// the world direction that should appear upward in the image.
void look_at(CameraModel& cam, const Vec3& eye, const Vec3& target,
             const Vec3& up = Vec3::UnitZ());

struct CameraRig {
  std::vector<CameraModel> cameras;

  std::size_t size() const { return cameras.size(); }
  const CameraModel& operator[](std::size_t i) const { return cameras[i]; }

  // N >= 1, unique ids, each camera valid.
  void validate() const;

  friend bool operator==(const CameraRig&, const CameraRig&) = default;
};

// Calibration manifest (JSON, see docs/formats.md).
CameraRig load_rig(const std::filesystem::path& path);
CameraRig parse_rig(const std::string& text);
void save_rig(const std::filesystem::path& path, const CameraRig& rig);
std::string format_rig(const CameraRig& rig);

}  // namespace fvv::calib
