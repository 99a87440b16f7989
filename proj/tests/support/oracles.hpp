#pragma once

// Slow, obviously-correct reference implementations used to check the library.

#include "fvv/calib.hpp"
#include "fvv/hull.hpp"
#include "fvv/image.hpp"
#include "fvv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace oracle {

using fvv::Vec2;
using fvv::Vec3;

// Distance from each pixel center to the nearest foreground pixel center,
// by exhaustive search. Infinity when the mask is empty.
inline std::vector<double> brute_edt(const fvv::Mask& m) {
  std::vector<std::pair<int, int>> fg;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(x, y)) fg.emplace_back(x, y);
  std::vector<double> out(static_cast<std::size_t>(m.width) * m.height,
                          std::numeric_limits<double>::infinity());
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (auto [fx, fy] : fg) best = std::min(best, std::hypot(double(x - fx), double(y - fy)));
      out[static_cast<std::size_t>(y) * m.width + x] = best;
    }
  return out;
}

// 26-connected flood fill. Labels are 1-based in discovery order, 0 = empty.
inline std::vector<std::uint32_t> bfs_labels(const fvv::hull::VoxelGrid& g) {
  const auto& s = g.spec();
  const int nx = s.dims[0], ny = s.dims[1], nz = s.dims[2];
  std::vector<std::uint32_t> lab(g.size(), 0);
  std::uint32_t next = 0;
  for (std::size_t start = 0; start < g.size(); ++start) {
    if (!g.get(start) || lab[start]) continue;
    lab[start] = ++next;
    std::deque<std::size_t> q{start};
    while (!q.empty()) {
      const auto v = q.front();
      q.pop_front();
      const auto p = s.unlinear(v);
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int i = p[0] + dx, j = p[1] + dy, k = p[2] + dz;
            if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) continue;
            const auto u = s.linear(i, j, k);
            if (g.get(u) && !lab[u]) {
              lab[u] = next;
              q.push_back(u);
            }
          }
    }
  }
  return lab;
}

// True when two labelings induce the same partition (0 must match 0).
inline bool same_partition(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  if (a.size() != b.size()) return false;
  std::map<std::uint32_t, std::uint32_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == 0) != (b[i] == 0)) return false;
    if (a[i] == 0) continue;
    auto [it1, new1] = ab.emplace(a[i], b[i]);
    auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

// Bouguet model written out from the formula, independent of the library.
inline Vec2 project_px(const fvv::calib::CameraModel& c, const Vec3& world, bool distort = true) {
  const Vec3 p = c.rotation * world + c.translation;
  double x = p(0) / p(2), y = p(1) / p(2);
  if (distort) {
    const double k1 = c.dist[0], k2 = c.dist[1], p1 = c.dist[2], p2 = c.dist[3], k3 = c.dist[4];
    const double r2 = x * x + y * y, r4 = r2 * r2, r6 = r4 * r2;
    const double g = 1 + k1 * r2 + k2 * r4 + k3 * r6;
    const double xd = x * g + 2 * p1 * x * y + p2 * (r2 + 2 * x * x);
    const double yd = y * g + p1 * (r2 + 2 * y * y) + 2 * p2 * x * y;
    x = xd;
    y = yd;
  }
  return {c.fx * x + c.fx * c.skew * y + c.cx, c.fy * y + c.cy};
}

// World-space ray through a pixel of an undistorted camera.
struct Ray {
  Vec3 origin, dir;
};

inline Ray pixel_ray(const fvv::calib::CameraModel& c, double u, double v) {
  const double yn = (v - c.cy) / c.fy;
  const double xn = (u - c.cx) / c.fx - c.skew * yn;
  const Vec3 d = c.rotation.transpose() * Vec3(xn, yn, 1.0);
  return {-c.rotation.transpose() * c.translation, d.normalized()};
}

// Nearest positive hit distance of a ray with a sphere.
inline std::optional<double> hit_sphere(const Ray& r, const Vec3& center, double radius) {
  const Vec3 oc = r.origin - center;
  const double b = oc.dot(r.dir), c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0) return std::nullopt;
  const double s = std::sqrt(disc);
  if (-b - s > 0) return -b - s;
  if (-b + s > 0) return -b + s;
  return std::nullopt;
}

// Moller-Trumbore. Returns the ray parameter of the hit, two-sided.
inline std::optional<double> hit_triangle(const Ray& r, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = r.dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tv = r.origin - a;
  const double u = tv.dot(pv) * inv;
  if (u < 0 || u > 1) return std::nullopt;
  const Vec3 qv = tv.cross(e1);
  const double v = r.dir.dot(qv) * inv;
  if (v < 0 || u + v > 1) return std::nullopt;
  const double t = e2.dot(qv) * inv;
  if (t <= 0) return std::nullopt;
  return t;
}

struct MeshHit {
  double t = std::numeric_limits<double>::infinity();
  std::int64_t triangle = -1;
};

inline MeshHit cast(const fvv::mesh::TriangleMesh& m, const Ray& r) {
  MeshHit best;
  for (std::size_t i = 0; i < m.triangles.size(); ++i) {
    const auto& t = m.triangles[i];
    if (auto h = hit_triangle(r, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]); h && *h < best.t) {
      best.t = *h;
      best.triangle = static_cast<std::int64_t>(i);
    }
  }
  return best;
}

// Camera-frame z of the point at distance t along a pixel ray.
inline double camera_z(const fvv::calib::CameraModel& c, const Ray& r, double t) {
  return (c.rotation * (r.origin + t * r.dir) + c.translation).z();
}

// Brute-force caster with a bounding-sphere reject per triangle.
class MeshCaster {
 public:
  explicit MeshCaster(const fvv::mesh::TriangleMesh& m) : m_(m) {
    for (const auto& t : m.triangles) {
      const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
      double r2 = 0;
      for (int k = 0; k < 3; ++k) r2 = std::max(r2, (m.vertices[t[k]] - c).squaredNorm());
      centers_.push_back(c);
      radii2_.push_back(r2 * (1 + 1e-9) + 1e-12);
    }
  }

  MeshHit cast(const Ray& r) const {
    MeshHit best;
    for (std::size_t i = 0; i < m_.triangles.size(); ++i) {
      const Vec3 oc = centers_[i] - r.origin;
      const double along = oc.dot(r.dir);
      if ((oc - along * r.dir).squaredNorm() > radii2_[i]) continue;
      const auto& t = m_.triangles[i];
      if (auto h = hit_triangle(r, m_.vertices[t[0]], m_.vertices[t[1]], m_.vertices[t[2]]); h && *h < best.t) {
        best.t = *h;
        best.triangle = static_cast<std::int64_t>(i);
      }
    }
    return best;
  }

 private:
  const fvv::mesh::TriangleMesh& m_;
  std::vector<Vec3> centers_;
  std::vector<double> radii2_;
};

struct VisibilityAgreement {
  std::size_t compared = 0;
  std::size_t agree = 0;
  std::size_t boundary = 0;        // excluded from the rate
  std::size_t boundary_agree = 0;  // for reporting only
  double rate() const { return compared ? double(agree) / double(compared) : 1.0; }
  double rate_all() const {
    const auto n = compared + boundary;
    return n ? double(agree + boundary_agree) / double(n) : 1.0;
  }
};

// Reference per triangle: visible when the first surface hit along the ray
// from the camera center through the centroid is at most t_v (camera z) in
// front of the centroid. Triangles whose centroid sits on a depth
// discontinuity (background or a jump over t_v among the four surrounding
// pixel centers) are boundary cases and excluded from the rate.
// Out-of-frustum centroids count as occluded.
inline VisibilityAgreement centroid_visibility(const fvv::mesh::TriangleMesh& m,
                                               const fvv::calib::CameraModel& cam,
                                               const std::vector<double>& depth,
                                               const std::vector<std::uint8_t>& visible,
                                               double t_v) {
  const MeshCaster caster(m);
  VisibilityAgreement out;
  const Vec3 eye = cam.center();
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const Vec3 c = m.centroid(t);
    const Vec3 pc = cam.rotation * c + cam.translation;
    const double u = cam.fx * (pc.x() / pc.z() + cam.skew * pc.y() / pc.z()) + cam.cx;
    const double v = cam.fy * pc.y() / pc.z() + cam.cy;
    bool ref = false, on_boundary = false;
    if (pc.z() > 0 && u >= -0.5 && u < cam.width - 0.5 && v >= -0.5 && v < cam.height - 0.5) {
      // The four pixel centers around the centroid's projection.
      const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          const int xx = std::clamp(x0 + dx, 0, cam.width - 1), yy = std::clamp(y0 + dy, 0, cam.height - 1);
          const double d = depth[static_cast<std::size_t>(yy) * cam.width + xx];
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
      on_boundary = !std::isfinite(hi) || hi - lo > t_v;
      const Ray ray{eye, (c - eye).normalized()};
      const auto hit = caster.cast(ray);
      const double z_front = hit.triangle >= 0 ? camera_z(cam, ray, hit.t) : pc.z();
      ref = !(pc.z() - z_front > t_v);
    }
    const bool same = ref == (visible[t] != 0);
    if (on_boundary) {
      ++out.boundary;
      out.boundary_agree += same;
    } else {
      ++out.compared;
      out.agree += same;
    }
  }
  return out;
}

}  // namespace oracle
