#pragma once

#include "fvv/calib.hpp"
#include "fvv/image.hpp"
#include "fvv/mesh.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace fvv::visibility {

// Camera-space z of the nearest surface per pixel; +inf where nothing is drawn.
struct DepthImage {
  static constexpr double kBackground = std::numeric_limits<double>::infinity();

  int width = 0;
  int height = 0;
  std::vector<double> d;

  double at(int x, int y) const { return d[static_cast<std::size_t>(y) * width + x]; }
  bool covered(int x, int y) const { return at(x, y) != kBackground; }

  friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

inline constexpr std::int32_t kNoTriangle = -1;

// Z-buffer with the index of the front-most triangle per pixel.
struct Raster {
  DepthImage depth;
  std::vector<std::int32_t> triangle;

  std::int32_t triangle_at(int x, int y) const {
    return triangle[static_cast<std::size_t>(y) * depth.width + x];
  }
};

// Triangles whose vertices are closer than this (camera z, mm) are skipped.
inline constexpr double kNearPlane = 1.0;

// Rasterizes through the linear pinhole part of `cam`. Coverage uses edge
// functions sampled at pixel centers with a top-left rule for ties; depth is
// perspective-correct camera z; per pixel the minimum wins, equal depths go
// to the lower triangle index.
Raster rasterize(const mesh::TriangleMesh& mesh, const calib::CameraModel& cam);

inline DepthImage depth_image(const mesh::TriangleMesh& mesh, const calib::CameraModel& cam) {
  return rasterize(mesh, cam).depth;
}

// Per triangle: 1 = visible, 0 = occluded. A triangle is occluded when its
// centroid is out of frustum or lies more than t_v behind the depth cached at
// the centroid's pixel.
std::vector<std::uint8_t> classify_visibility(const mesh::TriangleMesh& mesh,
                                              const calib::CameraModel& cam,
                                              const DepthImage& depth, double t_v);

struct VisibilityMap {
  std::vector<int> camera_ids;                     // rig order
  std::vector<std::vector<std::uint8_t>> visible;  // [camera][triangle]

  bool is_visible(std::size_t camera_index, std::size_t triangle) const {
    return visible[camera_index][triangle] != 0;
  }

  friend bool operator==(const VisibilityMap&, const VisibilityMap&) = default;
};

struct VisibilityResult {
  std::vector<DepthImage> depths;
  VisibilityMap map;
  double depth_ms = 0;
  double classify_ms = 0;
};

// Depth images and visibility for every camera of the rig.
VisibilityResult compute_visibility(const mesh::TriangleMesh& mesh, const calib::CameraRig& rig,
                                    double t_v);

// 16-bit preview: near = bright, background = 0.
Image<std::uint16_t> depth_preview(const DepthImage& depth);

}  // namespace fvv::visibility
