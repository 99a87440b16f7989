#include "fvv/visibility.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace fvv::visibility {

std::vector<std::uint8_t> classify_visibility(const mesh::TriangleMesh& mesh,
                                              const calib::CameraModel& cam,
                                              const DepthImage& depth, double t_v) {
  if (depth.width != cam.width || depth.height != cam.height)
    throw Error("classify_visibility: depth image does not match camera");
  std::vector<std::uint8_t> visible(mesh.triangles.size(), 0);
  parallel_for(0, mesh.triangles.size(), 1024, [&](std::size_t b, std::size_t e) {
    for (std::size_t t = b; t < e; ++t) {
      const auto proj = calib::project_linear(cam, mesh.centroid(t));
      if (!proj.in_frustum) continue;
      const double cached = depth.at(calib::pixel_index(proj.pixel.x()),
                                     calib::pixel_index(proj.pixel.y()));
      visible[t] = !(proj.depth - cached > t_v);
    }
  });
  return visible;
}

VisibilityResult compute_visibility(const mesh::TriangleMesh& mesh, const calib::CameraRig& rig,
                                    double t_v) {
  using clock = std::chrono::steady_clock;
  VisibilityResult out;
  out.depths.reserve(rig.size());
  auto t0 = clock::now();
  for (const auto& cam : rig.cameras) out.depths.push_back(depth_image(mesh, cam));
  auto t1 = clock::now();
  for (std::size_t c = 0; c < rig.size(); ++c) {
    out.map.camera_ids.push_back(rig[c].id);
    out.map.visible.push_back(classify_visibility(mesh, rig[c], out.depths[c], t_v));
  }
  auto t2 = clock::now();
  out.depth_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  out.classify_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
  return out;
}

Image<std::uint16_t> depth_preview(const DepthImage& depth) {
  Image<std::uint16_t> img(depth.width, depth.height, 1, 0);
  double lo = DepthImage::kBackground, hi = 0;
  for (double d : depth.d)
    if (d != DepthImage::kBackground) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  if (lo == DepthImage::kBackground) return img;
  const double range = std::max(hi - lo, 1e-9);
  for (std::size_t i = 0; i < depth.d.size(); ++i) {
    if (depth.d[i] == DepthImage::kBackground) continue;
    const double t = 1.0 - (depth.d[i] - lo) / range;
    img.data[i] = static_cast<std::uint16_t>(1.0 + std::round(t * 65534.0));
  }
  return img;
}

}  // namespace fvv::visibility
