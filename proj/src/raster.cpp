#include "fvv/visibility.hpp"

#include <algorithm>
#include <cmath>

namespace fvv::visibility {

namespace {

struct ScreenTriangle {
  Vec2 p[3];
  double inv_z[3];
  double inv_area = 0;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds
  bool include_edge[3]{};                 // edge k runs p[k] -> p[(k+1)%3]
};

double edge_fn(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// Tie rule for pixels exactly on an edge. With a common orientation, a shared
// edge is walked in opposite directions by its two triangles, and exactly one
// of d, -d satisfies this predicate.
bool owns_edge(const Vec2& d) { return d.y() > 0 || (d.y() == 0 && d.x() < 0); }

bool setup(const mesh::TriangleMesh& mesh, std::size_t t, const calib::CameraModel& cam,
           ScreenTriangle& st) {
  const auto& tri = mesh.triangles[t];
  for (int k = 0; k < 3; ++k) {
    const Vec3 pc = cam.to_camera(mesh.vertices[tri[k]]);
    if (!(pc.z() >= kNearPlane)) return false;
    st.p[k] = Vec2(cam.fx * (pc.x() / pc.z() + cam.skew * pc.y() / pc.z()) + cam.cx,
                   cam.fy * pc.y() / pc.z() + cam.cy);
    st.inv_z[k] = 1.0 / pc.z();
  }
  double area = edge_fn(st.p[0], st.p[1], st.p[2]);
  if (area == 0.0 || !std::isfinite(area)) return false;
  if (area < 0) {
    std::swap(st.p[1], st.p[2]);
    std::swap(st.inv_z[1], st.inv_z[2]);
    area = -area;
  }
  st.inv_area = 1.0 / area;
  for (int k = 0; k < 3; ++k) st.include_edge[k] = owns_edge(st.p[(k + 1) % 3] - st.p[k]);
  const double min_x = std::min({st.p[0].x(), st.p[1].x(), st.p[2].x()});
  const double max_x = std::max({st.p[0].x(), st.p[1].x(), st.p[2].x()});
  const double min_y = std::min({st.p[0].y(), st.p[1].y(), st.p[2].y()});
  const double max_y = std::max({st.p[0].y(), st.p[1].y(), st.p[2].y()});
  st.x0 = static_cast<int>(std::max(0.0, std::ceil(min_x)));
  st.x1 = static_cast<int>(std::min(cam.width - 1.0, std::floor(max_x)));
  st.y0 = static_cast<int>(std::max(0.0, std::ceil(min_y)));
  st.y1 = static_cast<int>(std::min(cam.height - 1.0, std::floor(max_y)));
  return st.x0 <= st.x1 && st.y0 <= st.y1;
}

}  // namespace

Raster rasterize(const mesh::TriangleMesh& mesh, const calib::CameraModel& cam) {
  Raster out;
  out.depth.width = cam.width;
  out.depth.height = cam.height;
  const std::size_t n_pixels = static_cast<std::size_t>(cam.width) * cam.height;
  out.depth.d.assign(n_pixels, DepthImage::kBackground);
  out.triangle.assign(n_pixels, kNoTriangle);

  const std::size_t n_tris = mesh.triangles.size();
  std::vector<ScreenTriangle> screen(n_tris);
  std::vector<std::uint8_t> live(n_tris, 0);
  parallel_for(0, n_tris, 1024, [&](std::size_t b, std::size_t e) {
    for (std::size_t t = b; t < e; ++t) live[t] = setup(mesh, t, cam, screen[t]);
  });

  // Bin triangles into horizontal bands; each band is written by one worker.
  constexpr int kBandRows = 32;
  const int n_bands = (cam.height + kBandRows - 1) / kBandRows;
  std::vector<std::vector<std::uint32_t>> bands(static_cast<std::size_t>(n_bands));
  for (std::size_t t = 0; t < n_tris; ++t) {
    if (!live[t]) continue;
    for (int band = screen[t].y0 / kBandRows; band <= screen[t].y1 / kBandRows; ++band)
      bands[static_cast<std::size_t>(band)].push_back(static_cast<std::uint32_t>(t));
  }

  parallel_for(0, static_cast<std::size_t>(n_bands), 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t band = b; band < e; ++band) {
      const int row_lo = static_cast<int>(band) * kBandRows;
      const int row_hi = std::min(cam.height - 1, row_lo + kBandRows - 1);
      for (std::uint32_t t : bands[band]) {
        const ScreenTriangle& st = screen[t];
        for (int y = std::max(st.y0, row_lo); y <= std::min(st.y1, row_hi); ++y) {
          for (int x = st.x0; x <= st.x1; ++x) {
            const Vec2 p(x, y);
            double w[3];
            bool inside = true;
            for (int k = 0; k < 3; ++k) {
              // Weight of vertex k is the edge function of the opposite edge.
              const int a = (k + 1) % 3, c = (k + 2) % 3;
              w[k] = edge_fn(st.p[a], st.p[c], p);
              if (w[k] < 0 || (w[k] == 0 && !st.include_edge[a])) {
                inside = false;
                break;
              }
            }
            if (!inside) continue;
            const double inv_z =
                (w[0] * st.inv_z[0] + w[1] * st.inv_z[1] + w[2] * st.inv_z[2]) * st.inv_area;
            const double z = 1.0 / inv_z;
            const std::size_t idx = static_cast<std::size_t>(y) * cam.width + x;
            if (z < out.depth.d[idx] || (z == out.depth.d[idx] && static_cast<std::int32_t>(t) < out.triangle[idx])) {
              out.depth.d[idx] = z;
              out.triangle[idx] = static_cast<std::int32_t>(t);
            }
          }
        }
      }
    }
  });
  return out;
}

}  // namespace fvv::visibility
