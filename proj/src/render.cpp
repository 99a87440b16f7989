#include "fvv/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fvv::render {

std::vector<int> rank_cameras(const Vec3& viewpoint, const calib::CameraRig& rig) {
  if (rig.size() == 0) throw Error("rank_cameras: empty rig");
  std::vector<std::pair<double, int>> dist;
  dist.reserve(rig.size());
  for (const auto& cam : rig.cameras) dist.emplace_back((cam.center() - viewpoint).norm(), cam.id);
  std::sort(dist.begin(), dist.end());
  std::vector<int> ids;
  ids.reserve(dist.size());
  for (const auto& d : dist) ids.push_back(d.second);
  return ids;
}

std::array<double, 3> sample_bilinear(const ColorImage& img, const Vec2& px) {
  const double u = std::clamp(px.x(), 0.0, img.width - 1.0);
  const double v = std::clamp(px.y(), 0.0, img.height - 1.0);
  const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
  const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  const double fx = u - x0, fy = v - y0;
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const int ch = img.channels == 1 ? 0 : c;
    const double top = (1 - fx) * img.at(x0, y0, ch) + fx * img.at(x1, y0, ch);
    const double bottom = (1 - fx) * img.at(x0, y1, ch) + fx * img.at(x1, y1, ch);
    out[c] = (1 - fy) * top + fy * bottom;
  }
  return out;
}

RenderedImage render_view(const mesh::TriangleMesh& mesh, const calib::CameraRig& rig,
                          std::span<const ColorImage> frames,
                          const visibility::VisibilityMap& vis, const VirtualCamera& view,
                          const RenderOptions& options) {
  if (frames.size() != rig.size())
    throw Error("render_view: expected " + std::to_string(rig.size()) + " frames, got " +
                std::to_string(frames.size()));
  for (std::size_t c = 0; c < rig.size(); ++c)
    if (frames[c].empty()) throw Error("render_view: missing frame for camera " + std::to_string(rig[c].id));
  if (vis.visible.size() != rig.size()) throw Error("render_view: visibility does not cover the rig");
  for (const auto& v : vis.visible)
    if (v.size() != mesh.triangles.size()) throw Error("render_view: visibility does not match mesh");
  if (view.has_distortion()) throw Error("render_view: virtual camera must be distortion-free");

  // Rank order expressed as rig indices.
  const auto order_ids = rank_cameras(view, rig);
  std::vector<std::size_t> order;
  for (int id : order_ids)
    for (std::size_t c = 0; c < rig.size(); ++c)
      if (rig[c].id == id) order.push_back(c);

  const auto raster = visibility::rasterize(mesh, view);
  RenderedImage out;
  out.color = ColorImage(view.width, view.height, 3, 0);
  const std::size_t n = static_cast<std::size_t>(view.width) * view.height;
  out.covered.assign(n, 0);
  out.source.assign(n, kNoSource);
  out.triangle = raster.triangle;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) out.color.data[i * 3 + c] = options.background_color[c];

  std::vector<std::uint64_t> fallback_rows(static_cast<std::size_t>(view.height), 0);
  parallel_for(0, static_cast<std::size_t>(view.height), 4, [&](std::size_t b, std::size_t e) {
    for (std::size_t yy = b; yy < e; ++yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < view.width; ++x) {
        const std::size_t idx = static_cast<std::size_t>(y) * view.width + x;
        const std::int32_t t = raster.triangle[idx];
        if (t == visibility::kNoTriangle) continue;
        out.covered[idx] = 1;
        std::array<std::uint8_t, 3> rgb = options.fallback_color;
        bool found = false;
        for (std::size_t c : order) {
          if (!vis.is_visible(c, static_cast<std::size_t>(t))) continue;
          const Vec3 surface = calib::backproject(view, Vec2(x, y), raster.depth.d[idx]);
          const auto proj = calib::project(rig[c], surface);
          const auto s = sample_bilinear(frames[c], proj.pixel);
          for (int ch = 0; ch < 3; ++ch)
            rgb[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(s[ch]), 0L, 255L));
          out.source[idx] = rig[c].id;
          found = true;
          break;
        }
        if (!found) ++fallback_rows[yy];
        for (int ch = 0; ch < 3; ++ch) out.color.data[idx * 3 + ch] = rgb[ch];
      }
    }
  });
  out.fallback_pixels = std::accumulate(fallback_rows.begin(), fallback_rows.end(), std::uint64_t{0});
  return out;
}

ColorImage source_map_image(const RenderedImage& img) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 12> kPalette = {{
      {230, 25, 75}, {60, 180, 75}, {255, 225, 25}, {0, 130, 200}, {245, 130, 48}, {145, 30, 180},
      {70, 240, 240}, {240, 50, 230}, {210, 245, 60}, {250, 190, 212}, {0, 128, 128}, {170, 110, 40},
  }};
  ColorImage out(img.color.width, img.color.height, 3, 0);
  for (std::size_t i = 0; i < img.source.size(); ++i) {
    if (img.source[i] == kNoSource) {
      if (img.covered[i])
        for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = 255;
      continue;
    }
    const auto& col = kPalette[static_cast<std::size_t>(img.source[i]) % kPalette.size()];
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = col[c];
  }
  return out;
}

}  // namespace fvv::render
