#pragma once

#include "fvv/calib.hpp"
#include "fvv/image.hpp"
#include "fvv/mesh.hpp"
#include "fvv/visibility.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace fvv::render {

// Virtual viewpoint: a CameraModel whose distortion must be zero.
using VirtualCamera = calib::CameraModel;

// Camera ids by ascending distance between optical centers and `viewpoint`;
// ties go to the lower id.
std::vector<int> rank_cameras(const Vec3& viewpoint, const calib::CameraRig& rig);
inline std::vector<int> rank_cameras(const VirtualCamera& v, const calib::CameraRig& rig) {
  return rank_cameras(v.center(), rig);
}

inline constexpr std::int32_t kNoSource = -1;

struct RenderOptions {
  std::array<std::uint8_t, 3> fallback_color{128, 128, 128};
  std::array<std::uint8_t, 3> background_color{0, 0, 0};
};

struct RenderedImage {
  ColorImage color;                   // RGB
  std::vector<std::uint8_t> covered;  // 1 where geometry is drawn
  std::vector<std::int32_t> source;   // camera id, kNoSource if uncovered or no camera sees it
  std::vector<std::int32_t> triangle; // front-most triangle, -1 if uncovered
  std::uint64_t fallback_pixels = 0;

  std::int32_t source_at(int x, int y) const {
    return source[static_cast<std::size_t>(y) * color.width + x];
  }
};

// Hard per-pixel source selection: the first camera in rank order for which
// the pixel's front-most triangle is visible; its frame is sampled
// (bilinear, full distortion) at the surface point under the pixel.
// frames[i] belongs to rig[i]; vis must cover every rig camera.
RenderedImage render_view(const mesh::TriangleMesh& mesh, const calib::CameraRig& rig,
                          std::span<const ColorImage> frames,
                          const visibility::VisibilityMap& vis, const VirtualCamera& view,
                          const RenderOptions& options = {});

// False-color image of RenderedImage::source (black = no source).
ColorImage source_map_image(const RenderedImage& img);

// Bilinear lookup at a continuous pixel position (pixel centers at integers),
// clamped at the borders. Returns one value per channel.
std::array<double, 3> sample_bilinear(const ColorImage& img, const Vec2& px);

}  // namespace fvv::render
