#pragma once

#include "fvv/image.hpp"

#include <limits>
#include <span>

namespace fvv::silhouette {

// Euclidean distance (pixels) from each pixel to the nearest proposal pixel.
struct DistanceMap {
  static constexpr double kUnreachable = std::numeric_limits<double>::max();

  int width = 0;
  int height = 0;
  std::vector<double> d;

  double at(int x, int y) const { return d[static_cast<std::size_t>(y) * width + x]; }
};

// Exact Euclidean distance transform (lower envelope of parabolas, one pass
// per axis). Empty proposal gives kUnreachable everywhere.
DistanceMap distance_map(const Mask& proposal);

// Per-pixel, per-channel background statistics in 8-bit units.
struct BackgroundModel {
  static constexpr double kDefaultStdFloor = 2.0;

  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Population mean/std over object-free frames (streaming), std clamped to
// std_floor. Requires at least two frames of identical size and channels.
BackgroundModel build_background(std::span<const ColorImage> frames,
                                 double std_floor = BackgroundModel::kDefaultStdFloor);

struct AdaptiveParams {
  double theta_near = 3.0;
  double theta_far = 8.0;
  double d_max = 40.0;

  void validate() const;
  // Linear ramp from theta_near at d = 0 to theta_far at d >= d_max.
  double threshold(double d) const;
};

// Foreground iff max over channels |frame - mean| / std exceeds threshold(d).
Mask extract_silhouette(const ColorImage& frame, const BackgroundModel& bg,
                        const DistanceMap& dm, const AdaptiveParams& params);

}  // namespace fvv::silhouette
