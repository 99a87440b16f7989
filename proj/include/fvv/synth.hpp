#pragma once

#include "fvv/calib.hpp"
#include "fvv/image.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace fvv::synth {

using Rgb = std::array<std::uint8_t, 3>;

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0;
};

// Axis-aligned box.
struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

struct SceneObject {
  enum class Kind { sphere, box };
  Kind kind = Kind::sphere;
  Sphere sphere;
  Box box;
  Rgb albedo{200, 160, 120};

  static SceneObject make_sphere(const Vec3& c, double r, Rgb albedo = {200, 160, 120});
  static SceneObject make_box(const Vec3& lo, const Vec3& hi, Rgb albedo = {90, 120, 200});

  bool contains(const Vec3& p) const;
  Aabb bounds() const;
  // Nearest positive ray parameter (unit direction) and outward normal there.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir, Vec3* normal = nullptr) const;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  Aabb stage;
  Rgb background{70, 110, 70};
  Vec3 light_dir = Vec3(0.3, -0.4, 1.0).normalized();  // toward the light
  double ambient = 0.35;
  double noise_sigma = 0.0;         // per-channel Gaussian noise, 8-bit units
  int background_frames = 0;        // object-free frames per camera
  double proposal_erosion = 0.0;    // pixels removed from the true mask
  int distractor_rows = 0;          // top rows with random flicker
  double distractor_amplitude = 0;  // uniform flicker half-range
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticScene {
  calib::CameraRig rig;
  std::vector<ColorImage> frames;                        // per camera
  std::vector<std::vector<ColorImage>> background_frames;  // per camera
  std::vector<Mask> silhouettes;                         // analytic, per camera
  std::vector<Mask> proposals;                           // per camera
  SceneSpec spec;
};

// Silhouettes are exact per pixel center: a pixel is foreground iff its
// viewing ray hits an object. Frames are Lambertian-shaded.
SyntheticScene generate_synthetic_scene(const SceneSpec& spec, const calib::CameraRig& rig);

struct RingSpec {
  int count = 10;
  double radius = 5000;
  double height = 0;             // camera z above target z; alternating rings use +/- this
  bool alternate_height = false; // odd cameras at target.z - height
  Vec3 target = Vec3::Zero();
  int width = 1920;
  int height_px = 1080;
  double focal = 1400;
  double azimuth_offset_deg = 0;
};

// Cameras evenly spaced on a circle around `target`, all looking at it.
calib::CameraRig make_ring_rig(const RingSpec& ring);

// Fixtures shared by tests, the acceptance suite and the CLI.
SceneSpec two_sphere_scene();
SceneSpec unit_sphere_scene();
SceneSpec multi_object_scene();
SceneSpec volleyball_scene();
calib::CameraRig two_sphere_rig();
calib::CameraRig unit_sphere_rig();
calib::CameraRig volleyball_rig(int width = 1920, int height = 1080);

}  // namespace fvv::synth
