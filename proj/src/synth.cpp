#include "fvv/synth.hpp"

#include "fvv/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace fvv::synth {

SceneObject SceneObject::make_sphere(const Vec3& c, double r, Rgb albedo) {
  SceneObject o;
  o.kind = Kind::sphere;
  o.sphere = {c, r};
  o.albedo = albedo;
  return o;
}

SceneObject SceneObject::make_box(const Vec3& lo, const Vec3& hi, Rgb albedo) {
  SceneObject o;
  o.kind = Kind::box;
  o.box = {lo, hi};
  o.albedo = albedo;
  return o;
}

bool SceneObject::contains(const Vec3& p) const {
  if (kind == Kind::sphere) return (p - sphere.center).squaredNorm() <= sphere.radius * sphere.radius;
  return (p.array() >= box.min.array()).all() && (p.array() <= box.max.array()).all();
}

Aabb SceneObject::bounds() const {
  if (kind == Kind::sphere)
    return {sphere.center - Vec3::Constant(sphere.radius), sphere.center + Vec3::Constant(sphere.radius)};
  return {box.min, box.max};
}

std::optional<double> SceneObject::intersect(const Vec3& o, const Vec3& d, Vec3* normal) const {
  if (kind == Kind::sphere) {
    const Vec3 oc = o - sphere.center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - sphere.radius * sphere.radius;
    const double disc = b * b - c;
    if (disc < 0) return std::nullopt;
    const double s = std::sqrt(disc);
    double t = -b - s;
    if (t <= 0) t = -b + s;
    if (t <= 0) return std::nullopt;
    if (normal) *normal = (o + t * d - sphere.center).normalized();
    return t;
  }
  // Slab test.
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis_near = 0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (box.min[a] - o[a]) / d[a], t1 = (box.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      axis_near = a;
    }
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_far <= 0) return std::nullopt;
  const double t = t_near > 0 ? t_near : t_far;
  if (normal) {
    *normal = Vec3::Zero();
    (*normal)[axis_near] = d[axis_near] > 0 ? -1.0 : 1.0;
  }
  return t;
}

void SceneSpec::validate() const {
  for (const auto& o : objects) {
    if (o.kind == SceneObject::Kind::sphere && !(o.sphere.radius > 0))
      throw Error("synthetic scene: sphere radius must be positive");
    if (o.kind == SceneObject::Kind::box && !(o.box.min.array() < o.box.max.array()).all())
      throw Error("synthetic scene: box must have positive extent");
    if (stage.valid()) {
      const Aabb b = o.bounds();
      if (!stage.contains(b.min) || !stage.contains(b.max))
        throw Error("synthetic scene: object outside the stage volume");
    }
  }
  if (noise_sigma < 0 || proposal_erosion < 0) throw Error("synthetic scene: negative noise/erosion");
}

namespace {

// Pixel rectangle that conservatively contains an object's projection, or
// the full image when the object straddles the camera plane.
std::array<int, 4> pixel_bounds(const calib::CameraModel& cam, const SceneObject& obj) {
  const Aabb b = obj.bounds();
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (int c = 0; c < 8; ++c) {
    const Vec3 p((c & 1) ? b.max.x() : b.min.x(), (c & 2) ? b.max.y() : b.min.y(),
                 (c & 4) ? b.max.z() : b.min.z());
    const auto proj = calib::project(cam, p);
    if (!(proj.depth > 0)) return {0, 0, cam.width - 1, cam.height - 1};
    x0 = std::min(x0, proj.pixel.x());
    x1 = std::max(x1, proj.pixel.x());
    y0 = std::min(y0, proj.pixel.y());
    y1 = std::max(y1, proj.pixel.y());
  }
  constexpr double kPad = 3;
  return {std::clamp(static_cast<int>(std::floor(x0 - kPad)), 0, cam.width - 1),
          std::clamp(static_cast<int>(std::floor(y0 - kPad)), 0, cam.height - 1),
          std::clamp(static_cast<int>(std::ceil(x1 + kPad)), 0, cam.width - 1),
          std::clamp(static_cast<int>(std::ceil(y1 + kPad)), 0, cam.height - 1)};
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void add_noise(ColorImage& img, const SceneSpec& spec, std::uint64_t stream) {
  if (spec.noise_sigma <= 0 && spec.distractor_rows <= 0) return;
  std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ull + stream);
  std::normal_distribution<double> gauss(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);
  std::uniform_real_distribution<double> flicker(-spec.distractor_amplitude, spec.distractor_amplitude);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = img.at(x, y, c);
        if (spec.noise_sigma > 0) v += gauss(rng);
        if (y < spec.distractor_rows) v += flicker(rng);
        img.at(x, y, c) = to_u8(v);
      }
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SceneSpec& spec, const calib::CameraRig& rig) {
  spec.validate();
  rig.validate();
  SyntheticScene scene;
  scene.rig = rig;
  scene.spec = spec;

  for (std::size_t c = 0; c < rig.size(); ++c) {
    const auto& cam = rig[c];
    const Vec3 eye = cam.center();
    ColorImage frame(cam.width, cam.height, 3);
    for (std::size_t i = 0; i < frame.data.size(); i += 3)
      for (int ch = 0; ch < 3; ++ch) frame.data[i + ch] = spec.background[ch];
    Mask sil(cam.width, cam.height);
    std::vector<double> nearest(static_cast<std::size_t>(cam.width) * cam.height,
                                std::numeric_limits<double>::infinity());

    for (const auto& obj : spec.objects) {
      const auto [bx0, by0, bx1, by1] = pixel_bounds(cam, obj);
      parallel_for(static_cast<std::size_t>(by0), static_cast<std::size_t>(by1) + 1, 4,
                   [&](std::size_t b, std::size_t e) {
        for (std::size_t yy = b; yy < e; ++yy) {
          const int y = static_cast<int>(yy);
          for (int x = bx0; x <= bx1; ++x) {
            const Vec3 dir = calib::ray_direction(cam, Vec2(x, y));
            Vec3 n;
            const auto t = obj.intersect(eye, dir, &n);
            if (!t) continue;
            const std::size_t idx = static_cast<std::size_t>(y) * cam.width + x;
            sil.bits[idx] = 1;
            if (*t >= nearest[idx]) continue;
            nearest[idx] = *t;
            const double shade = spec.ambient + (1.0 - spec.ambient) * std::max(0.0, n.dot(spec.light_dir));
            for (int ch = 0; ch < 3; ++ch) frame.data[idx * 3 + ch] = to_u8(obj.albedo[ch] * shade);
          }
        }
      });
    }

    std::vector<ColorImage> backgrounds;
    for (int f = 0; f < spec.background_frames; ++f) {
      ColorImage bg(cam.width, cam.height, 3);
      for (std::size_t i = 0; i < bg.data.size(); i += 3)
        for (int ch = 0; ch < 3; ++ch) bg.data[i + ch] = spec.background[ch];
      add_noise(bg, spec, (c + 1) * 1000003ull + static_cast<std::uint64_t>(f) + 1);
      backgrounds.push_back(std::move(bg));
    }
    add_noise(frame, spec, (c + 1) * 1000003ull);

    // Proposal: true mask eroded by proposal_erosion pixels.
    Mask proposal = sil;
    if (spec.proposal_erosion > 0 && sil.count() > 0) {
      Mask outside(cam.width, cam.height);
      for (std::size_t i = 0; i < sil.bits.size(); ++i) outside.bits[i] = sil.bits[i] ? 0 : 1;
      const auto dist = silhouette::distance_map(outside);
      for (std::size_t i = 0; i < sil.bits.size(); ++i)
        proposal.bits[i] = sil.bits[i] && dist.d[i] > spec.proposal_erosion ? 1 : 0;
    }

    scene.frames.push_back(std::move(frame));
    scene.background_frames.push_back(std::move(backgrounds));
    scene.silhouettes.push_back(std::move(sil));
    scene.proposals.push_back(std::move(proposal));
  }
  return scene;
}

calib::CameraRig make_ring_rig(const RingSpec& ring) {
  calib::CameraRig rig;
  for (int i = 0; i < ring.count; ++i) {
    calib::CameraModel cam;
    cam.id = i;
    cam.width = ring.width;
    cam.height = ring.height_px;
    cam.fx = cam.fy = ring.focal;
    cam.cx = (ring.width - 1) / 2.0;
    cam.cy = (ring.height_px - 1) / 2.0;
    const double az = (ring.azimuth_offset_deg + 360.0 * i / ring.count) * std::numbers::pi / 180.0;
    const double dz = ring.alternate_height && (i % 2 == 1) ? -ring.height : ring.height;
    const Vec3 eye = ring.target + Vec3(ring.radius * std::cos(az), ring.radius * std::sin(az), dz);
    calib::look_at(cam, eye, ring.target);
    rig.cameras.push_back(cam);
  }
  return rig;
}

SceneSpec two_sphere_scene() {
  SceneSpec s;
  s.stage = {Vec3(-2000, -2000, 0), Vec3(2000, 2000, 2000)};
  s.objects = {SceneObject::make_sphere(Vec3(-700, -300, 600), 400, {210, 150, 110}),
               SceneObject::make_sphere(Vec3(800, 400, 700), 450, {110, 160, 220})};
  return s;
}

calib::CameraRig two_sphere_rig() {
  RingSpec r;
  r.count = 8;
  r.radius = 5000;
  r.height = 1800;
  r.target = Vec3(0, 0, 650);
  r.width = 960;
  r.height_px = 540;
  r.focal = 700;
  r.azimuth_offset_deg = 10;
  return make_ring_rig(r);
}

SceneSpec unit_sphere_scene() {
  SceneSpec s;
  s.stage = {Vec3(-1300, -1300, -1300), Vec3(1300, 1300, 1300)};
  s.objects = {SceneObject::make_sphere(Vec3::Zero(), 1000, {200, 170, 140})};
  return s;
}

// Twelve cameras in two interleaved rings above and below the equator.
calib::CameraRig unit_sphere_rig() {
  RingSpec r;
  r.count = 12;
  r.radius = 3200;
  r.height = 1800;
  r.alternate_height = true;
  r.width = 1920;
  r.height_px = 1080;
  r.focal = 1300;
  return make_ring_rig(r);
}

SceneSpec multi_object_scene() {
  SceneSpec s;
  s.stage = {Vec3(-4500, -4500, 0), Vec3(4500, 4500, 3000)};
  s.objects = {
      SceneObject::make_box(Vec3(-2200, -1500, 0), Vec3(-1800, -1150, 1800), {200, 60, 60}),
      SceneObject::make_box(Vec3(600, 1400, 0), Vec3(950, 1800, 1750), {60, 60, 200}),
      SceneObject::make_box(Vec3(1700, -2100, 0), Vec3(2050, -1700, 1850), {220, 220, 70}),
      SceneObject::make_sphere(Vec3(-300, 200, 1200), 450, {230, 230, 230}),
  };
  return s;
}

SceneSpec volleyball_scene() {
  SceneSpec s;
  s.stage = {Vec3(-9000, -9000, 0), Vec3(9000, 9000, 9000)};
  const std::array<Vec3, 6> feet = {Vec3(-4000, -2500, 0), Vec3(-2500, 2000, 0), Vec3(-5000, 3500, 0),
                                    Vec3(3000, -1500, 0),  Vec3(4200, 2800, 0),  Vec3(2000, 500, 0)};
  for (std::size_t i = 0; i < feet.size(); ++i) {
    const Rgb col = i < 3 ? Rgb{200, 50, 50} : Rgb{50, 60, 200};
    s.objects.push_back(SceneObject::make_box(feet[i] + Vec3(-250, -200, 0), feet[i] + Vec3(250, 200, 1850), col));
  }
  s.objects.push_back(SceneObject::make_sphere(Vec3(500, -800, 4200), 110, {240, 240, 240}));
  return s;
}

calib::CameraRig volleyball_rig(int width, int height) {
  RingSpec r;
  r.count = 10;
  r.radius = 16000;
  r.height = 7000;
  r.target = Vec3(0, 0, 1000);
  r.width = width;
  r.height_px = height;
  r.focal = 0.78 * width;
  return make_ring_rig(r);
}

}  // namespace fvv::synth
