#include "doctest.h"
#include "oracles.hpp"

#include "fvv/synth.hpp"

#include <cmath>

using namespace fvv;
using namespace fvv::synth;

namespace {

// Slab test, written independently of SceneObject::intersect.
bool ray_hits_box(const oracle::Ray& r, const Box& b) {
  double t0 = 0, t1 = 1e300;
  for (int a = 0; a < 3; ++a) {
    if (r.dir[a] == 0) {
      if (r.origin[a] < b.min[a] || r.origin[a] > b.max[a]) return false;
      continue;
    }
    double lo = (b.min[a] - r.origin[a]) / r.dir[a], hi = (b.max[a] - r.origin[a]) / r.dir[a];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
  }
  return t0 <= t1;
}

calib::CameraRig small_ring(int count, double radius, const Vec3& target) {
  RingSpec r;
  r.count = count;
  r.radius = radius;
  r.height = 900;
  r.target = target;
  r.width = 120;
  r.height_px = 90;
  r.focal = 110;
  return make_ring_rig(r);
}

}  // namespace

TEST_CASE("silhouettes are exact at pixel centers") {
  SceneSpec spec;
  spec.stage = {Vec3(-2000, -2000, 0), Vec3(2000, 2000, 2000)};
  spec.objects = {SceneObject::make_sphere(Vec3(-300, 100, 700), 500),
                  SceneObject::make_box(Vec3(200, -600, 0), Vec3(900, -100, 1400))};
  const auto rig = small_ring(5, 4000, Vec3(0, 0, 700));
  const auto scene = generate_synthetic_scene(spec, rig);
  REQUIRE(scene.silhouettes.size() == 5);
  std::size_t mismatches = 0, fg = 0;
  for (std::size_t c = 0; c < rig.size(); ++c)
    for (int y = 0; y < rig[c].height; ++y)
      for (int x = 0; x < rig[c].width; ++x) {
        const auto ray = oracle::pixel_ray(rig[c], x, y);
        const bool ref = oracle::hit_sphere(ray, spec.objects[0].sphere.center, 500).has_value() ||
                         ray_hits_box(ray, spec.objects[1].box);
        mismatches += ref != scene.silhouettes[c].at(x, y);
        fg += ref;
      }
  CHECK(fg > 1000);
  CHECK(mismatches == 0);
  // Without erosion the proposal is the silhouette.
  CHECK(scene.proposals == scene.silhouettes);
}

TEST_CASE("frames show shaded objects over the background color") {
  auto spec = two_sphere_scene();
  const auto rig = small_ring(3, 5000, Vec3(0, 0, 650));
  const auto scene = generate_synthetic_scene(spec, rig);
  for (std::size_t c = 0; c < rig.size(); ++c)
    for (int y = 0; y < rig[c].height; ++y)
      for (int x = 0; x < rig[c].width; ++x) {
        const bool bg = !scene.silhouettes[c].at(x, y);
        const bool is_bg_color = scene.frames[c].at(x, y, 0) == spec.background[0] &&
                                 scene.frames[c].at(x, y, 1) == spec.background[1] &&
                                 scene.frames[c].at(x, y, 2) == spec.background[2];
        if (bg) CHECK(is_bg_color);
      }
}

TEST_CASE("noise, background frames and proposals") {
  auto spec = two_sphere_scene();
  spec.noise_sigma = 4;
  spec.background_frames = 12;
  spec.proposal_erosion = 3;
  spec.seed = 17;
  const auto rig = small_ring(2, 5000, Vec3(0, 0, 650));
  const auto a = generate_synthetic_scene(spec, rig);
  const auto b = generate_synthetic_scene(spec, rig);
  CHECK(a.frames == b.frames);
  CHECK(a.background_frames == b.background_frames);
  spec.seed = 18;
  CHECK(generate_synthetic_scene(spec, rig).frames != a.frames);

  REQUIRE(a.background_frames[0].size() == 12);
  // Sample std of the green channel over all background pixels and frames.
  double sum = 0, sum2 = 0, n = 0;
  for (const auto& f : a.background_frames[0])
    for (std::size_t i = 1; i < f.data.size(); i += 3) {
      const double v = f.data[i] - spec.background[1];
      sum += v;
      sum2 += v * v;
      ++n;
    }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.1);
  CHECK(std::sqrt(sum2 / n - mean * mean) == doctest::Approx(4.0).epsilon(0.05));

  for (std::size_t c = 0; c < rig.size(); ++c) {
    const auto& sil = a.silhouettes[c];
    const auto& prop = a.proposals[c];
    CHECK(prop.count() < sil.count());
    CHECK(prop.count() > 0);
    for (std::size_t i = 0; i < sil.bits.size(); ++i)
      if (prop.bits[i]) CHECK(sil.bits[i]);
  }
}

TEST_CASE("ring rigs look at their target") {
  RingSpec r;
  r.count = 6;
  r.radius = 3000;
  r.height = 1000;
  r.alternate_height = true;
  r.target = Vec3(10, -20, 500);
  r.azimuth_offset_deg = 15;
  const auto rig = make_ring_rig(r);
  REQUIRE(rig.size() == 6);
  for (std::size_t i = 0; i < rig.size(); ++i) {
    CHECK(rig[i].id == static_cast<int>(i));
    const Vec3 c = rig[i].center();
    CHECK(std::hypot(c.x() - r.target.x(), c.y() - r.target.y()) == doctest::Approx(3000));
    CHECK(c.z() - r.target.z() == doctest::Approx(i % 2 ? -1000 : 1000));
    const auto p = calib::project(rig[i], r.target);
    CHECK(p.pixel.x() == doctest::Approx(rig[i].cx));
    CHECK(p.pixel.y() == doctest::Approx(rig[i].cy));
  }
  const double az0 = std::atan2(rig[0].center().y() - r.target.y(), rig[0].center().x() - r.target.x());
  CHECK(az0 * 180 / M_PI == doctest::Approx(15));
}

TEST_CASE("fixtures are valid and objects lie on stage") {
  for (const auto& spec : {two_sphere_scene(), unit_sphere_scene(), multi_object_scene(), volleyball_scene()}) {
    CHECK_NOTHROW(spec.validate());
    CHECK(spec.stage.valid());
  }
  for (const auto& rig : {two_sphere_rig(), unit_sphere_rig(), volleyball_rig()}) CHECK_NOTHROW(rig.validate());
  CHECK(unit_sphere_rig().size() == 12);
  CHECK(unit_sphere_rig()[0].width == 1920);
  CHECK(volleyball_scene().stage.extent().isApprox(Vec3(18000, 18000, 9000)));

  auto bad = two_sphere_scene();
  bad.objects.push_back(SceneObject::make_sphere(Vec3(1900, 0, 500), 300));
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = two_sphere_scene();
  bad.objects[0].sphere.radius = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("object intersection and containment") {
  const auto s = SceneObject::make_sphere(Vec3(0, 0, 0), 100);
  Vec3 n;
  const auto t = s.intersect(Vec3(-500, 0, 0), Vec3(1, 0, 0), &n);
  REQUIRE(t);
  CHECK(*t == doctest::Approx(400));
  CHECK(n.isApprox(Vec3(-1, 0, 0)));
  CHECK(s.contains(Vec3(0, 99, 0)));
  CHECK_FALSE(s.contains(Vec3(0, 101, 0)));
  CHECK_FALSE(s.intersect(Vec3(-500, 101, 0), Vec3(1, 0, 0)));

  const auto b = SceneObject::make_box(Vec3(0, 0, 0), Vec3(10, 20, 30));
  const auto tb = b.intersect(Vec3(5, 5, 100), Vec3(0, 0, -1), &n);
  REQUIRE(tb);
  CHECK(*tb == doctest::Approx(70));
  CHECK(n.isApprox(Vec3(0, 0, 1)));
  CHECK(b.bounds().max.isApprox(Vec3(10, 20, 30)));
}
