#include "doctest.h"
#include "oracles.hpp"

#include "fvv/hull.hpp"
#include "fvv/synth.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace fvv;
using namespace fvv::hull;

namespace {

// Carve written from the definition, one exact projection per camera.
VoxelGrid reference_carve(const calib::CameraRig& rig, const std::vector<Mask>& sils,
                          const GridSpec& spec, int min_views) {
  VoxelGrid g(spec);
  for (int k = 0; k < spec.dims[2]; ++k)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int i = 0; i < spec.dims[0]; ++i) {
        const Vec3 p = spec.center(i, j, k);
        int views = 0;
        bool all_fg = true;
        for (std::size_t c = 0; c < rig.size(); ++c) {
          const auto& cam = rig[c];
          if ((cam.rotation * p + cam.translation).z() <= 0) continue;
          const Vec2 px = oracle::project_px(cam, p);
          if (px.x() < -0.5 || px.x() >= cam.width - 0.5 || px.y() < -0.5 || px.y() >= cam.height - 0.5)
            continue;
          ++views;
          const int x = static_cast<int>(std::floor(px.x() + 0.5)), y = static_cast<int>(std::floor(px.y() + 0.5));
          all_fg = all_fg && sils[c].at(x, y);
        }
        g.set(i, j, k, all_fg && views >= min_views);
      }
  return g;
}

VoxelGrid random_grid(std::mt19937_64& rng, Index3 dims, double density) {
  GridSpec s;
  s.spacing = 1;
  s.dims = dims;
  VoxelGrid g(s);
  std::bernoulli_distribution on(density);
  for (std::size_t v = 0; v < g.size(); ++v) g.set(v, on(rng));
  return g;
}

struct ThreadGuard {
  int saved = num_threads();
  ~ThreadGuard() { set_num_threads(saved); }
};

}  // namespace

TEST_CASE("stage grid size") {
  const auto spec = GridSpec::covering(synth::volleyball_scene().stage, 50);
  CHECK(spec.dims == Index3{360, 360, 180});
  CHECK(spec.voxel_count() == 23'328'000u);
  CHECK(spec.bounds().max.isApprox(Vec3(9000, 9000, 9000)));
  CHECK_THROWS_AS(spec.validate(1'000'000), Error);
  GridSpec bad = spec;
  bad.spacing = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("carve equals reference on random silhouettes, with and without distortion") {
  std::mt19937_64 rng(9);
  synth::RingSpec ring;
  ring.count = 6;
  ring.radius = 3000;
  ring.height = 1200;
  ring.width = 160;
  ring.height_px = 120;
  ring.focal = 140;
  auto rig = synth::make_ring_rig(ring);
  rig.cameras[1].dist = {-0.15, 0.02, 0.001, -0.001, 0.0};
  rig.cameras[4].dist = {0.05, 0.0, 0.0, 0.0, 0.0};

  // Blobby random silhouettes: mostly foreground near the center so plenty
  // of voxels survive and the boundary is exercised.
  std::vector<Mask> sils;
  for (const auto& cam : rig.cameras) {
    Mask m(cam.width, cam.height);
    std::uniform_real_distribution<double> u(0, 1);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const double r = std::hypot(x - cam.width / 2.0, y - cam.height / 2.0) / (cam.height / 2.0);
        m.set(x, y, u(rng) < 1.2 - r);
      }
    sils.push_back(m);
  }
  Aabb box{Vec3(-1500, -1500, -1000), Vec3(1500, 1500, 1000)};
  for (double spacing : {100.0, 61.3}) {
    const auto spec = GridSpec::covering(box, spacing);
    for (int mv : {1, 3, 6}) {
      CarveStats st;
      const auto g = carve(rig, sils, spec, mv, &st);
      const auto ref = reference_carve(rig, sils, spec, mv);
      CHECK(g == ref);
      CHECK(st.voxels_tested == spec.voxel_count());
      CHECK(st.voxels_occupied == ref.count());
    }
  }
}

TEST_CASE("cameras that do not see a voxel abstain") {
  // Two cameras looking along +y from opposite sides of x; a voxel far to the
  // side is seen by one camera only.
  calib::CameraModel a, b;
  a.id = 0;
  b.id = 1;
  for (auto* c : {&a, &b}) {
    c->width = 20;
    c->height = 20;
    c->fx = c->fy = 20;
    c->cx = c->cy = 9.5;
  }
  calib::look_at(a, Vec3(-50, -1000, 0), Vec3(-50, 0, 0));
  calib::look_at(b, Vec3(50, -1000, 0), Vec3(50, 0, 0));
  calib::CameraRig rig{{a, b}};
  std::vector<Mask> sils{Mask(20, 20, true), Mask(20, 20, true)};
  GridSpec spec;
  spec.origin = Vec3(-500, -10, -10);
  spec.spacing = 20;
  spec.dims = {50, 1, 1};
  const auto g1 = carve(rig, sils, spec, 1);
  const auto g2 = carve(rig, sils, spec, 2);
  CHECK(g1.count() > g2.count());
  CHECK(g2.count() > 0);
  // A background pixel in a camera that cannot see the voxel has no effect.
  sils[1] = Mask(20, 20, false);
  const auto g3 = carve(rig, sils, spec, 1);
  for (int i = 0; i < 50; ++i) {
    const Vec3 p = spec.center(i, 0, 0);
    const bool seen_a = calib::project(a, p).in_frustum, seen_b = calib::project(b, p).in_frustum;
    CHECK(g3.get(i, 0, 0) == (seen_a && !seen_b));
  }
}

TEST_CASE("carve is independent of thread count") {
  ThreadGuard guard;
  const auto scene = synth::generate_synthetic_scene(synth::two_sphere_scene(), synth::two_sphere_rig());
  const auto spec = GridSpec::covering(scene.spec.stage, 60);
  set_num_threads(1);
  const auto g1 = carve(scene.rig, scene.silhouettes, spec, 3);
  set_num_threads(4);
  const auto g4 = carve(scene.rig, scene.silhouettes, spec, 3);
  CHECK(g1 == g4);
  CHECK(g1.count() > 0);
}

TEST_CASE("labeling equals BFS flood fill across block decompositions") {
  std::mt19937_64 rng(2024);
  const std::vector<Index3> blocks{{1, 1, 1}, {2, 3, 5}, {7, 7, 7}, {16, 16, 16}, {64, 64, 64}};
  for (double density : {0.05, 0.2, 0.35, 0.6}) {
    for (int trial = 0; trial < 4; ++trial) {
      const Index3 dims{7 + static_cast<int>(rng() % 15), 5 + static_cast<int>(rng() % 15),
                        3 + static_cast<int>(rng() % 15)};
      const auto g = random_grid(rng, dims, density);
      const auto ref = oracle::bfs_labels(g);
      for (const auto& b : blocks) {
        const auto lab = label_components(g, b);
        CHECK(lab.labels == ref);
      }
    }
  }
}

TEST_CASE("labeling statistics and edge cases") {
  GridSpec s;
  s.spacing = 1;
  s.dims = {6, 5, 4};
  VoxelGrid g(s);
  SUBCASE("empty grid") {
    const auto lab = label_components(g, {2, 2, 2});
    CHECK(lab.components.empty());
  }
  SUBCASE("diagonal corner contact joins components") {
    g.set(1, 1, 1, true);
    g.set(2, 2, 2, true);
    g.set(5, 0, 0, true);
    const auto lab = label_components(g, {2, 2, 2});
    REQUIRE(lab.components.size() == 2);
    // x fastest: (5,0,0) has index 5, (1,1,1) has 37, so the lone voxel is id 1.
    CHECK(lab.components[0].voxel_count == 1);
    CHECK(lab.components[1].id == 2);
    CHECK(lab.components[1].voxel_count == 2);
    CHECK(lab.components[1].bbox_min == Index3{1, 1, 1});
    CHECK(lab.components[1].bbox_max == Index3{2, 2, 2});
    CHECK(lab.labels[s.linear(5, 0, 0)] == 1);
    CHECK(lab.labels[s.linear(1, 1, 1)] == 2);
  }
  CHECK_THROWS_AS(label_components(g, {0, 1, 1}), Error);
}

TEST_CASE("noise filter keeps the closed size band") {
  GridSpec s;
  s.spacing = 1;
  s.dims = {20, 3, 3};
  VoxelGrid g(s);
  // Components of size 1, 2 and 4 along x, separated by gaps.
  g.set(0, 1, 1, true);
  g.set(3, 1, 1, true);
  g.set(4, 1, 1, true);
  for (int i = 7; i < 11; ++i) g.set(i, 1, 1, true);
  const auto lab = label_components(g, {8, 8, 8});
  REQUIRE(lab.components.size() == 3);

  auto grid = g;
  const auto kept = filter_noise(lab, {2, 2}, &grid);
  REQUIRE(kept.components.size() == 1);
  CHECK(kept.components[0].voxel_count == 2);
  CHECK(kept.components[0].id == 2);
  CHECK(grid.count() == 2);
  CHECK(kept.labels[s.linear(0, 1, 1)] == 0);
  CHECK(kept.labels[s.linear(3, 1, 1)] == 2);

  CHECK(filter_noise(lab, {0, 100}).components.size() == 3);
  CHECK(filter_noise(lab, {5, 100}).components.empty());
  CHECK_THROWS_AS(filter_noise(lab, {3, 2}), Error);
}

TEST_CASE("ROIs cover components with margin, clamped to the grid") {
  GridSpec s;
  s.origin = Vec3(-100, -100, 0);
  s.spacing = 50;
  s.dims = {4, 4, 4};
  VoxelGrid g(s);
  g.set(0, 0, 0, true);
  g.set(2, 2, 1, true);
  g.set(2, 3, 1, true);
  const auto lab = label_components(g, {4, 4, 4});
  const auto rois = extract_rois(lab, s, 50);
  REQUIRE(rois.size() == 2);
  CHECK(rois[0].box.min.isApprox(Vec3(-100, -100, 0)));
  CHECK(rois[0].box.max.isApprox(Vec3(0, 0, 100)));
  CHECK(rois[1].box.min.isApprox(Vec3(-50, -50, 0)));
  CHECK(rois[1].box.max.isApprox(Vec3(100, 100, 150)));

  const Aabb stage = s.bounds();
  const auto fine = roi_grid(rois[1], stage, 20);
  for (int a = 0; a < 3; ++a) {
    const double steps = (fine.origin[a] - stage.min[a]) / 20;
    CHECK(steps == doctest::Approx(std::round(steps)));
    CHECK(fine.origin[a] <= rois[1].box.min[a] + 1e-9);
    CHECK(fine.bounds().max[a] >= rois[1].box.max[a] - 1e-9);
  }
}

TEST_CASE("dense ROI carve equals full fine carve inside ROIs") {
  const auto scene = synth::generate_synthetic_scene(synth::two_sphere_scene(), synth::two_sphere_rig());
  const auto coarse_spec = GridSpec::covering(scene.spec.stage, 100);
  auto coarse = carve(scene.rig, scene.silhouettes, coarse_spec, 3);
  const auto lab = label_components(coarse, {32, 32, 32});
  REQUIRE(lab.components.size() == 2);
  const auto rois = extract_rois(lab, coarse_spec, 100);
  const double fine = 40;
  const auto dense = dense_carve(scene.rig, scene.silhouettes, rois, coarse_spec.bounds(), fine, 3);
  const auto full_spec = GridSpec::covering(coarse_spec.bounds(), fine);
  const auto full = carve(scene.rig, scene.silhouettes, full_spec, 3);

  std::size_t inside = 0;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    const auto& rs = dense[r].spec();
    for (int k = 0; k < rs.dims[2]; ++k)
      for (int j = 0; j < rs.dims[1]; ++j)
        for (int i = 0; i < rs.dims[0]; ++i) {
          const Vec3 c = rs.center(i, j, k);
          const Vec3 f = (c - full_spec.origin) / fine;
          const int fi = static_cast<int>(f.x()), fj = static_cast<int>(f.y()), fk = static_cast<int>(f.z());
          REQUIRE((full_spec.center(fi, fj, fk) - c).norm() < 1e-6);
          CHECK(dense[r].get(i, j, k) == full.get(fi, fj, fk));
          inside += dense[r].get(i, j, k);
        }
  }
  // Every ON voxel of the full carve lies in some ROI.
  std::size_t full_on = 0;
  full.for_each_on([&](std::size_t v) {
    const auto p = full_spec.unlinear(v);
    const Vec3 c = full_spec.center(p[0], p[1], p[2]);
    bool in_roi = false;
    for (const auto& roi : rois) in_roi = in_roi || roi.box.contains(c);
    CHECK(in_roi);
    ++full_on;
  });
  CHECK(inside == full_on);
}

TEST_CASE("grid file round trip") {
  std::mt19937_64 rng(77);
  auto g = random_grid(rng, {13, 7, 5}, 0.3);
  const auto path = std::filesystem::temp_directory_path() / "fvv_test_grid.bin";
  write_grid(path, g);
  const auto back = read_grid(path);
  CHECK(back == g);
  CHECK(back.spec() == g.spec());

  { std::ofstream(path, std::ios::binary) << "NOTAGRID"; }
  CHECK_THROWS_AS(read_grid(path), Error);
  std::filesystem::remove(path);
}
