#include "doctest.h"

#include "fvv/pipeline.hpp"
#include "fvv/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fvv;
using namespace fvv::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

PipelineConfig two_sphere_config() {
  PipelineConfig cfg;
  cfg.stage = synth::two_sphere_scene().stage;
  cfg.coarse_spacing = 80;
  cfg.fine_spacing = 40;
  return cfg;
}

const synth::SyntheticScene& two_spheres() {
  static const auto scene = synth::generate_synthetic_scene(synth::two_sphere_scene(), synth::two_sphere_rig());
  return scene;
}

}  // namespace

TEST_CASE("config round trip and defaults") {
  PipelineConfig cfg;
  CHECK(cfg.coarse_spacing == 50);
  CHECK(cfg.fine_spacing == 20);
  CHECK(cfg.min_views == 3);
  CHECK(cfg.effective_margin() == 50);
  CHECK(cfg.effective_t_v() == 60);
  CHECK(cfg.isovalue.kind == mesh::IsovalueMode::Kind::exact);

  cfg.coarse_spacing = 60;
  cfg.isovalue = mesh::IsovalueMode::fixed(0.25);
  cfg.ccl_block = {8, 16, 4};
  cfg.noise = {3, 1000};
  cfg.export_depth = true;
  const auto back = parse_config(format_config(cfg));
  CHECK(back == cfg);
  CHECK(back.isovalue.lambda0 == 0.25);

  const auto partial = parse_config(R"({"fine_spacing": 25, "isovalue": "exact"})");
  CHECK(partial.fine_spacing == 25);
  CHECK(partial.coarse_spacing == 50);

  CHECK_THROWS_AS(parse_config(R"({"fine_spacing": 80})"), Error);  // finer than coarse
  CHECK_THROWS_AS(parse_config(R"({"isovalue": "smooth"})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"isovalue": 2})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"coarse_spacing": "big"})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"stage": {"min": [0, 0, 0], "max": [0, 1, 1]}})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"ccl_block": [0, 1, 1]})"), Error);
  CHECK_THROWS_AS(parse_config("not json"), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("stage labels") {
  const auto& l = StageTimings::labels();
  CHECK(std::string(l[0]) == "(B-1) Sparse visual hull");
  CHECK(std::string(l[5]) == "(D-2) Visibility detection");
  StageTimings t{1, 2, 3, 4, 5, 6};
  CHECK(t.total() == 21);
}

TEST_CASE("silhouette extraction recovers the true masks") {
  auto spec = synth::two_sphere_scene();
  spec.noise_sigma = 3;
  spec.background_frames = 10;
  spec.proposal_erosion = 4;
  const auto scene = synth::generate_synthetic_scene(spec, synth::two_sphere_rig());
  FrameInputs in;
  in.frames = scene.frames;
  in.proposals = scene.proposals;
  for (const auto& bgs : scene.background_frames) in.backgrounds.push_back(silhouette::build_background(bgs));
  const auto sils = extract_silhouettes(PipelineConfig{}, scene.rig, in);
  REQUIRE(sils.size() == scene.rig.size());
  for (std::size_t c = 0; c < sils.size(); ++c) CHECK(iou(sils[c], scene.silhouettes[c]) > 0.97);

  in.proposals.pop_back();
  try {
    run_frame(PipelineConfig{}, scene.rig, in);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("[silhouette] ", 0) == 0);
  }
}

TEST_CASE("stage errors carry the stage name") {
  auto cfg = two_sphere_config();
  cfg.voxel_budget = 1000;
  try {
    reconstruct(cfg, two_spheres().rig, two_spheres().silhouettes);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("[sparse carve] ", 0) == 0);
  }
  cfg = two_sphere_config();
  cfg.fine_spacing = -1;
  CHECK_THROWS_WITH_AS(reconstruct(cfg, two_spheres().rig, two_spheres().silhouettes),
                       doctest::Contains("[config]"), Error);
}

TEST_CASE("reconstruction of two spheres") {
  const auto& scene = two_spheres();
  const auto cfg = two_sphere_config();
  const auto res = reconstruct(cfg, scene.rig, scene.silhouettes);
  CHECK(res.stats.components_found == 2);
  CHECK(res.stats.components_kept == 2);
  REQUIRE(res.objects.size() == 2);
  REQUIRE(res.rois.size() == 2);
  REQUIRE(res.dense.size() == 2);
  CHECK(res.stats.sparse_tested == hull::GridSpec::covering(cfg.stage, 80).voxel_count());
  CHECK(res.stats.sparse_occupied == res.coarse.count());
  std::uint64_t dense_on = 0, dense_tested = 0;
  for (const auto& g : res.dense) {
    dense_on += g.count();
    dense_tested += g.size();
  }
  CHECK(res.stats.dense_occupied == dense_on);
  CHECK(res.stats.dense_tested == dense_tested);
  CHECK(res.stats.triangles == res.mesh.triangle_count());

  // Objects partition the triangle list in order, one id each.
  std::uint64_t next = 0;
  for (const auto& o : res.objects) {
    CHECK(o.first_triangle == next);
    CHECK(o.triangle_count > 0);
    for (std::uint64_t t = o.first_triangle; t < o.first_triangle + o.triangle_count; ++t)
      CHECK(res.mesh.object_ids[t] == o.id);
    next += o.triangle_count;
  }
  CHECK(next == res.mesh.triangle_count());
  // Each object's mesh lies near one sphere.
  for (const auto& o : res.objects) {
    const Vec3 c = res.mesh.centroid(o.first_triangle);
    double best = 1e18;
    for (const auto& s : scene.spec.objects)
      best = std::min(best, std::abs((c - s.sphere.center).norm() - s.sphere.radius));
    CHECK(best < cfg.fine_spacing);
  }
  REQUIRE(res.visibility.map.visible.size() == scene.rig.size());
  CHECK(res.timings.total() > 0);
}

TEST_CASE("noise filter drops small blobs") {
  auto spec = synth::two_sphere_scene();
  spec.objects.push_back(synth::SceneObject::make_sphere(Vec3(1200, -1200, 400), 150));
  const auto scene = synth::generate_synthetic_scene(spec, synth::two_sphere_rig());
  auto cfg = two_sphere_config();
  cfg.noise.t_small = 0;
  const auto all = reconstruct(cfg, scene.rig, scene.silhouettes);
  REQUIRE(all.objects.size() == 3);
  std::vector<std::uint64_t> sizes;
  for (const auto& c : all.labeling.components) sizes.push_back(c.voxel_count);
  std::sort(sizes.begin(), sizes.end());
  REQUIRE(sizes[0] < sizes[1]);

  cfg.noise.t_small = sizes[0] + 1;
  const auto res = reconstruct(cfg, scene.rig, scene.silhouettes);
  CHECK(res.stats.components_found == 3);
  CHECK(res.stats.components_kept == 2);
  CHECK(res.objects.size() == 2);
  CHECK(res.coarse.count() == all.coarse.count() - sizes[0]);

  cfg.noise = {0, sizes[1] - 1};
  CHECK(reconstruct(cfg, scene.rig, scene.silhouettes).objects.size() == 1);
}

TEST_CASE("empty scene gives an empty mesh") {
  const auto& scene = two_spheres();
  std::vector<Mask> empty;
  for (const auto& s : scene.silhouettes) empty.emplace_back(s.width, s.height);
  const auto res = reconstruct(two_sphere_config(), scene.rig, empty);
  CHECK(res.mesh.empty());
  CHECK(res.objects.empty());
  const auto dir = fresh_dir("fvv_test_bundle_empty");
  write_bundle(dir, make_bundle(two_sphere_config(), scene.rig, scene.frames, res));
  CHECK(read_bundle(dir).mesh.empty());
  fs::remove_all(dir);
}

TEST_CASE("scene bundle round trip and layout") {
  const auto& scene = two_spheres();
  auto cfg = two_sphere_config();
  cfg.export_depth = true;
  const auto res = reconstruct(cfg, scene.rig, scene.silhouettes);
  const auto bundle = make_bundle(cfg, scene.rig, scene.frames, res, 7);
  const auto dir = fresh_dir("fvv_test_bundle");
  write_bundle(dir, bundle, res.visibility.depths);

  for (const char* f : {"manifest.json", "rig.json", "mesh.ply", "timings.json"}) CHECK(fs::exists(dir / f));
  for (const auto& cam : scene.rig.cameras) {
    const auto id = std::to_string(cam.id);
    CHECK(fs::exists(dir / ("texture_cam" + id + ".png")));
    CHECK(fs::file_size(dir / ("visibility_cam" + id + ".bin")) == res.mesh.triangle_count());
    CHECK(fs::exists(dir / ("depth_cam" + id + ".png")));
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["schema"] == "fvv-scene-bundle");
  CHECK(manifest["version"] == SceneBundle::kVersion);
  CHECK(manifest["frame_id"] == 7);
  CHECK(manifest["triangle_count"] == res.mesh.triangle_count());
  CHECK(manifest["cameras"].size() == scene.rig.size());
  CHECK(manifest["objects"].size() == 2);
  const auto timings = nlohmann::json::parse(slurp(dir / "timings.json"));
  CHECK(timings["stages"].size() == 6);
  CHECK(timings["stages"][2]["label"] == "(B-3) Dense visual hull");

  const auto back = read_bundle(dir);
  CHECK(back.frame_id == 7);
  CHECK(back.config == cfg);
  CHECK(back.rig == scene.rig);
  CHECK(back.mesh == res.mesh);
  CHECK(back.objects == res.objects);
  CHECK(back.textures == scene.frames);
  CHECK(back.visibility == res.visibility.map);
  CHECK(back.stats.triangles == res.stats.triangles);

  SUBCASE("tampered visibility is rejected") {
    const auto vis = dir / ("visibility_cam" + std::to_string(scene.rig[2].id) + ".bin");
    fs::resize_file(vis, fs::file_size(vis) - 1);
    CHECK_THROWS_AS(read_bundle(dir), Error);
  }
  SUBCASE("wrong schema is rejected") {
    std::ofstream(dir / "manifest.json") << R"({"schema": "other", "version": 1})";
    CHECK_THROWS_AS(read_bundle(dir), Error);
  }
  fs::remove_all(dir);
}

TEST_CASE("bundles are byte-identical across runs and thread counts") {
  const auto& scene = two_spheres();
  const auto cfg = two_sphere_config();
  const unsigned saved = num_threads();
  std::vector<fs::path> dirs;
  for (unsigned threads : {1u, 4u, 1u}) {
    set_num_threads(threads);
    const auto res = reconstruct(cfg, scene.rig, scene.silhouettes);
    dirs.push_back(fresh_dir("fvv_test_det_" + std::to_string(dirs.size())));
    write_bundle(dirs.back(), make_bundle(cfg, scene.rig, scene.frames, res), res.visibility.depths);
  }
  set_num_threads(saved);
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    const auto name = entry.path().filename();
    if (name == "timings.json") continue;
    const auto ref = slurp(entry.path());
    CHECK_MESSAGE(slurp(dirs[1] / name) == ref, name.string());
    CHECK_MESSAGE(slurp(dirs[2] / name) == ref, name.string());
  }
  for (const auto& d : dirs) fs::remove_all(d);
}

TEST_CASE("sweeps") {
  const auto& scene = two_spheres();
  const auto cfg = two_sphere_config();
  const std::vector<double> values{80, 100, 120};
  const auto rows = sweep(cfg, SweepAxis::coarse_spacing, values, scene.rig, scene.silhouettes, 2);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].value == values[i]);
    CHECK(rows[i].stats.sparse_tested == hull::GridSpec::covering(cfg.stage, values[i]).voxel_count());
  }
  const auto csv = sweep_csv(SweepAxis::coarse_spacing, rows);
  CHECK(csv.rfind("coarse_spacing_mm,sparse_carve_ms,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const std::vector<double> unsorted{40, 30};
  CHECK_THROWS_AS(sweep(cfg, SweepAxis::fine_spacing, unsorted, scene.rig, scene.silhouettes), Error);
}
