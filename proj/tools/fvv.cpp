// fvv: command-line front end for the reconstruction pipeline.
//
//   fvv synth          write a synthetic fixture scene (rig, frames, masks)
//   fvv reconstruct    frames or masks -> scene bundle
//   fvv render         scene bundle + virtual pose -> image
//   fvv sweep          stage timings over a range of voxel spacings (CSV)
//   fvv orbit-fixture  orbit poses with the camera ranking at each pose (JSON)

#include "fvv/pipeline.hpp"
#include "fvv/render.hpp"
#include "fvv/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

using namespace fvv;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string cam_file(int id) { return "cam" + std::to_string(id) + ".png"; }

Vec3 to_vec(const std::vector<double>& v, const char* what) {
  if (v.size() != 3) throw Error(std::string(what) + ": expected three comma-separated values");
  return {v[0], v[1], v[2]};
}

// --- synthetic scenes -----------------------------------------------------

struct Fixture {
  synth::SceneSpec spec;
  calib::CameraRig rig;
};

Fixture builtin_scene(const std::string& name, int width, int height) {
  Fixture f;
  if (name == "two_sphere") {
    f = {synth::two_sphere_scene(), synth::two_sphere_rig()};
  } else if (name == "unit_sphere") {
    f = {synth::unit_sphere_scene(), synth::unit_sphere_rig()};
  } else if (name == "multi_object") {
    f = {synth::multi_object_scene(), synth::volleyball_rig(width > 0 ? width : 960, height > 0 ? height : 540)};
  } else if (name == "volleyball") {
    f = {synth::volleyball_scene(), synth::volleyball_rig(width > 0 ? width : 1920, height > 0 ? height : 1080)};
  } else {
    throw Error("unknown scene '" + name + "' (two_sphere, unit_sphere, multi_object, volleyball)");
  }
  return f;
}

const std::vector<std::string> kScenes{"two_sphere", "unit_sphere", "multi_object", "volleyball"};

// --- pipeline configuration flags -----------------------------------------

struct ConfigFlags {
  std::string config_file;
  std::vector<double> stage_min, stage_max;
  std::optional<double> coarse, fine, roi_margin, t_v, theta_near, theta_far, d_max;
  std::optional<int> min_views;
  std::optional<std::uint64_t> t_small, t_large, voxel_budget;
  std::string isovalue;
  std::vector<int> ccl_block;
  bool export_depth = false;

  void add(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config file; flags below override it")->check(CLI::ExistingFile);
    app->add_option("--stage-min", stage_min, "Stage lower corner x,y,z (mm)")->delimiter(',')->expected(3);
    app->add_option("--stage-max", stage_max, "Stage upper corner x,y,z (mm)")->delimiter(',')->expected(3);
    app->add_option("--coarse", coarse, "Coarse voxel spacing (mm)");
    app->add_option("--fine", fine, "Fine voxel spacing (mm)");
    app->add_option("--min-views", min_views, "Cameras that must see a voxel before it can be carved");
    app->add_option("--t-small", t_small, "Drop components with fewer voxels");
    app->add_option("--t-large", t_large, "Drop components with more voxels");
    app->add_option("--roi-margin", roi_margin, "ROI margin (mm); negative means one coarse voxel");
    app->add_option("--t-v", t_v, "Visibility depth tolerance (mm); negative means three fine voxels");
    app->add_option("--isovalue", isovalue, "'exact' or a fixed lambda in [0, 1]");
    app->add_option("--theta-near", theta_near, "Silhouette threshold at the proposal boundary");
    app->add_option("--theta-far", theta_far, "Silhouette threshold far from the proposal");
    app->add_option("--d-max", d_max, "Distance (px) at which the threshold reaches theta-far");
    app->add_option("--ccl-block", ccl_block, "Labeling block size bx,by,bz")->delimiter(',')->expected(3);
    app->add_option("--voxel-budget", voxel_budget, "Largest grid any carve may allocate");
    app->add_flag("--export-depth", export_depth, "Also write 16-bit depth previews into the bundle");
  }

  pipeline::PipelineConfig resolve(std::optional<pipeline::PipelineConfig> base = {}) const {
    auto cfg = config_file.empty() ? base.value_or(pipeline::PipelineConfig{}) : pipeline::load_config(config_file);
    if (!stage_min.empty()) cfg.stage.min = to_vec(stage_min, "--stage-min");
    if (!stage_max.empty()) cfg.stage.max = to_vec(stage_max, "--stage-max");
    if (coarse) cfg.coarse_spacing = *coarse;
    if (fine) cfg.fine_spacing = *fine;
    if (min_views) cfg.min_views = *min_views;
    if (t_small) cfg.noise.t_small = *t_small;
    if (t_large) cfg.noise.t_large = *t_large;
    if (roi_margin) cfg.roi_margin = *roi_margin;
    if (t_v) cfg.t_v = *t_v;
    if (!isovalue.empty()) {
      if (isovalue == "exact") {
        cfg.isovalue = mesh::IsovalueMode::exact();
      } else {
        try {
          cfg.isovalue = mesh::IsovalueMode::fixed(std::stod(isovalue));
        } catch (const std::logic_error&) {
          throw Error("--isovalue must be 'exact' or a number");
        }
      }
    }
    if (theta_near) cfg.adaptive.theta_near = *theta_near;
    if (theta_far) cfg.adaptive.theta_far = *theta_far;
    if (d_max) cfg.adaptive.d_max = *d_max;
    if (!ccl_block.empty()) cfg.ccl_block = {ccl_block[0], ccl_block[1], ccl_block[2]};
    if (voxel_budget) cfg.voxel_budget = *voxel_budget;
    if (export_depth) cfg.export_depth = true;
    cfg.validate();
    return cfg;
  }
};

// --- per-camera inputs ----------------------------------------------------

std::vector<ColorImage> read_frames(const fs::path& dir, const calib::CameraRig& rig) {
  std::vector<ColorImage> out;
  for (const auto& cam : rig.cameras) out.push_back(read_image(dir / cam_file(cam.id)));
  return out;
}

std::vector<Mask> read_masks(const fs::path& dir, const calib::CameraRig& rig) {
  std::vector<Mask> out;
  for (const auto& cam : rig.cameras) out.push_back(read_mask(dir / cam_file(cam.id)));
  return out;
}

// Background frames are cam<id>_<k>.png, k = 0, 1, ... up to the first gap.
std::vector<silhouette::BackgroundModel> read_backgrounds(const fs::path& dir, const calib::CameraRig& rig) {
  std::vector<silhouette::BackgroundModel> out;
  for (const auto& cam : rig.cameras) {
    std::vector<ColorImage> frames;
    for (int k = 0;; ++k) {
      const auto p = dir / ("cam" + std::to_string(cam.id) + "_" + std::to_string(k) + ".png");
      if (!fs::exists(p)) break;
      frames.push_back(read_image(p));
    }
    if (frames.empty()) throw Error("no background frames for camera " + std::to_string(cam.id) + " in " + dir.string());
    out.push_back(silhouette::build_background(frames));
  }
  return out;
}

// --- subcommands ----------------------------------------------------------

struct SynthArgs {
  std::string scene = "two_sphere";
  std::string out;
  int width = 0, height = 0;
  double noise = 0;
  int background_frames = 0;
  double proposal_erosion = 0;
  std::uint64_t seed = 1;
};

int run_synth(const SynthArgs& a) {
  auto f = builtin_scene(a.scene, a.width, a.height);
  f.spec.noise_sigma = a.noise;
  f.spec.background_frames = a.background_frames;
  f.spec.proposal_erosion = a.proposal_erosion;
  f.spec.seed = a.seed;
  const auto scene = synth::generate_synthetic_scene(f.spec, f.rig);

  const fs::path out(a.out);
  for (const char* sub : {"frames", "masks", "proposals"}) fs::create_directories(out / sub);
  calib::save_rig(out / "rig.json", scene.rig);
  for (std::size_t c = 0; c < scene.rig.size(); ++c) {
    const int id = scene.rig[c].id;
    write_image(out / "frames" / cam_file(id), scene.frames[c]);
    write_mask(out / "masks" / cam_file(id), scene.silhouettes[c]);
    write_mask(out / "proposals" / cam_file(id), scene.proposals[c]);
    if (!scene.background_frames.empty() && !scene.background_frames[c].empty()) {
      fs::create_directories(out / "background");
      for (std::size_t k = 0; k < scene.background_frames[c].size(); ++k)
        write_image(out / "background" / ("cam" + std::to_string(id) + "_" + std::to_string(k) + ".png"),
                    scene.background_frames[c][k]);
    }
  }
  pipeline::PipelineConfig cfg;
  cfg.stage = scene.spec.stage;
  std::ofstream(out / "config.json") << pipeline::format_config(cfg);
  std::printf("wrote %zu cameras to %s\n", scene.rig.size(), out.c_str());
  return 0;
}

struct ReconstructArgs {
  std::string rig, frames, masks, proposals, backgrounds, out;
  int frame_id = 0;
  ConfigFlags config;
};

void print_stats(const pipeline::FrameResult& r) {
  const auto& labels = pipeline::StageTimings::labels();
  const auto values = r.timings.values();
  for (std::size_t i = 0; i < labels.size(); ++i) std::printf("  %-28s %10.1f ms\n", labels[i], values[i]);
  std::printf("  %-28s %10.1f ms\n", "total", r.timings.total());
  std::printf("  sparse voxels %llu tested, %llu occupied; components %llu found, %llu kept\n",
              static_cast<unsigned long long>(r.stats.sparse_tested),
              static_cast<unsigned long long>(r.stats.sparse_occupied),
              static_cast<unsigned long long>(r.stats.components_found),
              static_cast<unsigned long long>(r.stats.components_kept));
  std::printf("  dense voxels %llu tested, %llu occupied; %llu triangles\n",
              static_cast<unsigned long long>(r.stats.dense_tested),
              static_cast<unsigned long long>(r.stats.dense_occupied),
              static_cast<unsigned long long>(r.stats.triangles));
}

int run_reconstruct(const ReconstructArgs& a) {
  const auto rig = calib::load_rig(a.rig);
  const auto cfg = a.config.resolve();
  const auto frames = read_frames(a.frames, rig);
  pipeline::FrameResult result;
  if (!a.masks.empty()) {
    result = pipeline::reconstruct(cfg, rig, read_masks(a.masks, rig));
  } else {
    if (a.proposals.empty() || a.backgrounds.empty())
      throw Error("reconstruct needs --masks, or both --proposals and --backgrounds");
    pipeline::FrameInputs in;
    in.frames = frames;
    in.proposals = read_masks(a.proposals, rig);
    in.backgrounds = read_backgrounds(a.backgrounds, rig);
    result = pipeline::run_frame(cfg, rig, in);
  }
  pipeline::write_bundle(a.out, pipeline::make_bundle(cfg, rig, frames, result, a.frame_id),
                         result.visibility.depths);
  std::printf("bundle %s: %zu objects\n", a.out.c_str(), result.objects.size());
  print_stats(result);
  return 0;
}

struct RenderArgs {
  std::string bundle, out, source_map;
  std::optional<int> camera;
  std::vector<double> eye, target, orbit;
  int width = 0, height = 0;
  double focal = 0;
  std::vector<int> background{0, 0, 0}, fallback{128, 128, 128};
};

std::array<std::uint8_t, 3> rgb(const std::vector<int>& v, const char* what) {
  if (v.size() != 3) throw Error(std::string(what) + ": expected r,g,b");
  std::array<std::uint8_t, 3> out{};
  for (int i = 0; i < 3; ++i) {
    if (v[i] < 0 || v[i] > 255) throw Error(std::string(what) + ": components must be in [0, 255]");
    out[i] = static_cast<std::uint8_t>(v[i]);
  }
  return out;
}

// Eye position on a sphere around `target`; azimuth from +x toward +y,
// elevation from the xy plane, degrees.
Vec3 orbit_eye(const Vec3& target, double azimuth_deg, double elevation_deg, double radius) {
  const double az = azimuth_deg * M_PI / 180, el = elevation_deg * M_PI / 180;
  return target + radius * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
}

render::VirtualCamera virtual_camera(const RenderArgs& a, const calib::CameraRig& rig) {
  render::VirtualCamera view;
  if (a.camera) {
    const auto it = std::find_if(rig.cameras.begin(), rig.cameras.end(), [&](const auto& c) { return c.id == *a.camera; });
    if (it == rig.cameras.end()) throw Error("no camera with id " + std::to_string(*a.camera));
    view = *it;
    view.dist = {};
  } else {
    // Intrinsics default to the first rig camera's.
    view = rig[0];
    view.dist = {};
    view.skew = 0;
    const Vec3 target = a.target.empty() ? Vec3::Zero() : to_vec(a.target, "--target");
    Vec3 eye;
    if (!a.orbit.empty()) {
      if (a.orbit.size() != 3) throw Error("--orbit: expected azimuth,elevation,radius");
      eye = orbit_eye(target, a.orbit[0], a.orbit[1], a.orbit[2]);
    } else if (!a.eye.empty()) {
      eye = to_vec(a.eye, "--eye");
    } else {
      throw Error("render needs --camera, --eye or --orbit");
    }
    calib::look_at(view, eye, target);
  }
  if (a.width > 0 || a.height > 0) {
    const int w = a.width > 0 ? a.width : view.width, h = a.height > 0 ? a.height : view.height;
    view.fx *= static_cast<double>(w) / view.width;
    view.fy *= static_cast<double>(h) / view.height;
    view.width = w;
    view.height = h;
    view.cx = (w - 1) / 2.0;
    view.cy = (h - 1) / 2.0;
  }
  if (a.focal > 0) view.fx = view.fy = a.focal;
  view.id = -1;
  view.validate();
  return view;
}

int run_render(const RenderArgs& a) {
  const auto bundle = pipeline::read_bundle(a.bundle);
  const auto view = virtual_camera(a, bundle.rig);
  render::RenderOptions opt;
  opt.background_color = rgb(a.background, "--background");
  opt.fallback_color = rgb(a.fallback, "--fallback");
  const auto img = render::render_view(bundle.mesh, bundle.rig, bundle.textures, bundle.visibility, view, opt);
  write_image(a.out, img.color);
  if (!a.source_map.empty()) write_image(a.source_map, render::source_map_image(img));
  std::printf("rendered %dx%d to %s (%llu fallback pixels)\n", view.width, view.height, a.out.c_str(),
              static_cast<unsigned long long>(img.fallback_pixels));
  return 0;
}

struct SweepArgs {
  std::string scene, rig, masks, out, axis = "coarse";
  std::vector<double> values;
  int repeats = 1;
  int width = 0, height = 0;
  ConfigFlags config;
};

int run_sweep(const SweepArgs& a) {
  calib::CameraRig rig;
  std::vector<Mask> sils;
  std::optional<pipeline::PipelineConfig> base;
  if (!a.scene.empty()) {
    const auto f = builtin_scene(a.scene, a.width, a.height);
    auto scene = synth::generate_synthetic_scene(f.spec, f.rig);
    rig = scene.rig;
    sils = std::move(scene.silhouettes);
    base = pipeline::PipelineConfig{};
    base->stage = f.spec.stage;
  } else {
    if (a.rig.empty() || a.masks.empty()) throw Error("sweep needs --scene, or --rig with --masks");
    rig = calib::load_rig(a.rig);
    sils = read_masks(a.masks, rig);
  }
  const auto cfg = a.config.resolve(base);
  const auto axis = a.axis == "fine" ? pipeline::SweepAxis::fine_spacing : pipeline::SweepAxis::coarse_spacing;
  const auto rows = pipeline::sweep(cfg, axis, a.values, rig, sils, a.repeats);
  const auto csv = pipeline::sweep_csv(axis, rows);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream(a.out) << csv;
    std::printf("wrote %zu rows to %s\n", rows.size(), a.out.c_str());
  }
  return 0;
}

struct OrbitArgs {
  std::string rig, scene = "volleyball", out;
  int poses = 64;
  std::vector<double> target;
  double radius = 0;
  std::vector<double> elevations{5, 20, 40};
};

int run_orbit_fixture(const OrbitArgs& a) {
  if (a.poses < 1) throw Error("--poses must be positive");
  if (a.elevations.empty()) throw Error("--elevations must not be empty");
  calib::CameraRig rig = a.rig.empty() ? builtin_scene(a.scene, 0, 0).rig : calib::load_rig(a.rig);
  rig.validate();

  // Default target and radius: centroid of the camera centers and the mean
  // horizontal distance to them, so the orbit passes through the ring.
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : rig.cameras) centroid += c.center();
  centroid /= static_cast<double>(rig.size());
  const Vec3 target = a.target.empty() ? Vec3(centroid.x(), centroid.y(), 0) : to_vec(a.target, "--target");
  double radius = a.radius;
  if (radius <= 0) {
    for (const auto& c : rig.cameras) radius += (c.center() - target).head<2>().norm();
    radius /= static_cast<double>(rig.size());
  }

  json poses = json::array();
  for (int i = 0; i < a.poses; ++i) {
    const double az = 360.0 * i / a.poses;
    const double el = a.elevations[static_cast<std::size_t>(i) % a.elevations.size()];
    const Vec3 eye = orbit_eye(target, az, el, radius);
    const auto ranking = render::rank_cameras(eye, rig);
    poses.push_back({{"azimuth_deg", az},
                     {"elevation_deg", el},
                     {"radius", radius},
                     {"eye", {eye.x(), eye.y(), eye.z()}},
                     {"ranking", ranking},
                     {"active", ranking.front()}});
  }
  json doc{{"version", 1},
           {"target", {target.x(), target.y(), target.z()}},
           {"rig", json::parse(calib::format_rig(rig))},
           {"poses", poses}};
  const std::string text = doc.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(a.out) << text;
    std::printf("wrote %d poses to %s\n", a.poses, a.out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine visual hull reconstruction and free-viewpoint rendering"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic fixture scene");
  synth_cmd->add_option("--scene", sa.scene, "Fixture scene")->check(CLI::IsMember(kScenes));
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();
  synth_cmd->add_option("--width", sa.width, "Image width for the ring rigs of multi_object and volleyball");
  synth_cmd->add_option("--height", sa.height, "Image height for the ring rigs of multi_object and volleyball");
  synth_cmd->add_option("--noise", sa.noise, "Gaussian pixel noise sigma (8-bit units)");
  synth_cmd->add_option("--background-frames", sa.background_frames, "Object-free frames per camera");
  synth_cmd->add_option("--proposal-erosion", sa.proposal_erosion, "Pixels removed from the proposal masks");
  synth_cmd->add_option("--seed", sa.seed, "Noise seed");

  ReconstructArgs ra;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct one frame into a scene bundle");
  rec_cmd->add_option("--rig", ra.rig, "Calibration manifest")->required()->check(CLI::ExistingFile);
  rec_cmd->add_option("--frames", ra.frames, "Directory of cam<id>.png frames")->required()->check(CLI::ExistingDirectory);
  rec_cmd->add_option("--masks", ra.masks, "Directory of cam<id>.png silhouettes (skips extraction)")
      ->check(CLI::ExistingDirectory);
  rec_cmd->add_option("--proposals", ra.proposals, "Directory of cam<id>.png proposal masks")
      ->check(CLI::ExistingDirectory);
  rec_cmd->add_option("--backgrounds", ra.backgrounds, "Directory of cam<id>_<k>.png background frames")
      ->check(CLI::ExistingDirectory);
  rec_cmd->add_option("--out", ra.out, "Bundle directory")->required();
  rec_cmd->add_option("--frame-id", ra.frame_id, "Frame id recorded in the manifest");
  ra.config.add(rec_cmd);

  RenderArgs na;
  auto* render_cmd = app.add_subcommand("render", "Render a bundle from a virtual viewpoint");
  render_cmd->add_option("--bundle", na.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  render_cmd->add_option("--out", na.out, "Output image")->required();
  render_cmd->add_option("--source-map", na.source_map, "Also write a false-color source-camera map");
  render_cmd->add_option("--camera", na.camera, "Render from this input camera's pose");
  render_cmd->add_option("--eye", na.eye, "Eye position x,y,z (mm)")->delimiter(',');
  render_cmd->add_option("--target", na.target, "Look-at target x,y,z (mm)")->delimiter(',');
  render_cmd->add_option("--orbit", na.orbit, "azimuth,elevation,radius about --target (deg, deg, mm)")
      ->delimiter(',');
  render_cmd->add_option("--width", na.width, "Output width (scales the focal length)");
  render_cmd->add_option("--height", na.height, "Output height (scales the focal length)");
  render_cmd->add_option("--focal", na.focal, "Focal length in pixels");
  render_cmd->add_option("--background", na.background, "Background color r,g,b")->delimiter(',');
  render_cmd->add_option("--fallback", na.fallback, "Color for surface no camera sees, r,g,b")->delimiter(',');

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Stage timings over voxel spacings");
  sweep_cmd->add_option("--scene", wa.scene, "Built-in fixture scene")->check(CLI::IsMember(kScenes));
  sweep_cmd->add_option("--rig", wa.rig, "Calibration manifest (with --masks)")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--masks", wa.masks, "Directory of cam<id>.png silhouettes")->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--axis", wa.axis, "Spacing to vary")->check(CLI::IsMember({"coarse", "fine"}));
  sweep_cmd->add_option("--values", wa.values, "Ascending spacings (mm)")->delimiter(',')->required();
  sweep_cmd->add_option("--repeats", wa.repeats, "Runs per value; the fastest per stage is kept");
  sweep_cmd->add_option("--width", wa.width, "Image width for the ring rigs");
  sweep_cmd->add_option("--height", wa.height, "Image height for the ring rigs");
  sweep_cmd->add_option("--out", wa.out, "CSV file (default: stdout)");
  wa.config.add(sweep_cmd);

  OrbitArgs oa;
  auto* orbit_cmd = app.add_subcommand("orbit-fixture", "Orbit poses and the camera ranking at each");
  orbit_cmd->add_option("--rig", oa.rig, "Calibration manifest")->check(CLI::ExistingFile);
  orbit_cmd->add_option("--scene", oa.scene, "Built-in rig to use when --rig is absent")->check(CLI::IsMember(kScenes));
  orbit_cmd->add_option("--poses", oa.poses, "Number of poses");
  orbit_cmd->add_option("--target", oa.target, "Orbit center x,y,z (mm)")->delimiter(',');
  orbit_cmd->add_option("--radius", oa.radius, "Orbit radius (mm)");
  orbit_cmd->add_option("--elevations", oa.elevations, "Elevations cycled over the poses (deg)")->delimiter(',');
  orbit_cmd->add_option("--out", oa.out, "JSON file (default: stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    set_num_threads(threads);
    if (*synth_cmd) return run_synth(sa);
    if (*rec_cmd) return run_reconstruct(ra);
    if (*render_cmd) return run_render(na);
    if (*sweep_cmd) return run_sweep(wa);
    if (*orbit_cmd) return run_orbit_fixture(oa);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fvv: %s\n", e.what());
    return 1;
  }
  return 1;
}
