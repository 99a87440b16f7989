#pragma once

#include "fvv/calib.hpp"
#include "fvv/hull.hpp"
#include "fvv/mesh.hpp"
#include "fvv/silhouette.hpp"
#include "fvv/visibility.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fvv::pipeline {

struct PipelineConfig {
  Aabb stage{Vec3(-9000, -9000, 0), Vec3(9000, 9000, 9000)};
  double coarse_spacing = 50;
  double fine_spacing = 20;
  int min_views = 3;
  hull::NoiseFilterParams noise{8, std::numeric_limits<std::uint64_t>::max()};
  double roi_margin = -1;  // < 0: one coarse voxel
  double t_v = -1;         // < 0: three fine voxels
  mesh::IsovalueMode isovalue = mesh::IsovalueMode::exact();
  silhouette::AdaptiveParams adaptive;
  hull::Index3 ccl_block{32, 32, 32};
  std::uint64_t voxel_budget = hull::kDefaultVoxelBudget;
  bool export_depth = false;

  double effective_margin() const { return roi_margin < 0 ? coarse_spacing : roi_margin; }
  double effective_t_v() const { return t_v < 0 ? 3.0 * fine_spacing : t_v; }
  void validate() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&);
};

// JSON config file (docs/formats.md). Missing keys keep their defaults.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text);
std::string format_config(const PipelineConfig& cfg);

// Elapsed wall-clock per stage, milliseconds, I/O excluded.
struct StageTimings {
  double sparse_carve = 0;
  double noise_filter_roi = 0;  // includes ROI extraction
  double dense_carve = 0;
  double polygonization = 0;    // C
  double depth_images = 0;
  double visibility = 0;

  double total() const {
    return sparse_carve + noise_filter_roi + dense_carve + polygonization + depth_images + visibility;
  }
  static const std::array<const char*, 6>& labels();
  std::array<double, 6> values() const {
    return {sparse_carve, noise_filter_roi, dense_carve, polygonization, depth_images, visibility};
  }
};

struct FrameStats {
  std::uint64_t sparse_tested = 0;
  std::uint64_t sparse_occupied = 0;
  std::uint64_t components_found = 0;
  std::uint64_t components_kept = 0;
  std::uint64_t dense_tested = 0;
  std::uint64_t dense_occupied = 0;
  mesh::PolygonizeStats polygonize;
  std::uint64_t triangles = 0;
};

struct ObjectInfo {
  std::uint32_t id = 0;
  std::uint64_t first_triangle = 0;
  std::uint64_t triangle_count = 0;
  Aabb roi;

  friend bool operator==(const ObjectInfo& a, const ObjectInfo& b) {
    return a.id == b.id && a.first_triangle == b.first_triangle &&
           a.triangle_count == b.triangle_count && a.roi.min == b.roi.min && a.roi.max == b.roi.max;
  }
};

struct FrameResult {
  std::vector<Mask> silhouettes;
  hull::VoxelGrid coarse;
  hull::Labeling labeling;  // after noise filtering
  std::vector<hull::Roi> rois;
  std::vector<hull::VoxelGrid> dense;
  mesh::TriangleMesh mesh;
  std::vector<ObjectInfo> objects;
  visibility::VisibilityResult visibility;
  StageTimings timings;
  FrameStats stats;
};

// Raw inputs for one frame, per camera in rig order.
struct FrameInputs {
  std::vector<ColorImage> frames;
  std::vector<Mask> proposals;
  std::vector<silhouette::BackgroundModel> backgrounds;
};

// Silhouettes for every camera from frames, background models and proposals.
std::vector<Mask> extract_silhouettes(const PipelineConfig& cfg, const calib::CameraRig& rig,
                                      const FrameInputs& inputs);

// Sparse carve through visibility on given silhouettes.
FrameResult reconstruct(const PipelineConfig& cfg, const calib::CameraRig& rig,
                        std::vector<Mask> silhouettes);

// Full frame: silhouette extraction, then reconstruct. Stage errors are
// rethrown as Error with a "[stage] " prefix.
FrameResult run_frame(const PipelineConfig& cfg, const calib::CameraRig& rig,
                      const FrameInputs& inputs);

// On-disk package consumed by the renderer and the viewer.
struct SceneBundle {
  static constexpr int kVersion = 1;

  int frame_id = 0;
  PipelineConfig config;
  calib::CameraRig rig;
  mesh::TriangleMesh mesh;
  std::vector<ObjectInfo> objects;
  std::vector<ColorImage> textures;  // per camera, rig order
  visibility::VisibilityMap visibility;
  StageTimings timings;
  FrameStats stats;
};

SceneBundle make_bundle(const PipelineConfig& cfg, const calib::CameraRig& rig,
                        std::span<const ColorImage> frames, const FrameResult& result,
                        int frame_id = 0);

// Writes manifest.json, rig.json, mesh.ply, texture_cam<id>.png,
// visibility_cam<id>.bin and timings.json. Everything except timings.json is
// a pure function of the inputs.
void write_bundle(const std::filesystem::path& dir, const SceneBundle& bundle,
                  std::span<const visibility::DepthImage> depths = {});
SceneBundle read_bundle(const std::filesystem::path& dir);

enum class SweepAxis { coarse_spacing, fine_spacing };

struct SweepRow {
  double value = 0;
  StageTimings timings;  // per-stage minimum over repeats
  FrameStats stats;
};

// run_frame (on silhouettes) once per value, keeping the fastest of
// `repeats` runs per stage. Values must be ascending.
std::vector<SweepRow> sweep(const PipelineConfig& cfg, SweepAxis axis, std::span<const double> values,
                            const calib::CameraRig& rig, std::span<const Mask> silhouettes,
                            int repeats = 1);
std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows);

}  // namespace fvv::pipeline
