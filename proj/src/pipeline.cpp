#include "fvv/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

namespace fvv::pipeline {

const std::array<const char*, 6>& StageTimings::labels() {
  static const std::array<const char*, 6> kLabels = {
      "(B-1) Sparse visual hull",        "(B-2) Noise filtering & 3D ROI extraction",
      "(B-3) Dense visual hull",         "(C) Polygonization",
      "(D-1) Computation of depth image", "(D-2) Visibility detection"};
  return kLabels;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename Fn>
auto tagged(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(std::string("[") + stage + "] " + e.what());
  }
}

}  // namespace

std::vector<Mask> extract_silhouettes(const PipelineConfig& cfg, const calib::CameraRig& rig,
                                      const FrameInputs& inputs) {
  const std::size_t n = rig.size();
  if (inputs.frames.size() != n || inputs.proposals.size() != n || inputs.backgrounds.size() != n)
    throw Error("inputs do not match the rig's " + std::to_string(n) + " cameras");
  std::vector<Mask> sils;
  sils.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    const auto& frame = inputs.frames[c];
    if (!frame.same_size(rig[c].width, rig[c].height))
      throw Error("frame size mismatch for camera " + std::to_string(rig[c].id));
    const auto dm = silhouette::distance_map(inputs.proposals[c]);
    sils.push_back(silhouette::extract_silhouette(frame, inputs.backgrounds[c], dm, cfg.adaptive));
  }
  return sils;
}

FrameResult reconstruct(const PipelineConfig& cfg, const calib::CameraRig& rig,
                        std::vector<Mask> silhouettes) {
  tagged("config", [&] { cfg.validate(); return 0; });
  FrameResult out;
  out.silhouettes = std::move(silhouettes);
  const std::span<const Mask> sils(out.silhouettes);

  // Sparse carve
  auto t0 = Clock::now();
  const hull::GridSpec coarse_spec = hull::GridSpec::covering(cfg.stage, cfg.coarse_spacing);
  out.coarse = tagged("sparse carve", [&] {
    coarse_spec.validate(cfg.voxel_budget);
    hull::CarveStats st;
    auto g = hull::carve(rig, sils, coarse_spec, cfg.min_views, &st);
    out.stats.sparse_tested = st.voxels_tested;
    out.stats.sparse_occupied = st.voxels_occupied;
    return g;
  });
  out.timings.sparse_carve = ms_since(t0);

  // Labeling, noise filter, ROIs
  t0 = Clock::now();
  tagged("noise filter", [&] {
    const auto raw = hull::label_components(out.coarse, cfg.ccl_block);
    out.stats.components_found = raw.components.size();
    out.labeling = hull::filter_noise(raw, cfg.noise, &out.coarse);
    out.stats.components_kept = out.labeling.components.size();
    out.rois = hull::extract_rois(out.labeling, coarse_spec, cfg.effective_margin());
    return 0;
  });
  out.timings.noise_filter_roi = ms_since(t0);

  // Dense carve per ROI
  t0 = Clock::now();
  out.dense = tagged("dense carve", [&] {
    hull::CarveStats st;
    auto grids = hull::dense_carve(rig, sils, out.rois, coarse_spec.bounds(), cfg.fine_spacing,
                                   cfg.min_views, cfg.voxel_budget, &st);
    out.stats.dense_tested = st.voxels_tested;
    out.stats.dense_occupied = st.voxels_occupied;
    return grids;
  });
  out.timings.dense_carve = ms_since(t0);

  // Polygonization
  t0 = Clock::now();
  tagged("polygonize", [&] {
    for (std::size_t r = 0; r < out.dense.size(); ++r) {
      const auto part = mesh::polygonize(out.dense[r], rig, sils, cfg.isovalue,
                                         out.rois[r].component, &out.stats.polygonize);
      ObjectInfo info;
      info.id = out.rois[r].component;
      info.first_triangle = out.mesh.triangles.size();
      info.triangle_count = part.triangles.size();
      info.roi = out.rois[r].box;
      out.objects.push_back(info);
      out.mesh.append(part);
    }
    return 0;
  });
  out.timings.polygonization = ms_since(t0);
  out.stats.triangles = out.mesh.triangles.size();

  // Depth images and visibility
  out.visibility = tagged("visibility", [&] {
    return visibility::compute_visibility(out.mesh, rig, cfg.effective_t_v());
  });
  out.timings.depth_images = out.visibility.depth_ms;
  out.timings.visibility = out.visibility.classify_ms;
  return out;
}

FrameResult run_frame(const PipelineConfig& cfg, const calib::CameraRig& rig,
                      const FrameInputs& inputs) {
  auto sils = tagged("silhouette", [&] { return extract_silhouettes(cfg, rig, inputs); });
  return reconstruct(cfg, rig, std::move(sils));
}

SceneBundle make_bundle(const PipelineConfig& cfg, const calib::CameraRig& rig,
                        std::span<const ColorImage> frames, const FrameResult& result, int frame_id) {
  SceneBundle b;
  b.frame_id = frame_id;
  b.config = cfg;
  b.rig = rig;
  b.mesh = result.mesh;
  b.objects = result.objects;
  b.textures.assign(frames.begin(), frames.end());
  b.visibility = result.visibility.map;
  b.timings = result.timings;
  b.stats = result.stats;
  return b;
}

std::vector<SweepRow> sweep(const PipelineConfig& cfg, SweepAxis axis, std::span<const double> values,
                            const calib::CameraRig& rig, std::span<const Mask> silhouettes,
                            int repeats) {
  if (!std::is_sorted(values.begin(), values.end())) throw Error("sweep: values must be ascending");
  std::vector<SweepRow> rows;
  for (double v : values) {
    PipelineConfig run_cfg = cfg;
    (axis == SweepAxis::coarse_spacing ? run_cfg.coarse_spacing : run_cfg.fine_spacing) = v;
    SweepRow row;
    row.value = v;
    for (int r = 0; r < std::max(1, repeats); ++r) {
      const auto res = reconstruct(run_cfg, rig, std::vector<Mask>(silhouettes.begin(), silhouettes.end()));
      const auto a = res.timings.values();
      if (r == 0) {
        row.timings = res.timings;
        row.stats = res.stats;
        continue;
      }
      const auto b = row.timings.values();
      row.timings = StageTimings{std::min(a[0], b[0]), std::min(a[1], b[1]), std::min(a[2], b[2]),
                                 std::min(a[3], b[3]), std::min(a[4], b[4]), std::min(a[5], b[5])};
    }
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << (axis == SweepAxis::coarse_spacing ? "coarse_spacing_mm" : "fine_spacing_mm")
      << ",sparse_carve_ms,noise_filter_roi_ms,dense_carve_ms,polygonization_ms,depth_images_ms,"
         "visibility_ms,total_ms,sparse_tested,sparse_occupied,dense_tested,dense_occupied,triangles\n";
  for (const auto& r : rows) {
    out << r.value;
    for (double t : r.timings.values()) out << ',' << t;
    out << ',' << r.timings.total() << ',' << r.stats.sparse_tested << ',' << r.stats.sparse_occupied
        << ',' << r.stats.dense_tested << ',' << r.stats.dense_occupied << ',' << r.stats.triangles << '\n';
  }
  return out.str();
}

}  // namespace fvv::pipeline
