#include "fvv/hull.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_map>

namespace fvv::hull {

GridSpec GridSpec::covering(const Aabb& box, double spacing) {
  GridSpec spec;
  spec.origin = box.min;
  spec.spacing = spacing;
  for (int a = 0; a < 3; ++a)
    spec.dims[a] = std::max(1, static_cast<int>(std::ceil(box.extent()[a] / spacing - 1e-9)));
  return spec;
}

void GridSpec::validate(std::uint64_t budget) const {
  if (!(spacing > 0) || !std::isfinite(spacing)) throw Error("grid: spacing must be positive");
  if (!origin.allFinite()) throw Error("grid: origin must be finite");
  for (int d : dims)
    if (d <= 0) throw Error("grid: dims must be positive");
  if (voxel_count() > budget)
    throw Error("grid: " + std::to_string(voxel_count()) + " voxels exceed budget of " +
                std::to_string(budget));
}

VoxelGrid::VoxelGrid(const GridSpec& spec)
    : spec_(spec), words_((static_cast<std::size_t>(spec.voxel_count()) + 63) / 64, 0) {}

std::size_t VoxelGrid::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(__builtin_popcountll(w));
  return n;
}

namespace {

void check_silhouettes(const calib::CameraRig& rig, std::span<const Mask> sils) {
  if (sils.size() != rig.size())
    throw Error("carve: " + std::to_string(sils.size()) + " silhouettes for " +
                std::to_string(rig.size()) + " cameras");
  for (std::size_t c = 0; c < rig.size(); ++c)
    if (sils[c].width != rig[c].width || sils[c].height != rig[c].height)
      throw Error("carve: silhouette size mismatch for camera " + std::to_string(rig[c].id));
}

// 3x3 dilation (grow = true) or erosion of a 0/1 mask, as two separable
// passes. Pixels outside the image count as background.
Mask morph3(const Mask& m, bool grow) {
  const int w = m.width, h = m.height;
  Mask tmp(w, h), out(w, h);
  if (w == 0 || h == 0) return out;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* s = m.bits.data() + static_cast<std::size_t>(y) * w;
    std::uint8_t* d = tmp.bits.data() + static_cast<std::size_t>(y) * w;
    if (grow) {
      for (int x = 1; x + 1 < w; ++x) d[x] = s[x - 1] | s[x] | s[x + 1];
      d[0] = s[0] | (w > 1 ? s[1] : 0);
      if (w > 1) d[w - 1] = s[w - 2] | s[w - 1];
    } else {
      for (int x = 1; x + 1 < w; ++x) d[x] = s[x - 1] & s[x] & s[x + 1];
      d[0] = 0;
      d[w - 1] = 0;
    }
  }
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* mid = tmp.bits.data() + static_cast<std::size_t>(y) * w;
    std::uint8_t* d = out.bits.data() + static_cast<std::size_t>(y) * w;
    const bool has_up = y > 0, has_down = y + 1 < h;
    if (grow) {
      for (int x = 0; x < w; ++x) d[x] = mid[x];
      if (has_up)
        for (int x = 0; x < w; ++x) d[x] |= mid[x - w];
      if (has_down)
        for (int x = 0; x < w; ++x) d[x] |= mid[x + w];
    } else if (has_up && has_down) {
      for (int x = 0; x < w; ++x) d[x] = mid[x - w] & mid[x] & mid[x + w];
    }
  }
  return out;
}

// Approximate projections are within ~1e-9 px of calib::project; these
// margins keep every fast-path decision far from that error.
constexpr double kEdgeMargin = 1e-3;
constexpr double kDepthMargin = 1e-6;

enum class Quick : std::uint8_t { background = 0, unsure = 1, foreground = 2, out = 3 };

// Per-camera data for the carve's fast path. `cls` classifies each pixel by
// its 3x3 neighbourhood: all background or all foreground keeps that value
// under any sub-pixel perturbation of the projection, anything else is unsure.
struct FastCamera {
  bool linear = false;  // no distortion: camera coords are affine along a row
  double fx = 0, fy = 0, cx = 0, cy = 0, skew = 0;
  double in_u0 = 0, in_u1 = 0, in_v0 = 0, in_v1 = 0;     // certainly inside
  double out_u0 = 0, out_u1 = 0, out_v0 = 0, out_v1 = 0;  // certainly outside beyond
  int width = 0;
  std::vector<std::uint8_t> cls;

  Quick test(double x, double y, double z) const {
    if (z < -kDepthMargin) return Quick::out;
    if (z < kDepthMargin) return Quick::unsure;
    const double inv = 1.0 / z;
    const double xn = x * inv, yn = y * inv;
    const double u = fx * (xn + skew * yn) + cx, v = fy * yn + cy;
    if (u < out_u0 || u >= out_u1 || v < out_v0 || v >= out_v1) return Quick::out;
    if (u < in_u0 || u >= in_u1 || v < in_v0 || v >= in_v1) return Quick::unsure;
    // u + 0.5 > 0 here, so truncation is floor.
    const auto px = static_cast<std::size_t>(u + 0.5), py = static_cast<std::size_t>(v + 0.5);
    return static_cast<Quick>(cls[py * static_cast<std::size_t>(width) + px]);
  }

  // Range of i in [0, n) along camera coords r0 + i * st that test() might not
  // call out. With z > 0 each image bound is linear in i once multiplied by
  // z; the z <= kDepthMargin part of the line is kept whole. Widened by one
  // voxel so rounding in the solve never excludes a voxel.
  std::pair<int, int> candidate_span(const Vec3& r0, const Vec3& st, int n) const {
    if (!linear) return {0, n - 1};
    constexpr double inf = std::numeric_limits<double>::infinity();
    double lo = -inf, hi = inf;
    bool empty = false;
    auto keep_nonneg = [&](double a, double b) {  // a + b i >= 0
      if (b > 0) lo = std::max(lo, -a / b);
      else if (b < 0) hi = std::min(hi, -a / b);
      else if (a < 0) empty = true;
    };
    const double ax = fx * (r0.x() + skew * r0.y()), bx = fx * (st.x() + skew * st.y());
    keep_nonneg(r0.z() - kDepthMargin, st.z());
    keep_nonneg(ax + (cx - out_u0) * r0.z(), bx + (cx - out_u0) * st.z());
    keep_nonneg(-(ax + (cx - out_u1) * r0.z()), -(bx + (cx - out_u1) * st.z()));
    keep_nonneg(fy * r0.y() + (cy - out_v0) * r0.z(), fy * st.y() + (cy - out_v0) * st.z());
    keep_nonneg(-(fy * r0.y() + (cy - out_v1) * r0.z()), -(fy * st.y() + (cy - out_v1) * st.z()));
    if (empty || lo > hi) lo = inf, hi = -inf;
    // Near or behind the camera plane: z <= kDepthMargin.
    const double t = st.z() != 0 ? (kDepthMargin - r0.z()) / st.z() : 0;
    if (st.z() > 0) lo = -inf, hi = std::max(hi, t);
    else if (st.z() < 0) lo = std::min(lo, t), hi = inf;
    else if (r0.z() <= kDepthMargin) lo = -inf, hi = inf;
    if (!(lo <= hi)) return {0, -1};
    const double a = std::max(std::floor(lo) - 1, 0.0), b = std::min(std::ceil(hi) + 1, n - 1.0);
    if (a > b) return {0, -1};
    return {static_cast<int>(a), static_cast<int>(b)};
  }
};

struct CarveContext {
  const calib::CameraRig& rig;
  std::span<const Mask> silhouettes;
  std::vector<FastCamera> fast;

  CarveContext(const calib::CameraRig& r, std::span<const Mask> sils) : rig(r), silhouettes(sils) {
    check_silhouettes(rig, silhouettes);
    fast.resize(rig.size());
    for (std::size_t c = 0; c < rig.size(); ++c) {
      const auto& cam = rig[c];
      FastCamera& f = fast[c];
      f.linear = !cam.has_distortion();
      if (!f.linear) continue;
      f.fx = cam.fx, f.fy = cam.fy, f.cx = cam.cx, f.cy = cam.cy, f.skew = cam.skew;
      const double hu = cam.width - 0.5, hv = cam.height - 0.5;
      f.in_u0 = -0.5 + kEdgeMargin, f.in_u1 = hu - kEdgeMargin;
      f.in_v0 = -0.5 + kEdgeMargin, f.in_v1 = hv - kEdgeMargin;
      f.out_u0 = -0.5 - kEdgeMargin, f.out_u1 = hu + kEdgeMargin;
      f.out_v0 = -0.5 - kEdgeMargin, f.out_v1 = hv + kEdgeMargin;
      f.width = cam.width;
      const Mask near = morph3(silhouettes[c], true), deep = morph3(silhouettes[c], false);
      f.cls.resize(near.bits.size());
      for (std::size_t i = 0; i < f.cls.size(); ++i)
        f.cls[i] = static_cast<std::uint8_t>(near.bits[i] + deep.bits[i]);
    }
  }
};

VoxelGrid carve_with(const CarveContext& ctx, const GridSpec& spec, int min_views, CarveStats* stats) {
  spec.validate(std::numeric_limits<std::uint64_t>::max());
  const auto& rig = ctx.rig;
  VoxelGrid grid(spec);
  const std::size_t n = grid.size();
  const std::size_t n_cams = rig.size();

  std::vector<Vec3> step(n_cams);
  for (std::size_t c = 0; c < n_cams; ++c) step[c] = rig[c].rotation * Vec3(spec.spacing, 0, 0);

  // Chunks are whole 64-bit words so each word has a single writer.
  parallel_for(0, n, 64 * 256, [&](std::size_t b, std::size_t e) {
    Index3 ijk = spec.unlinear(b);
    const int nx = spec.dims[0];
    std::vector<Vec3> row(n_cams);  // camera coords of voxel i = 0 in the current row
    std::vector<std::pair<int, int>> span(n_cams);
    std::vector<int> candidates(static_cast<std::size_t>(nx) + 1);
    auto start_row = [&] {
      const Vec3 p0 = spec.center(0, ijk[1], ijk[2]);
      std::fill(candidates.begin(), candidates.end(), 0);
      for (std::size_t c = 0; c < n_cams; ++c) {
        row[c] = rig[c].to_camera(p0);
        span[c] = ctx.fast[c].candidate_span(row[c], step[c], nx);
        if (span[c].first > span[c].second) continue;
        ++candidates[static_cast<std::size_t>(span[c].first)];
        --candidates[static_cast<std::size_t>(span[c].second) + 1];
      }
      for (int i = 1; i <= nx; ++i) candidates[i] += candidates[i - 1];
    };
    start_row();
    // One background view rejects a voxel, so the outcome does not depend on
    // camera order. Trying last voxel's rejecting camera first usually
    // settles neighbours with a single projection.
    std::size_t first = 0;
    for (std::size_t idx = b; idx < e; ++idx) {
      int views = 0;
      bool on = candidates[static_cast<std::size_t>(ijk[0])] >= min_views;
      for (std::size_t s = 0; on && s < n_cams; ++s) {
        const std::size_t c = first + s < n_cams ? first + s : first + s - n_cams;
        if (ijk[0] < span[c].first || ijk[0] > span[c].second) {
          if (views + static_cast<int>(n_cams - s - 1) < min_views) on = false;
          continue;
        }
        bool in_frustum = false, foreground = false;
        const FastCamera& f = ctx.fast[c];
        Quick q = Quick::unsure;
        if (f.linear) {
          const double i = ijk[0];
          const Vec3& r0 = row[c];
          const Vec3& st = step[c];
          q = f.test(r0.x() + i * st.x(), r0.y() + i * st.y(), r0.z() + i * st.z());
        }
        if (q == Quick::background || q == Quick::foreground) {
          in_frustum = true;
          foreground = q == Quick::foreground;
        } else if (q == Quick::unsure) {
          const auto proj = calib::project(rig[c], spec.center(ijk[0], ijk[1], ijk[2]));
          in_frustum = proj.in_frustum;
          foreground = in_frustum && ctx.silhouettes[c].at(calib::pixel_index(proj.pixel.x()),
                                                           calib::pixel_index(proj.pixel.y()));
        }
        if (!in_frustum) {
          if (views + static_cast<int>(n_cams - s - 1) < min_views) {
            on = false;
            break;
          }
          continue;
        }
        ++views;
        if (!foreground) {
          on = false;
          first = c;
          break;
        }
      }
      if (on && views >= min_views) grid.set(idx, true);
      if (++ijk[0] == spec.dims[0]) {
        ijk[0] = 0;
        if (++ijk[1] == spec.dims[1]) {
          ijk[1] = 0;
          ++ijk[2];
        }
        if (idx + 1 < e) start_row();
      }
    }
  });

  if (stats) {
    stats->voxels_tested += n;
    stats->voxels_occupied += grid.count();
  }
  return grid;
}

}  // namespace

VoxelGrid carve(const calib::CameraRig& rig, std::span<const Mask> silhouettes,
                const GridSpec& spec, int min_views, CarveStats* stats) {
  return carve_with(CarveContext(rig, silhouettes), spec, min_views, stats);
}

namespace {

// Parent links stored as index + 1 so 0 can mean "background". Roots are
// always the smallest index of their set: union links the larger root under
// the smaller one, and path halving only ever moves links to ancestors.
struct Forest {
  std::vector<std::uint32_t>& link;

  std::uint32_t find(std::uint32_t v) {
    while (link[v] != v + 1) {
      const std::uint32_t p = link[v] - 1;
      link[v] = link[p];
      v = p;
    }
    return v;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) link[b] = a + 1; else link[a] = b + 1;
  }
};

// Backward half of the 26-neighborhood: offsets preceding (0,0,0) in linear order.
constexpr std::array<Index3, 13> kBackward = {{
    {-1, -1, -1}, {0, -1, -1}, {1, -1, -1},
    {-1, 0, -1},  {0, 0, -1},  {1, 0, -1},
    {-1, 1, -1},  {0, 1, -1},  {1, 1, -1},
    {-1, -1, 0},  {0, -1, 0},  {1, -1, 0},
    {-1, 0, 0},
}};

}  // namespace

Labeling label_components(const VoxelGrid& grid, const Index3& block_dims) {
  for (int d : block_dims)
    if (d < 1) throw Error("label_components: block dims must be >= 1");
  const GridSpec& spec = grid.spec();
  const Index3 dims = spec.dims;
  if (grid.size() >= std::numeric_limits<std::uint32_t>::max())
    throw Error("label_components: grid too large for 32-bit labels");

  Labeling out;
  out.dims = dims;
  out.labels.assign(grid.size(), 0);
  auto& link = out.labels;
  grid.for_each_on([&](std::size_t v) { link[v] = static_cast<std::uint32_t>(v + 1); });

  Index3 n_blocks;
  for (int a = 0; a < 3; ++a) n_blocks[a] = (dims[a] + block_dims[a] - 1) / block_dims[a];
  const std::size_t total_blocks =
      static_cast<std::size_t>(n_blocks[0]) * n_blocks[1] * n_blocks[2];

  // Local phase: every union touches only voxels of one block.
  parallel_for(0, total_blocks, 1, [&](std::size_t b, std::size_t e) {
    Forest forest{link};
    for (std::size_t blk = b; blk < e; ++blk) {
      const int bi = static_cast<int>(blk % n_blocks[0]);
      const int bj = static_cast<int>((blk / n_blocks[0]) % n_blocks[1]);
      const int bk = static_cast<int>(blk / (static_cast<std::size_t>(n_blocks[0]) * n_blocks[1]));
      const Index3 lo{bi * block_dims[0], bj * block_dims[1], bk * block_dims[2]};
      const Index3 hi{std::min(dims[0], lo[0] + block_dims[0]),
                      std::min(dims[1], lo[1] + block_dims[1]),
                      std::min(dims[2], lo[2] + block_dims[2])};
      for (int k = lo[2]; k < hi[2]; ++k)
        for (int j = lo[1]; j < hi[1]; ++j)
          for (int i = lo[0]; i < hi[0]; ++i) {
            const std::size_t v = spec.linear(i, j, k);
            if (!grid.get(v)) continue;
            for (const auto& o : kBackward) {
              const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
              if (ni < lo[0] || nj < lo[1] || nk < lo[2] || ni >= hi[0] || nj >= hi[1]) continue;
              const std::size_t u = spec.linear(ni, nj, nk);
              if (grid.get(u))
                forest.unite(static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(u));
            }
          }
    }
  });

  // Global phase: pairs straddling blocks. Both ends of such a pair lie on a
  // face of their block.
  {
    Forest forest{link};
    grid.for_each_on([&](std::size_t v) {
      const Index3 p = spec.unlinear(v);
      const Index3 in_block{p[0] % block_dims[0], p[1] % block_dims[1], p[2] % block_dims[2]};
      bool on_face = false;
      for (int a = 0; a < 3; ++a)
        on_face = on_face || in_block[a] == 0 || in_block[a] == block_dims[a] - 1;
      if (!on_face) return;
      const Index3 blk{p[0] / block_dims[0], p[1] / block_dims[1], p[2] / block_dims[2]};
      for (const auto& o : kBackward) {
        const int ni = p[0] + o[0], nj = p[1] + o[1], nk = p[2] + o[2];
        if (ni < 0 || nj < 0 || nk < 0 || ni >= dims[0] || nj >= dims[1]) continue;
        if (ni / block_dims[0] == blk[0] && nj / block_dims[1] == blk[1] &&
            nk / block_dims[2] == blk[2])
          continue;
        const std::size_t u = spec.linear(ni, nj, nk);
        if (grid.get(u))
          forest.unite(static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(u));
      }
    });
  }

  // Flatten in ascending order: a link always points to a smaller index, so
  // link[link[v]] is already a root by the time v is visited.
  grid.for_each_on([&](std::size_t v) {
    const std::uint32_t p = link[v] - 1;
    if (p != v) link[v] = link[p];
  });

  // Compact ids in root order (= order of smallest member index).
  std::unordered_map<std::uint32_t, std::uint32_t> id_of_root;
  grid.for_each_on([&](std::size_t v) {
    const std::uint32_t root = link[v] - 1;
    std::uint32_t id;
    if (root == v) {
      id = static_cast<std::uint32_t>(out.components.size() + 1);
      id_of_root.emplace(root, id);
      Component c;
      c.id = id;
      c.bbox_min = c.bbox_max = spec.unlinear(v);
      out.components.push_back(c);
    } else {
      id = id_of_root.at(root);
    }
    link[v] = id;
    Component& c = out.components[id - 1];
    ++c.voxel_count;
    const Index3 p = spec.unlinear(v);
    for (int a = 0; a < 3; ++a) {
      c.bbox_min[a] = std::min(c.bbox_min[a], p[a]);
      c.bbox_max[a] = std::max(c.bbox_max[a], p[a]);
    }
  });
  return out;
}

void NoiseFilterParams::validate() const {
  if (t_small > t_large) throw Error("noise filter: t_small must not exceed t_large");
}

Labeling filter_noise(const Labeling& labeling, const NoiseFilterParams& params, VoxelGrid* grid) {
  params.validate();
  if (grid && grid->spec().dims != labeling.dims)
    throw Error("filter_noise: grid does not match labeling");
  const std::uint32_t max_id = static_cast<std::uint32_t>(
      labeling.components.empty() ? 0 : labeling.components.back().id);
  std::vector<std::uint8_t> keep(max_id + 1, 0);
  Labeling out;
  out.dims = labeling.dims;
  for (const auto& c : labeling.components) {
    if (c.voxel_count >= params.t_small && c.voxel_count <= params.t_large) {
      keep[c.id] = 1;
      out.components.push_back(c);
    }
  }
  out.labels = labeling.labels;
  if (out.components.size() == labeling.components.size()) return out;
  for (std::size_t v = 0; v < out.labels.size(); ++v) {
    const std::uint32_t id = out.labels[v];
    if (id != 0 && !keep[id]) {
      out.labels[v] = 0;
      if (grid) grid->set(v, false);
    }
  }
  return out;
}

std::vector<Roi> extract_rois(const Labeling& labeling, const GridSpec& spec, double margin) {
  const Aabb stage = spec.bounds();
  std::vector<Roi> rois;
  rois.reserve(labeling.components.size());
  for (const auto& c : labeling.components) {
    Roi roi;
    roi.component = c.id;
    for (int a = 0; a < 3; ++a) {
      roi.box.min[a] = spec.origin[a] + spec.spacing * c.bbox_min[a] - margin;
      roi.box.max[a] = spec.origin[a] + spec.spacing * (c.bbox_max[a] + 1) + margin;
    }
    roi.box.min = roi.box.min.cwiseMax(stage.min);
    roi.box.max = roi.box.max.cwiseMin(stage.max);
    rois.push_back(roi);
  }
  return rois;
}

GridSpec roi_grid(const Roi& roi, const Aabb& stage, double fine_spacing) {
  if (!(fine_spacing > 0)) throw Error("roi_grid: spacing must be positive");
  GridSpec spec;
  spec.spacing = fine_spacing;
  for (int a = 0; a < 3; ++a) {
    const double lo = (roi.box.min[a] - stage.min[a]) / fine_spacing;
    const double hi = (roi.box.max[a] - stage.min[a]) / fine_spacing;
    const int first = std::max(0, static_cast<int>(std::floor(lo + 1e-9)));
    const int last = static_cast<int>(std::ceil(hi - 1e-9));
    spec.origin[a] = stage.min[a] + fine_spacing * first;
    spec.dims[a] = std::max(1, last - first);
  }
  return spec;
}

std::vector<VoxelGrid> dense_carve(const calib::CameraRig& rig, std::span<const Mask> silhouettes,
                                   std::span<const Roi> rois, const Aabb& stage,
                                   double fine_spacing, int min_views, std::uint64_t budget,
                                   CarveStats* stats) {
  std::vector<VoxelGrid> grids;
  grids.reserve(rois.size());
  if (rois.empty()) return grids;
  const CarveContext ctx(rig, silhouettes);
  for (const auto& roi : rois) {
    const GridSpec spec = roi_grid(roi, stage, fine_spacing);
    try {
      spec.validate(budget);
    } catch (const Error& e) {
      throw Error("dense_carve: roi " + std::to_string(roi.component) + ": " + e.what());
    }
    grids.push_back(carve_with(ctx, spec, min_views, stats));
  }
  return grids;
}

}  // namespace fvv::hull
