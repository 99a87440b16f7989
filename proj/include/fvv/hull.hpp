#pragma once

#include "fvv/calib.hpp"
#include "fvv/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace fvv::hull {

using Index3 = std::array<int, 3>;

inline constexpr std::uint64_t kDefaultVoxelBudget = 600'000'000;

// Regular lattice of voxel centers. Voxel (i, j, k) occupies
// [origin + spacing * (i, j, k), origin + spacing * (i+1, j+1, k+1)].
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  double spacing = 1.0;
  Index3 dims{0, 0, 0};

  std::uint64_t voxel_count() const {
    return static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t linear(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) +
                                                static_cast<std::size_t>(dims[1]) * k);
  }
  Index3 unlinear(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims[0]), ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
            static_cast<int>(idx / (nx * ny))};
  }
  Vec3 center(int i, int j, int k) const {
    return origin + spacing * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  Aabb bounds() const {
    return {origin, origin + spacing * Vec3(dims[0], dims[1], dims[2])};
  }

  // Smallest grid anchored at box.min whose extent covers the box.
  static GridSpec covering(const Aabb& box, double spacing);

  void validate(std::uint64_t budget = kDefaultVoxelBudget) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// One occupancy bit per voxel, linear index i + nx * (j + ny * k).
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return static_cast<std::size_t>(spec_.voxel_count()); }

  bool get(std::size_t idx) const { return (words_[idx >> 6] >> (idx & 63)) & 1u; }
  bool get(int i, int j, int k) const { return get(spec_.linear(i, j, k)); }
  void set(std::size_t idx, bool on) {
    const std::uint64_t bit = std::uint64_t{1} << (idx & 63);
    if (on) words_[idx >> 6] |= bit; else words_[idx >> 6] &= ~bit;
  }
  void set(int i, int j, int k, bool on) { set(spec_.linear(i, j, k), on); }

  std::size_t count() const;
  std::span<const std::uint64_t> words() const { return words_; }
  std::span<std::uint64_t> words() { return words_; }

  // Calls fn(linear_index) for every ON voxel in ascending order.
  template <typename Fn>
  void for_each_on(Fn&& fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        const int b = __builtin_ctzll(bits);
        fn((w << 6) + static_cast<std::size_t>(b));
        bits &= bits - 1;
      }
    }
  }

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  GridSpec spec_;
  std::vector<std::uint64_t> words_;
};

struct CarveStats {
  std::uint64_t voxels_tested = 0;
  std::uint64_t voxels_occupied = 0;
};

// Voxel ON iff its center is in frustum for at least min_views cameras and
// projects to a foreground pixel in every camera that sees it.
VoxelGrid carve(const calib::CameraRig& rig, std::span<const Mask> silhouettes,
                const GridSpec& spec, int min_views, CarveStats* stats = nullptr);

struct Component {
  std::uint32_t id = 0;
  std::uint64_t voxel_count = 0;
  Index3 bbox_min{0, 0, 0};
  Index3 bbox_max{0, 0, 0};  // inclusive

  friend bool operator==(const Component&, const Component&) = default;
};

// 26-connected components. labels[v] == 0 for OFF voxels; ids are 1..n in
// ascending order of each component's smallest linear voxel index.
struct Labeling {
  Index3 dims{0, 0, 0};
  std::vector<std::uint32_t> labels;
  std::vector<Component> components;

  friend bool operator==(const Labeling&, const Labeling&) = default;
};

// Block-parallel labeling: union-find inside each block independently, then
// a serial merge across block faces, edges and corners.
Labeling label_components(const VoxelGrid& grid, const Index3& block_dims);

struct NoiseFilterParams {
  std::uint64_t t_small = 0;
  std::uint64_t t_large = std::numeric_limits<std::uint64_t>::max();

  void validate() const;
};

// Keeps components with t_small <= voxel_count <= t_large. Removed voxels are
// cleared in `grid` when given. Survivors keep their ids.
Labeling filter_noise(const Labeling& labeling, const NoiseFilterParams& params,
                      VoxelGrid* grid = nullptr);

struct Roi {
  Aabb box;
  std::uint32_t component = 0;

  friend bool operator==(const Roi& a, const Roi& b) {
    return a.component == b.component && a.box.min == b.box.min && a.box.max == b.box.max;
  }
};

// One ROI per component: full voxel extent expanded by margin, clamped to
// the grid bounds.
std::vector<Roi> extract_rois(const Labeling& labeling, const GridSpec& spec, double margin);

// Fine grid for one ROI. Its lattice is anchored at stage.min so voxels of
// different ROIs (and of a full-stage grid at the same spacing) coincide.
GridSpec roi_grid(const Roi& roi, const Aabb& stage, double fine_spacing);

std::vector<VoxelGrid> dense_carve(const calib::CameraRig& rig, std::span<const Mask> silhouettes,
                                   std::span<const Roi> rois, const Aabb& stage,
                                   double fine_spacing, int min_views,
                                   std::uint64_t budget = kDefaultVoxelBudget,
                                   CarveStats* stats = nullptr);

// Run-length encoded grid dump (see docs/formats.md).
void write_grid(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_grid(const std::filesystem::path& path);

}  // namespace fvv::hull
