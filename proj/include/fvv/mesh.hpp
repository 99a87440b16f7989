#pragma once

#include "fvv/calib.hpp"
#include "fvv/hull.hpp"
#include "fvv/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace fvv::mesh {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<std::uint32_t> object_ids;  // one per triangle

  std::size_t triangle_count() const { return triangles.size(); }
  bool empty() const { return triangles.empty(); }
  Vec3 centroid(std::size_t t) const {
    const auto& tri = triangles[t];
    return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
  }
  // Unnormalized, orientation given by winding.
  Vec3 normal(std::size_t t) const {
    const auto& tri = triangles[t];
    return (vertices[tri[1]] - vertices[tri[0]]).cross(vertices[tri[2]] - vertices[tri[0]]);
  }

  // Appends other's vertices and triangles, re-indexing.
  void append(const TriangleMesh& other);

  friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

inline constexpr double kMinTriangleArea = 1e-9;  // mm^2

struct CameraIsovalue {
  double lambda = 0;
  // ON endpoint projected onto background: carve and edge sampling disagree.
  bool inconsistent = false;
};

// Walks the Bresenham line from the ON endpoint's pixel toward the OFF
// endpoint's pixel. lambda = |P_i - proj(P_on)| / |proj(P_off) - proj(P_on)|
// in pixels, P_i the last foreground pixel before the first background one;
// 1 when the whole line is foreground. nullopt when either endpoint is out
// of this camera's frustum.
std::optional<CameraIsovalue> edge_isovalue_cam(const calib::CameraModel& cam, const Mask& sil,
                                                const Vec3& p_on, const Vec3& p_off);

struct EdgeIntersection {
  Vec3 p_on = Vec3::Zero();
  Vec3 p_off = Vec3::Zero();
  double lambda = 0.5;
  std::optional<int> contributing_camera;  // camera id
  bool inconsistent = false;               // some camera flagged the ON end

  Vec3 point() const { return p_on + lambda * (p_off - p_on); }
};

inline constexpr double kFallbackLambda = 0.5;

// Minimum of edge_isovalue_cam over cameras that see both endpoints; ties go
// to the lowest camera id. kFallbackLambda when no camera qualifies.
EdgeIntersection edge_isovalue(const calib::CameraRig& rig, std::span<const Mask> silhouettes,
                               const Vec3& p_on, const Vec3& p_off);

struct IsovalueMode {
  enum class Kind { exact, fixed };
  Kind kind = Kind::exact;
  double lambda0 = 0.5;

  static IsovalueMode exact() { return {}; }
  static IsovalueMode fixed(double lambda0) { return {Kind::fixed, lambda0}; }
};

// Grid edge joining two neighboring voxel centers with different states.
// id = 3 * (linear index of the lower voxel) + axis.
struct CrossingEdge {
  std::uint64_t id = 0;
  std::size_t on_voxel = 0;
  std::size_t off_voxel = 0;
};

// All sign-changing edges, ascending by id.
std::vector<CrossingEdge> crossing_edges(const hull::VoxelGrid& grid);

struct PolygonizeStats {
  std::uint64_t crossing_edges = 0;
  std::uint64_t fallback_edges = 0;
  std::uint64_t inconsistent_edges = 0;
  std::uint64_t degenerate_dropped = 0;

  PolygonizeStats& operator+=(const PolygonizeStats& o);
};

// Marching cubes over the grid's cells (corners = voxel centers, ON = inside).
// Vertices sit at lambda along each crossing edge, measured from the ON end;
// each edge yields exactly one shared vertex. Triangles wind outward
// (normal from ON toward OFF). Cells exist only between voxels, so ON voxels
// on the grid boundary leave the surface open there.
TriangleMesh polygonize(const hull::VoxelGrid& grid, const calib::CameraRig& rig,
                        std::span<const Mask> silhouettes, const IsovalueMode& mode,
                        std::uint32_t object_id = 0, PolygonizeStats* stats = nullptr);

// Binary little-endian PLY with double vertices and an int object_id per face.
void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_ply(const std::filesystem::path& path);
// Wavefront OBJ; one group per object id.
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace fvv::mesh
