#include "fvv/mesh.hpp"

#include "mc_tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace fvv::mesh {

void TriangleMesh::append(const TriangleMesh& other) {
  const auto base = static_cast<std::uint32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& t : other.triangles) triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  object_ids.insert(object_ids.end(), other.object_ids.begin(), other.object_ids.end());
}

PolygonizeStats& PolygonizeStats::operator+=(const PolygonizeStats& o) {
  crossing_edges += o.crossing_edges;
  fallback_edges += o.fallback_edges;
  inconsistent_edges += o.inconsistent_edges;
  degenerate_dropped += o.degenerate_dropped;
  return *this;
}

std::optional<CameraIsovalue> edge_isovalue_cam(const calib::CameraModel& cam, const Mask& sil,
                                                const Vec3& p_on, const Vec3& p_off) {
  const auto a = calib::project(cam, p_on);
  const auto b = calib::project(cam, p_off);
  if (!a.in_frustum || !b.in_frustum) return std::nullopt;

  int x = calib::pixel_index(a.pixel.x()), y = calib::pixel_index(a.pixel.y());
  const int x1 = calib::pixel_index(b.pixel.x()), y1 = calib::pixel_index(b.pixel.y());
  if (!sil.at(x, y)) return CameraIsovalue{0.0, true};

  const int dx = std::abs(x1 - x), sx = x < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y), sy = y < y1 ? 1 : -1;
  int err = dx + dy;
  int last_x = x, last_y = y;
  bool hit_background = false;
  while (x != x1 || y != y1) {
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
    if (!sil.at(x, y)) {
      hit_background = true;
      break;
    }
    last_x = x;
    last_y = y;
  }
  if (!hit_background) return CameraIsovalue{1.0, false};

  const double len = (b.pixel - a.pixel).norm();
  if (len <= 0.0) return CameraIsovalue{1.0, false};
  const double lambda = (Vec2(last_x, last_y) - a.pixel).norm() / len;
  return CameraIsovalue{std::clamp(lambda, 0.0, 1.0), false};
}

EdgeIntersection edge_isovalue(const calib::CameraRig& rig, std::span<const Mask> silhouettes,
                               const Vec3& p_on, const Vec3& p_off) {
  EdgeIntersection out;
  out.p_on = p_on;
  out.p_off = p_off;
  out.lambda = kFallbackLambda;
  bool any = false;
  for (std::size_t c = 0; c < rig.size(); ++c) {
    const auto iso = edge_isovalue_cam(rig[c], silhouettes[c], p_on, p_off);
    if (!iso) continue;
    out.inconsistent = out.inconsistent || iso->inconsistent;
    const int id = rig[c].id;
    if (!any || iso->lambda < out.lambda ||
        (iso->lambda == out.lambda && id < *out.contributing_camera)) {
      out.lambda = iso->lambda;
      out.contributing_camera = id;
    }
    any = true;
  }
  return out;
}

std::vector<CrossingEdge> crossing_edges(const hull::VoxelGrid& grid) {
  const auto& spec = grid.spec();
  const auto [nx, ny, nz] = spec.dims;
  std::vector<std::vector<CrossingEdge>> per_slab(static_cast<std::size_t>(nz));
  parallel_for(0, static_cast<std::size_t>(nz), 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      auto& out = per_slab[k];
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const std::size_t v = spec.linear(i, j, static_cast<int>(k));
          const bool s = grid.get(v);
          const std::array<bool, 3> inside{i + 1 < nx, j + 1 < ny, static_cast<int>(k) + 1 < nz};
          const std::array<std::size_t, 3> step{1, static_cast<std::size_t>(nx),
                                                static_cast<std::size_t>(nx) * ny};
          for (int a = 0; a < 3; ++a) {
            if (!inside[a]) continue;
            const std::size_t u = v + step[a];
            if (grid.get(u) == s) continue;
            out.push_back({3 * static_cast<std::uint64_t>(v) + a, s ? v : u, s ? u : v});
          }
        }
    }
  });
  std::vector<CrossingEdge> edges;
  for (auto& s : per_slab) edges.insert(edges.end(), s.begin(), s.end());
  return edges;
}

namespace {

constexpr std::array<hull::Index3, 8> kCorner = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};
constexpr std::array<std::array<int, 2>, 12> kEdgeCorners = {{
    {0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6}, {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

}  // namespace

TriangleMesh polygonize(const hull::VoxelGrid& grid, const calib::CameraRig& rig,
                        std::span<const Mask> silhouettes, const IsovalueMode& mode,
                        std::uint32_t object_id, PolygonizeStats* stats) {
  TriangleMesh mesh;
  const auto& spec = grid.spec();
  const auto [nx, ny, nz] = spec.dims;
  if (nx < 2 || ny < 2 || nz < 2) return mesh;
  if (mode.kind == IsovalueMode::Kind::exact && silhouettes.size() != rig.size())
    throw Error("polygonize: silhouette count does not match rig");
  if (mode.kind == IsovalueMode::Kind::fixed && !(mode.lambda0 >= 0 && mode.lambda0 <= 1))
    throw Error("polygonize: fixed isovalue must lie in [0, 1]");

  const auto edges = crossing_edges(grid);
  mesh.vertices.resize(edges.size());
  std::vector<std::uint8_t> fallback(edges.size(), 0), inconsistent(edges.size(), 0);
  parallel_for(0, edges.size(), 256, [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) {
      const auto on = spec.unlinear(edges[n].on_voxel);
      const auto off = spec.unlinear(edges[n].off_voxel);
      const Vec3 p_on = spec.center(on[0], on[1], on[2]);
      const Vec3 p_off = spec.center(off[0], off[1], off[2]);
      double lambda = mode.lambda0;
      if (mode.kind == IsovalueMode::Kind::exact) {
        const auto hit = edge_isovalue(rig, silhouettes, p_on, p_off);
        lambda = hit.lambda;
        fallback[n] = !hit.contributing_camera.has_value();
        inconsistent[n] = hit.inconsistent;
      }
      mesh.vertices[n] = p_on + lambda * (p_off - p_on);
    }
  });

  auto vertex_of = [&](std::uint64_t edge_id) {
    const auto it = std::lower_bound(edges.begin(), edges.end(), edge_id,
                                     [](const CrossingEdge& e, std::uint64_t id) { return e.id < id; });
    return static_cast<std::uint32_t>(it - edges.begin());
  };

  std::vector<std::vector<std::array<std::uint32_t, 3>>> per_slab(static_cast<std::size_t>(nz - 1));
  std::vector<std::uint64_t> dropped(static_cast<std::size_t>(nz - 1), 0);
  parallel_for(0, static_cast<std::size_t>(nz - 1), 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
          unsigned cube = 0;
          for (int c = 0; c < 8; ++c)
            if (grid.get(i + kCorner[c][0], j + kCorner[c][1], static_cast<int>(k) + kCorner[c][2]))
              cube |= 1u << c;
          if (detail::kEdgeTable[cube] == 0) continue;
          const auto& tris = detail::kTriTable[cube];
          for (int t = 0; tris[t] != -1; t += 3) {
            std::array<std::uint32_t, 3> tri{};
            for (int m = 0; m < 3; ++m) {
              const auto [c0, c1] = kEdgeCorners[tris[t + m]];
              const auto& lo = kCorner[c0];
              int axis = 0;
              while (kCorner[c1][axis] == lo[axis]) ++axis;
              const std::size_t v =
                  spec.linear(i + lo[0], j + lo[1], static_cast<int>(k) + lo[2]);
              tri[m] = vertex_of(3 * static_cast<std::uint64_t>(v) + axis);
            }
            // Table winding faces the OFF side for ON-as-inside; swap to
            // point outward.
            std::swap(tri[1], tri[2]);
            const Vec3 n = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                               .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
            if (0.5 * n.norm() < kMinTriangleArea) {
              ++dropped[k];
              continue;
            }
            per_slab[k].push_back(tri);
          }
        }
    }
  });

  for (const auto& s : per_slab) mesh.triangles.insert(mesh.triangles.end(), s.begin(), s.end());
  mesh.object_ids.assign(mesh.triangles.size(), object_id);

  if (stats) {
    PolygonizeStats s;
    s.crossing_edges = edges.size();
    for (std::size_t n = 0; n < edges.size(); ++n) {
      s.fallback_edges += fallback[n];
      s.inconsistent_edges += inconsistent[n];
    }
    for (auto d : dropped) s.degenerate_dropped += d;
    *stats += s;
  }
  return mesh;
}

}  // namespace fvv::mesh
