#include "fvv/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace fvv::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string texture_name(int id) { return "texture_cam" + std::to_string(id) + ".png"; }
std::string visibility_name(int id) { return "visibility_cam" + std::to_string(id) + ".bin"; }
std::string depth_name(int id) { return "depth_cam" + std::to_string(id) + ".png"; }

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json stats_json(const FrameStats& s) {
  return {{"sparse_tested", s.sparse_tested},
          {"sparse_occupied", s.sparse_occupied},
          {"components_found", s.components_found},
          {"components_kept", s.components_kept},
          {"dense_tested", s.dense_tested},
          {"dense_occupied", s.dense_occupied},
          {"crossing_edges", s.polygonize.crossing_edges},
          {"fallback_edges", s.polygonize.fallback_edges},
          {"inconsistent_edges", s.polygonize.inconsistent_edges},
          {"degenerate_dropped", s.polygonize.degenerate_dropped},
          {"triangles", s.triangles}};
}

FrameStats stats_from(const json& j) {
  FrameStats s;
  s.sparse_tested = j.at("sparse_tested");
  s.sparse_occupied = j.at("sparse_occupied");
  s.components_found = j.at("components_found");
  s.components_kept = j.at("components_kept");
  s.dense_tested = j.at("dense_tested");
  s.dense_occupied = j.at("dense_occupied");
  s.polygonize.crossing_edges = j.at("crossing_edges");
  s.polygonize.fallback_edges = j.at("fallback_edges");
  s.polygonize.inconsistent_edges = j.at("inconsistent_edges");
  s.polygonize.degenerate_dropped = j.at("degenerate_dropped");
  s.triangles = j.at("triangles");
  return s;
}

}  // namespace

void write_bundle(const fs::path& dir, const SceneBundle& b, std::span<const visibility::DepthImage> depths) {
  const std::size_t n = b.rig.size();
  if (b.textures.size() != n) throw Error("bundle: texture count does not match rig");
  if (b.visibility.visible.size() != n) throw Error("bundle: visibility does not match rig");
  if (!depths.empty() && depths.size() != n) throw Error("bundle: depth count does not match rig");
  fs::create_directories(dir);

  json m;
  m["schema"] = "fvv-scene-bundle";
  m["version"] = SceneBundle::kVersion;
  m["frame_id"] = b.frame_id;
  m["units"] = "mm";
  m["rig"] = "rig.json";
  m["mesh"] = "mesh.ply";
  m["timings"] = "timings.json";
  m["stage"] = {{"min", vec(b.config.stage.min)}, {"max", vec(b.config.stage.max)}};
  m["triangle_count"] = b.mesh.triangles.size();
  m["vertex_count"] = b.mesh.vertices.size();

  json objects = json::array();
  for (const auto& o : b.objects)
    objects.push_back({{"id", o.id},
                       {"first_triangle", o.first_triangle},
                       {"triangle_count", o.triangle_count},
                       {"roi", {{"min", vec(o.roi.min)}, {"max", vec(o.roi.max)}}}});
  m["objects"] = objects;

  json cams = json::array();
  for (std::size_t c = 0; c < n; ++c) {
    const int id = b.rig[c].id;
    if (b.visibility.visible[c].size() != b.mesh.triangles.size())
      throw Error("bundle: visibility of camera " + std::to_string(id) + " does not cover the mesh");
    json cam{{"id", id}, {"texture", texture_name(id)}, {"visibility", visibility_name(id)}};
    if (!depths.empty()) cam["depth"] = depth_name(id);
    cams.push_back(cam);

    write_image(dir / texture_name(id), b.textures[c]);
    const auto& vis = b.visibility.visible[c];
    std::ofstream out(dir / visibility_name(id), std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / visibility_name(id)).string());
    out.write(reinterpret_cast<const char*>(vis.data()), static_cast<std::streamsize>(vis.size()));
    if (!depths.empty()) write_image16(dir / depth_name(id), visibility::depth_preview(depths[c]));
  }
  m["cameras"] = cams;
  m["stats"] = stats_json(b.stats);
  m["config"] = json::parse(format_config(b.config));

  write_text(dir / "manifest.json", m.dump(2) + "\n");
  calib::save_rig(dir / "rig.json", b.rig);
  mesh::write_ply(dir / "mesh.ply", b.mesh);

  json t;
  const auto vals = b.timings.values();
  const auto& labels = StageTimings::labels();
  static const std::array<const char*, 6> keys = {"sparse_carve", "noise_filter_roi", "dense_carve",
                                                  "polygonization", "depth_images", "visibility"};
  json stages = json::array();
  for (std::size_t i = 0; i < vals.size(); ++i)
    stages.push_back({{"key", keys[i]}, {"label", labels[i]}, {"ms", vals[i]}});
  t["stages"] = stages;
  t["total_ms"] = b.timings.total();
  write_text(dir / "timings.json", t.dump(2) + "\n");
}

SceneBundle read_bundle(const fs::path& dir) {
  SceneBundle b;
  try {
    const json m = json::parse(read_text(dir / "manifest.json"));
    if (m.value("schema", "") != "fvv-scene-bundle") throw Error("bundle: not a scene bundle manifest");
    if (m.at("version").get<int>() != SceneBundle::kVersion)
      throw Error("bundle: unsupported version " + m.at("version").dump());
    b.frame_id = m.at("frame_id");
    b.config = parse_config(m.at("config").dump());
    b.rig = calib::load_rig(dir / m.at("rig").get<std::string>());
    b.mesh = mesh::read_ply(dir / m.at("mesh").get<std::string>());
    for (const auto& o : m.at("objects")) {
      ObjectInfo info;
      info.id = o.at("id");
      info.first_triangle = o.at("first_triangle");
      info.triangle_count = o.at("triangle_count");
      info.roi.min = vec(o.at("roi").at("min"));
      info.roi.max = vec(o.at("roi").at("max"));
      b.objects.push_back(info);
    }
    const auto& cams = m.at("cameras");
    if (cams.size() != b.rig.size()) throw Error("bundle: camera list does not match rig");
    for (std::size_t c = 0; c < cams.size(); ++c) {
      const int id = cams[c].at("id");
      if (id != b.rig[c].id) throw Error("bundle: camera order does not match rig");
      b.textures.push_back(read_image(dir / cams[c].at("texture").get<std::string>()));
      const std::string bytes = read_text(dir / cams[c].at("visibility").get<std::string>());
      if (bytes.size() != b.mesh.triangles.size())
        throw Error("bundle: visibility of camera " + std::to_string(id) + " has wrong length");
      b.visibility.camera_ids.push_back(id);
      b.visibility.visible.emplace_back(bytes.begin(), bytes.end());
    }
    b.stats = stats_from(m.at("stats"));

    const fs::path tpath = dir / m.value("timings", "timings.json");
    if (fs::exists(tpath)) {
      const json t = json::parse(read_text(tpath));
      std::array<double, 6> v{};
      const auto& stages = t.at("stages");
      for (std::size_t i = 0; i < v.size() && i < stages.size(); ++i) v[i] = stages[i].at("ms");
      b.timings = StageTimings{v[0], v[1], v[2], v[3], v[4], v[5]};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("bundle " + dir.string() + ": " + e.what());
  }
  return b;
}

}  // namespace fvv::pipeline
