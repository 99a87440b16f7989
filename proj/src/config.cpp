#include "fvv/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace fvv::pipeline {

using nlohmann::json;

void PipelineConfig::validate() const {
  if (!stage.valid()) throw Error("config: stage volume must be nonempty");
  if (!(coarse_spacing > 0) || !(fine_spacing > 0)) throw Error("config: spacings must be positive");
  if (fine_spacing > coarse_spacing) throw Error("config: fine_spacing must not exceed coarse_spacing");
  if (min_views < 0) throw Error("config: min_views must be nonnegative");
  noise.validate();
  if (isovalue.kind == mesh::IsovalueMode::Kind::fixed && !(isovalue.lambda0 >= 0 && isovalue.lambda0 <= 1))
    throw Error("config: fixed isovalue must lie in [0, 1]");
  adaptive.validate();
  for (int b : ccl_block)
    if (b < 1) throw Error("config: ccl block dims must be >= 1");
}

bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
  return format_config(a) == format_config(b);
}

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("config: expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string format_config(const PipelineConfig& cfg) {
  json j;
  j["stage"] = {{"min", vec(cfg.stage.min)}, {"max", vec(cfg.stage.max)}};
  j["coarse_spacing"] = cfg.coarse_spacing;
  j["fine_spacing"] = cfg.fine_spacing;
  j["min_views"] = cfg.min_views;
  j["t_small"] = cfg.noise.t_small;
  j["t_large"] = cfg.noise.t_large;
  j["roi_margin"] = cfg.roi_margin;
  j["t_v"] = cfg.t_v;
  j["isovalue"] = cfg.isovalue.kind == mesh::IsovalueMode::Kind::exact ? json("exact") : json(cfg.isovalue.lambda0);
  j["theta_near"] = cfg.adaptive.theta_near;
  j["theta_far"] = cfg.adaptive.theta_far;
  j["d_max"] = cfg.adaptive.d_max;
  j["ccl_block"] = cfg.ccl_block;
  j["voxel_budget"] = cfg.voxel_budget;
  j["export_depth"] = cfg.export_depth;
  return j.dump(2);
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  try {
    const json j = json::parse(text);
    if (j.contains("stage")) {
      cfg.stage.min = vec(j["stage"].at("min"));
      cfg.stage.max = vec(j["stage"].at("max"));
    }
    cfg.coarse_spacing = j.value("coarse_spacing", cfg.coarse_spacing);
    cfg.fine_spacing = j.value("fine_spacing", cfg.fine_spacing);
    cfg.min_views = j.value("min_views", cfg.min_views);
    cfg.noise.t_small = j.value("t_small", cfg.noise.t_small);
    cfg.noise.t_large = j.value("t_large", cfg.noise.t_large);
    cfg.roi_margin = j.value("roi_margin", cfg.roi_margin);
    cfg.t_v = j.value("t_v", cfg.t_v);
    if (j.contains("isovalue")) {
      const auto& iso = j["isovalue"];
      if (iso.is_string()) {
        if (iso.get<std::string>() != "exact") throw Error("config: isovalue must be \"exact\" or a number");
        cfg.isovalue = mesh::IsovalueMode::exact();
      } else {
        cfg.isovalue = mesh::IsovalueMode::fixed(iso.get<double>());
      }
    }
    cfg.adaptive.theta_near = j.value("theta_near", cfg.adaptive.theta_near);
    cfg.adaptive.theta_far = j.value("theta_far", cfg.adaptive.theta_far);
    cfg.adaptive.d_max = j.value("d_max", cfg.adaptive.d_max);
    if (j.contains("ccl_block")) cfg.ccl_block = j["ccl_block"].get<hull::Index3>();
    cfg.voxel_budget = j.value("voxel_budget", cfg.voxel_budget);
    cfg.export_depth = j.value("export_depth", cfg.export_depth);
  } catch (const json::exception& e) {
    throw Error(std::string("config parse error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace fvv::pipeline
