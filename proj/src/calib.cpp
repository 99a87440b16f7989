#include "fvv/calib.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace fvv::calib {

using nlohmann::json;

bool CameraModel::has_distortion() const {
  for (double d : dist)
    if (d != 0.0) return true;
  return false;
}

void CameraModel::validate() const {
  auto fail = [this](const std::string& what) {
    throw Error("camera " + std::to_string(id) + ": " + what);
  };
  if (width <= 0 || height <= 0) fail("image size must be positive");
  if (!(fx > 0) || !(fy > 0)) fail("focal lengths must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(skew)) fail("non-finite intrinsics");
  for (double d : dist)
    if (!std::isfinite(d)) fail("non-finite distortion coefficient");
  if (!rotation.allFinite() || !translation.allFinite()) fail("non-finite extrinsics");
  const double ortho_err = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-6) fail("rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-6) fail("rotation determinant is not +1");
  if (!center().allFinite()) fail("camera center is not finite");
}

// Newton on distort(n) = d with backtracking. Plain fixed-point iteration
// diverges near the corners of strongly distorted lenses.
Vec2 undistort(const CameraModel& cam, const Vec2& d, int iterations) {
  const auto& [k1, k2, p1, p2, k3] = cam.dist;
  Vec2 n = d;
  Vec2 res = distort(cam, n) - d;
  for (int it = 0; it < iterations && res.squaredNorm() > 1e-30; ++it) {
    const double x = n.x(), y = n.y();
    const double r2 = x * x + y * y;
    const double g = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    const double gp = k1 + r2 * (2.0 * k2 + 3.0 * r2 * k3);  // dg/d(r2)
    Eigen::Matrix2d j;
    j(0, 0) = g + 2.0 * x * x * gp + 2.0 * p1 * y + 6.0 * p2 * x;
    j(0, 1) = 2.0 * x * y * gp + 2.0 * p1 * x + 2.0 * p2 * y;
    j(1, 0) = j(0, 1);
    j(1, 1) = g + 2.0 * y * y * gp + 6.0 * p1 * y + 2.0 * p2 * x;
    const Vec2 step = j.fullPivLu().solve(res);
    double t = 1.0;
    for (int b = 0; b < 30; ++b, t *= 0.5) {
      const Vec2 cand = n - t * step;
      const Vec2 r = distort(cam, cand) - d;
      if (r.squaredNorm() < res.squaredNorm()) {
        n = cand;
        res = r;
        break;
      }
    }
    if (t < 1e-9) break;
  }
  return n;
}

Vec2 pixel_to_normalized(const CameraModel& cam, const Vec2& px) {
  const double y = (px.y() - cam.cy) / cam.fy;
  const double x = (px.x() - cam.cx) / cam.fx - cam.skew * y;
  return {x, y};
}

Vec3 backproject(const CameraModel& cam, const Vec2& pixel, double depth) {
  const Vec2 n = pixel_to_normalized(cam, pixel);
  const Vec3 pc(n.x() * depth, n.y() * depth, depth);
  return cam.rotation.transpose() * (pc - cam.translation);
}

Vec3 ray_direction(const CameraModel& cam, const Vec2& pixel) {
  Vec2 n = pixel_to_normalized(cam, pixel);
  if (cam.has_distortion()) n = undistort(cam, n);
  return (cam.rotation.transpose() * Vec3(n.x(), n.y(), 1.0)).normalized();
}

void look_at(CameraModel& cam, const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
}

void CameraRig::validate() const {
  if (cameras.empty()) throw Error("rig has no cameras");
  std::set<int> ids;
  for (const auto& cam : cameras) {
    cam.validate();
    if (!ids.insert(cam.id).second) throw Error("camera " + std::to_string(cam.id) + ": duplicated id");
  }
}

namespace {

template <std::size_t N>
std::array<double, N> read_array(const json& j, const char* key, int cam_id) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != N)
    throw Error("camera " + std::to_string(cam_id) + ": '" + key + "' must have " +
                std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i].get<double>();
  return out;
}

}  // namespace

CameraRig parse_rig(const std::string& text) {
  CameraRig rig;
  try {
    const json doc = json::parse(text);
    if (doc.value("version", 1) != 1) throw Error("unsupported rig manifest version");
    for (const auto& jc : doc.at("cameras")) {
      CameraModel cam;
      cam.id = jc.at("id").get<int>();
      const auto size = read_array<2>(jc, "image_size", cam.id);
      cam.width = static_cast<int>(size[0]);
      cam.height = static_cast<int>(size[1]);
      cam.fx = jc.at("fx").get<double>();
      cam.fy = jc.at("fy").get<double>();
      cam.cx = jc.at("cx").get<double>();
      cam.cy = jc.at("cy").get<double>();
      cam.skew = jc.value("skew", 0.0);
      cam.dist = jc.contains("dist") ? read_array<5>(jc, "dist", cam.id) : std::array<double, 5>{};
      const auto r = read_array<9>(jc, "rotation", cam.id);
      for (int i = 0; i < 9; ++i) cam.rotation(i / 3, i % 3) = r[i];
      const auto t = read_array<3>(jc, "translation", cam.id);
      cam.translation = Vec3(t[0], t[1], t[2]);
      rig.cameras.push_back(cam);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("rig manifest parse error: ") + e.what());
  }
  rig.validate();
  return rig;
}

CameraRig load_rig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rig manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rig(ss.str());
}

std::string format_rig(const CameraRig& rig) {
  json doc;
  doc["version"] = 1;
  doc["units"] = "mm";
  json cams = json::array();
  for (const auto& cam : rig.cameras) {
    json jc;
    jc["id"] = cam.id;
    jc["image_size"] = {cam.width, cam.height};
    jc["fx"] = cam.fx;
    jc["fy"] = cam.fy;
    jc["cx"] = cam.cx;
    jc["cy"] = cam.cy;
    jc["skew"] = cam.skew;
    jc["dist"] = cam.dist;
    std::vector<double> r(9);
    for (int i = 0; i < 9; ++i) r[i] = cam.rotation(i / 3, i % 3);
    jc["rotation"] = r;
    jc["translation"] = {cam.translation.x(), cam.translation.y(), cam.translation.z()};
    cams.push_back(jc);
  }
  doc["cameras"] = cams;
  return doc.dump(2) + "\n";
}

void save_rig(const std::filesystem::path& path, const CameraRig& rig) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write rig manifest: " + path.string());
  out << format_rig(rig);
}

}  // namespace fvv::calib
