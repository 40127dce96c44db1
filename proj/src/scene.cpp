#include "nlarm/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nlarm/llm_backend.hpp"

namespace nlarm::scene {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& field) {
  if (!obj.is_object()) throw SceneError(field, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SceneError(field + "." + key, "missing field");
  return *it;
}

double finite_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw SceneError(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw SceneError(field, "not finite");
  return x;
}

se3::Vec3 vec3(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 3) throw SceneError(field, "expected [x, y, z]");
  se3::Vec3 out;
  for (int i = 0; i < 3; ++i) out[i] = finite_number(v[i], field + "[" + std::to_string(i) + "]");
  return out;
}

se3::Mat3 mat3(const json& v, const std::string& field) {
  se3::Mat3 R;
  if (v.is_array() && v.size() == 9) {
    for (int i = 0; i < 9; ++i) R(i / 3, i % 3) = finite_number(v[i], field + "[" + std::to_string(i) + "]");
    return R;
  }
  if (!v.is_array() || v.size() != 3) throw SceneError(field, "expected 3 rows of 3 or 9 numbers");
  for (int r = 0; r < 3; ++r) {
    const std::string row = field + "[" + std::to_string(r) + "]";
    if (!v[r].is_array() || v[r].size() != 3) throw SceneError(row, "expected 3 numbers");
    for (int c = 0; c < 3; ++c) R(r, c) = finite_number(v[r][c], row + "[" + std::to_string(c) + "]");
  }
  return R;
}

}  // namespace

Scene load_scene(const json& doc) {
  if (!doc.is_object()) throw SceneError("scene", "expected an object");
  Scene scene;

  const json& objects = require(doc, "objects", "scene");
  if (!objects.is_array()) throw SceneError("objects", "expected an array");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string field = "objects[" + std::to_string(i) + "]";
    const json& o = objects[i];
    SceneObject obj;
    const json& id = require(o, "id", field);
    if (!id.is_string() || id.get<std::string>().empty()) throw SceneError(field + ".id", "expected a non-empty string");
    obj.id = id.get<std::string>();

    const json& color = require(o, "color", field);
    auto c = color.is_string() ? intent::parse_color(color.get<std::string>()) : std::nullopt;
    if (!c) throw SceneError(field + ".color", "unknown color " + color.dump());
    obj.color = *c;

    obj.size_m = finite_number(require(o, "size_m", field), field + ".size_m");
    if (obj.size_m <= 0) throw SceneError(field + ".size_m", "must be positive");
    obj.position_cam = vec3(require(o, "position_cam", field), field + ".position_cam");

    for (const auto& prev : scene.objects) {
      if (prev.id == obj.id) throw SceneError(field + ".id", "duplicate id '" + obj.id + "'");
    }
    scene.objects.push_back(std::move(obj));
  }

  const json& ext = require(doc, "extrinsics", "scene");
  const se3::Mat3 R = mat3(require(ext, "rotation", "extrinsics"), "extrinsics.rotation");
  const se3::Vec3 t = vec3(require(ext, "translation", "extrinsics"), "extrinsics.translation");
  if (!se3::is_rotation(R, 1e-6)) throw SceneError("extrinsics.rotation", "not a rotation matrix");
  // Re-orthonormalize so hand-typed decimals pass the strict transform check.
  Eigen::JacobiSVD<se3::Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  scene.extrinsics.base_from_camera = se3::Transform(svd.matrixU() * svd.matrixV().transpose(), t);

  if (auto it = doc.find("noise_sigma_m"); it != doc.end() && !it->is_null()) {
    scene.extrinsics.noise_sigma_m = finite_number(*it, "noise_sigma_m");
    if (scene.extrinsics.noise_sigma_m < 0) throw SceneError("noise_sigma_m", "must be non-negative");
  }
  if (auto it = doc.find("camera"); it != doc.end()) scene.camera = *it;
  return scene;
}

Scene load_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("scene", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SceneError("scene", path.string() + ": " + e.what());
  }
  return load_scene(doc);
}

json to_json(const Scene& scene) {
  json objects = json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"id", o.id},
                       {"color", intent::to_string(o.color)},
                       {"size_m", o.size_m},
                       {"position_cam", {o.position_cam.x(), o.position_cam.y(), o.position_cam.z()}}});
  }
  const auto& T = scene.extrinsics.base_from_camera;
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({T.rotation()(r, 0), T.rotation()(r, 1), T.rotation()(r, 2)});
  json out = {{"objects", objects},
              {"extrinsics", {{"rotation", rows}, {"translation", {T.position().x(), T.position().y(), T.position().z()}}}},
              {"noise_sigma_m", scene.extrinsics.noise_sigma_m}};
  if (!scene.camera.is_null()) out["camera"] = scene.camera;
  return out;
}

std::filesystem::path demo_scene_path() { return intent::data_dir() / "demo_scene.json"; }

se3::Vec3 camera_to_base(const se3::Vec3& p_cam, const CameraExtrinsics& ext, std::mt19937_64* rng) {
  se3::Vec3 p = ext.base_from_camera.apply(p_cam);
  if (rng && ext.noise_sigma_m > 0) {
    std::normal_distribution<double> noise(0.0, ext.noise_sigma_m);
    for (int i = 0; i < 3; ++i) p[i] += noise(*rng);
  }
  return p;
}

se3::Vec3 base_to_camera(const se3::Vec3& p_base, const CameraExtrinsics& ext) {
  const auto& T = ext.base_from_camera;
  return T.rotation().transpose() * (p_base - T.position());
}

std::vector<Detection> detect(const Scene& scene, std::optional<Color> color_filter, const CameraExtrinsics& ext,
                              std::uint64_t seed) {
  std::vector<const SceneObject*> picked;
  for (const auto& o : scene.objects) {
    if (!color_filter || o.color == *color_filter) picked.push_back(&o);
  }
  std::sort(picked.begin(), picked.end(), [](auto* a, auto* b) { return a->id < b->id; });

  std::mt19937_64 rng(seed);
  std::vector<Detection> out;
  out.reserve(picked.size());
  for (const auto* o : picked) out.push_back({o->id, o->color, camera_to_base(o->position_cam, ext, &rng), o->size_m});
  return out;
}

std::optional<Detection> nearest(const std::vector<Detection>& detections) {
  if (detections.empty()) return std::nullopt;
  auto radius = [](const Detection& d) { return d.position_base.head<2>().norm(); };
  return *std::min_element(detections.begin(), detections.end(),
                           [&](const Detection& a, const Detection& b) { return radius(a) < radius(b); });
}

}  // namespace nlarm::scene
