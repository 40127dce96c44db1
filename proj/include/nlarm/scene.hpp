#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlarm/intent.hpp"
#include "nlarm/se3.hpp"

namespace nlarm::scene {

using intent::Color;

struct SceneObject {
  std::string id;
  Color color = Color::red;
  double size_m = 0.03;    // cube edge
  se3::Vec3 position_cam;  // cube center, camera frame
};

struct CameraExtrinsics {
  se3::Transform base_from_camera;  // camera frame expressed in the base frame
  double noise_sigma_m = 0.0;
};

struct Scene {
  std::vector<SceneObject> objects;
  CameraExtrinsics extrinsics;
  nlohmann::json camera;  // sensor metadata, carried but not used in any math
};

/// Field-level schema failure, e.g. "objects[1].color: unknown color 'purple'".
class SceneError : public std::invalid_argument {
 public:
  SceneError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// {objects:[{id,color,size_m,position_cam:[x,y,z]}],
///  extrinsics:{rotation:3x3 row-major (nested or flat), translation:[x,y,z]},
///  noise_sigma_m}
Scene load_scene(const nlohmann::json& doc);
Scene load_scene_file(const std::filesystem::path& path);
nlohmann::json to_json(const Scene& scene);

std::filesystem::path demo_scene_path();

/// p_base = R p_cam + t, plus zero-mean Gaussian noise per axis when
/// noise_sigma_m > 0 and a generator is supplied.
se3::Vec3 camera_to_base(const se3::Vec3& p_cam, const CameraExtrinsics& ext, std::mt19937_64* rng = nullptr);
se3::Vec3 base_to_camera(const se3::Vec3& p_base, const CameraExtrinsics& ext);

struct Detection {
  std::string object_id;
  Color color = Color::red;
  se3::Vec3 position_base;
  double size_m = 0.0;
};

/// Objects matching the filter (all when empty), converted to the base frame
/// and ordered by id. Noise, if configured, is drawn from a generator seeded
/// with `seed`, so equal seeds give equal detections.
std::vector<Detection> detect(const Scene& scene, std::optional<Color> color_filter, const CameraExtrinsics& ext,
                              std::uint64_t seed = 0);

/// Detection with the smallest horizontal distance from the base axis.
std::optional<Detection> nearest(const std::vector<Detection>& detections);

}  // namespace nlarm::scene
