#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nlarm/arm_model.hpp"
#include "nlarm/ik.hpp"
#include "nlarm/intent.hpp"
#include "nlarm/scene.hpp"

namespace nlarm::exec {

using intent::Color;
using intent::Direction;

enum class Gripper { open, closed };
std::string_view to_string(Gripper g);

/// Cube tracked in the base frame while the arm runs.
struct WorldObject {
  std::string id;
  Color color = Color::red;
  double size_m = 0.03;
  se3::Vec3 position_base = se3::Vec3::Zero();  // cube center

  bool operator==(const WorldObject&) const = default;
};

std::vector<WorldObject> world_from_detections(const std::vector<scene::Detection>& detections);

struct ArmState {
  arm::JointVector q = arm::JointVector::Zero();
  Gripper gripper = Gripper::open;
  std::optional<std::string> held_object;
  double t = 0.0;  // s since start
  std::vector<WorldObject> objects;
  se3::Vec3 held_offset = se3::Vec3::Zero();  // held cube center in the end-effector frame

  bool operator==(const ArmState&) const = default;
  const WorldObject* find(const std::string& id) const;
};

struct ExecutorConfig {
  double joint_speed = 1.0;  // rad/s, fastest joint
  double rate_hz = 20.0;
  double gripper_time_s = 0.2;
  double attach_radius = 0.02;
  double approach_height = 0.05;
  double grasp_depth = 0.01;  // below the top face
  double lift_height = 0.08;
  double grasp_pitch = 1.5707963267948966;
  double default_magnitude = intent::kDefaultMagnitude;
  std::map<Direction, se3::Vec3> directions = default_directions();
  arm::JointVector home_q = arm::JointVector::Zero();
  arm::JointVector sleep_q = arm::JointVector(0.0, -1.88, 1.5, 0.8);
  se3::Vec3 drop_position = se3::Vec3(0.0, 0.16, 0.04);  // end-effector point for release

  /// forward=+x, backward=-x, left=+y, right=-y, up=+z, down=-z.
  static std::map<Direction, se3::Vec3> default_directions();
  void validate() const;
};

ExecutorConfig executor_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExecutorConfig& cfg);

struct MoveTo {
  arm::JointVector q;
};
struct SetGripper {
  Gripper state;
};
struct Dwell {
  double seconds;
};

struct PlanStep {
  std::variant<MoveTo, SetGripper, Dwell> action;
  std::string label;
};

struct MotionPlan {
  std::vector<PlanStep> steps;
  bool empty() const { return steps.empty(); }
};

nlohmann::json to_json(const MotionPlan& plan);

enum class PlanningErrorKind { precondition, unreachable, joint_limits };

class PlanningError : public std::runtime_error {
 public:
  PlanningError(PlanningErrorKind kind, const std::string& what, std::vector<int> joints = {})
      : std::runtime_error(what), kind_(kind), joints_(std::move(joints)) {}
  PlanningErrorKind kind() const { return kind_; }
  /// 1-based joint numbers outside their limits (joint_limits only).
  const std::vector<int>& joints() const { return joints_; }

 private:
  PlanningErrorKind kind_;
  std::vector<int> joints_;
};

/// Converged, in-limit joint solution for a pose. Seeds are tried in order:
/// `q_hint`, then yaw-aligned variants of it and a few canned elbow-up
/// postures. Throws PlanningError naming the target when no seed converges,
/// or listing the offending joints when every converged solution is outside
/// the limits.
arm::JointVector solve_pose(const arm::ArmModel& model, const se3::Transform& target, const arm::JointVector& q_hint,
                            const ik::IKParams& params);

/// One move_to that displaces the end-effector by magnitude along the mapped
/// direction, keeping the current pitch.
MotionPlan plan_move(const ArmState& state, Direction direction, double magnitude_m, const arm::ArmModel& model,
                     const ik::IKParams& params, const ExecutorConfig& cfg);

/// open, approach above the top face, descend to the grasp point, close, lift.
MotionPlan plan_pick(const ArmState& state, const scene::Detection& target, const arm::ArmModel& model,
                     const ik::IKParams& params, const ExecutorConfig& cfg);

/// approach above the drop pose, descend, open, retreat.
MotionPlan plan_place(const ArmState& state, const arm::ArmModel& model, const ik::IKParams& params,
                      const ExecutorConfig& cfg);

MotionPlan plan_joint_pose(const arm::JointVector& q, const std::string& label, const arm::ArmModel& model);

/// Grasp point of a cube: top-center lowered by grasp_depth.
se3::Vec3 grasp_point(const WorldObject& obj, const ExecutorConfig& cfg);

using StateSink = std::function<void(const ArmState&)>;
using StopFlag = std::function<bool()>;

/// Runs the plan kinematically and reports a state per tick at cfg.rate_hz.
/// Joint moves are linear in joint space with the fastest joint at
/// cfg.joint_speed. Closing the gripper attaches the nearest cube whose grasp
/// point lies within cfg.attach_radius of the end-effector; opening drops the
/// held cube onto the table. An empty plan reports the unchanged state once.
/// When `stop` returns true the run ends after the current tick.
/// Returns the final state.
ArmState execute(const MotionPlan& plan, ArmState state, const arm::ArmModel& model, const ExecutorConfig& cfg,
                 const StateSink& sink, const StopFlag& stop = {});

std::vector<ArmState> execute_collect(const MotionPlan& plan, const ArmState& state, const arm::ArmModel& model,
                                      const ExecutorConfig& cfg);

/// Pitch of the end-effector x-axis below the horizontal, in (-π, π].
double ee_pitch(const se3::Transform& t);

/// {t, q, ee_position, ee_pitch, gripper, held_object, scene:[{id,color,position_base}]}
nlohmann::json state_to_json(const ArmState& state, const arm::ArmModel& model);

}  // namespace nlarm::exec
