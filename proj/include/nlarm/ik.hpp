#pragma once

#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "nlarm/arm_model.hpp"
#include "nlarm/se3.hpp"

namespace nlarm::ik {

struct IKParams {
  double eps_omega = 1e-3;  // rad
  double eps_v = 1e-4;      // m
  int max_iter = 100;
  double sv_cutoff = 1e-6;  // relative to the largest singular value
  double step_scale = 1.0;

  /// Throws std::invalid_argument unless every field is positive.
  void validate() const;
};

struct IKResult {
  arm::JointVector q = arm::JointVector::Zero();
  bool converged = false;
  int iterations = 0;
  se3::Twist final_error;  // body twist V_b at the returned q
};

/// Raised when an iterate stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Moore-Penrose pseudoinverse through the SVD. Singular values below
/// sv_cutoff * σ_max are treated as zero.
Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& j, double sv_cutoff);

/// Wraps an angle to (-π, π].
double wrap_angle(double a);

/// Newton-Raphson in the body frame:
///   V_b = log(T_sb(q_i)⁻¹ T_sd),  q_{i+1} = q_i + step_scale · J_b†(q_i) V_b
/// until ‖ω_b‖ ≤ eps_omega and ‖v_b‖ ≤ eps_v, or max_iter updates. Joint
/// limits are not applied here.
IKResult ik_newton_raphson(const arm::ArmModel& model, const se3::Transform& t_sd,
                           const arm::JointVector& q0, const IKParams& params = {});

/// Pose with yaw = atan2(y, x), zero roll and the given pitch about the
/// rotated y-axis, the orientation family the 4-DOF chain can reach at a
/// forward-facing position. Throws std::invalid_argument on the z-axis.
se3::Transform reachable_target(const se3::Vec3& position, double pitch);

struct TaskPose {
  se3::Vec3 position;
  double pitch;
};

/// Inverse of reachable_target. Returns nullopt when the rotation is not
/// Rz(atan2(y, x)) Ry(pitch) for some pitch (e.g. the arm reaches backwards
/// over the base, or the position is on the z-axis).
std::optional<TaskPose> task_pose(const se3::Transform& t, double tol = 1e-9);

}  // namespace nlarm::ik
