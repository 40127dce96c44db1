#include "nlarm/ik.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace nlarm::ik {

using se3::Mat3;
using se3::Transform;
using se3::Vec3;

void IKParams::validate() const {
  if (!(eps_omega > 0.0 && eps_v > 0.0 && sv_cutoff > 0.0 && step_scale > 0.0) || max_iter < 1) {
    throw std::invalid_argument("IKParams: thresholds and step must be positive, max_iter >= 1");
  }
}

Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& j, double sv_cutoff) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  const double sigma_max = sigma.size() > 0 ? sigma.maxCoeff() : 0.0;

  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma_max > 0.0 && sigma[i] >= sv_cutoff * sigma_max) inv[i] = 1.0 / sigma[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r <= 0.0) r += two_pi;
  return r - std::numbers::pi;
}

namespace {

se3::Twist body_error(const arm::ArmModel& model, const arm::JointVector& q, const Transform& t_sd) {
  return se3::log(arm::fk_space(model, q).inverse() * t_sd);
}

bool within(const se3::Twist& e, const IKParams& p) {
  return e.omega.norm() <= p.eps_omega && e.v.norm() <= p.eps_v;
}

}  // namespace

IKResult ik_newton_raphson(const arm::ArmModel& model, const Transform& t_sd,
                           const arm::JointVector& q0, const IKParams& params) {
  params.validate();
  if (!t_sd.is_valid()) throw std::invalid_argument("ik: target transform is not in SE(3)");

  IKResult result;
  result.q = q0;
  se3::Twist v_b = body_error(model, result.q, t_sd);
  int i = 0;
  while (!within(v_b, params) && i < params.max_iter) {
    const Eigen::MatrixXd j_pinv = pseudoinverse(arm::body_jacobian(model, result.q), params.sv_cutoff);
    const arm::JointVector step = params.step_scale * (j_pinv * v_b.vector());
    arm::JointVector next = result.q + step;
    if (!next.allFinite()) {
      throw DivergenceError(i, "ik: non-finite joint update at iteration " + std::to_string(i));
    }
    for (int k = 0; k < arm::kJoints; ++k) next[k] = wrap_angle(next[k]);
    result.q = next;
    ++i;
    v_b = body_error(model, result.q, t_sd);
    if (!v_b.vector().allFinite()) {
      throw DivergenceError(i, "ik: non-finite error twist at iteration " + std::to_string(i));
    }
  }
  result.iterations = i;
  result.final_error = v_b;
  result.converged = within(v_b, params);
  return result;
}

namespace {

Mat3 yaw_pitch(double yaw, double pitch) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY())).toRotationMatrix();
}

constexpr double kOnAxis = 1e-9;

}  // namespace

Transform reachable_target(const Vec3& position, double pitch) {
  if (std::hypot(position.x(), position.y()) < kOnAxis) {
    throw std::invalid_argument("reachable_target: position lies on the base z-axis, yaw is undefined");
  }
  const double yaw = std::atan2(position.y(), position.x());
  return Transform::unchecked(yaw_pitch(yaw, pitch), position);
}

std::optional<TaskPose> task_pose(const Transform& t, double tol) {
  const Vec3& p = t.position();
  if (std::hypot(p.x(), p.y()) < kOnAxis) return std::nullopt;
  const double yaw = std::atan2(p.y(), p.x());
  const Mat3 local = Eigen::AngleAxisd(-yaw, Vec3::UnitZ()).toRotationMatrix() * t.rotation();
  const double pitch = std::atan2(local(0, 2), local(0, 0));
  if ((yaw_pitch(yaw, pitch) - t.rotation()).cwiseAbs().maxCoeff() > tol) return std::nullopt;
  return TaskPose{p, pitch};
}

}  // namespace nlarm::ik
