#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nlarm/se3.hpp"

namespace nlarm::arm {

using JointVector = Eigen::Vector4d;
using Jacobian = Eigen::Matrix<double, 6, 4>;

inline constexpr int kJoints = 4;

/// PincherX-100 link lengths in meters (home-position figure).
struct ArmGeometry {
  double L1 = 0.08945;
  double L2 = 0.1;
  double Lm = 0.035;
  double L3 = 0.1;
  double L4 = 0.08605;
};

struct JointLimit {
  double lo;
  double hi;
};

using JointLimits = std::array<JointLimit, kJoints>;

/// Vendor-style ranges; the gripper is not a kinematic joint.
JointLimits default_joint_limits();

class ArmModel {
 public:
  ArmModel(const ArmGeometry& geometry, const std::array<se3::Twist, kJoints>& screws,
           const se3::Transform& home, const JointLimits& limits);

  const ArmGeometry& geometry() const { return geometry_; }
  const std::array<se3::Twist, kJoints>& screws() const { return screws_; }
  const se3::Transform& home() const { return home_; }
  const JointLimits& joint_limits() const { return limits_; }

  bool within_limits(const JointVector& q, double slack = 0.0) const;
  /// Zero-based indices of joints outside their limits.
  std::vector<int> limit_violations(const JointVector& q, double slack = 0.0) const;
  JointVector clamp(const JointVector& q) const;

 private:
  ArmGeometry geometry_;
  std::array<se3::Twist, kJoints> screws_;
  se3::Transform home_;
  JointLimits limits_;
};

/// Screw axes S_i = (ω_i, -ω_i × p_i) with the base yaw joint about z and the
/// three pitch joints about y; home pose at (Lm + L3 + L4, 0, L1 + L2).
/// Throws std::invalid_argument for non-positive lengths or inverted limits.
ArmModel build_px100(const ArmGeometry& geometry = {},
                     const JointLimits& limits = default_joint_limits());

/// {lengths:{L1,L2,Lm,L3,L4}, joint_limits:[[lo,hi] x 4]}; both keys optional.
ArmModel model_from_json(const nlohmann::json& doc);
ArmModel load_model(const std::filesystem::path& path);
nlohmann::json model_to_json(const ArmModel& model);

/// T_sb(q) = e^[S1]q1 ... e^[S4]q4 M.
se3::Transform fk_space(const ArmModel& model, const JointVector& q);

/// Column i is Ad(e^[S1]q1 ... e^[S(i-1)]q(i-1)) S_i.
Jacobian space_jacobian(const ArmModel& model, const JointVector& q);

/// J_b = Ad(T_sb⁻¹) J_s.
Jacobian body_jacobian(const ArmModel& model, const JointVector& q);

}  // namespace nlarm::arm
