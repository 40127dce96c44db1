#pragma once

#include <Eigen/Dense>

namespace nlarm::se3 {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Numerical thresholds shared by the SE(3) routines. Tests may adjust them
/// through tolerances().
struct Tolerances {
  double orthonormality = 1e-9;  // per-entry bound on |RᵀR - I| and |det R - 1|
  double small_angle = 1e-9;     // below this the series branches are used
  double near_pi = 1e-3;         // π - θ below this uses the symmetric-part axis extraction
  double unit_norm = 1e-9;       // screw-axis normalization check
};

Tolerances& tolerances();

/// Spatial velocity / exponential coordinates, stored as (ω, v).
struct Twist {
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& w, const Vec3& lin) : omega(w), v(lin) {}

  static Twist from_vector(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }
  Vec6 vector() const {
    Vec6 x;
    x << omega, v;
    return x;
  }
  Twist operator*(double s) const { return {omega * s, v * s}; }
};

/// True when the twist is a unit screw axis: ‖ω‖ = 1, or ω = 0 and ‖v‖ = 1.
bool is_screw_axis(const Twist& s);

bool is_rotation(const Mat3& r, double tol);

/// Rigid-body transform kept as an explicit (R, p) pair.
class Transform {
 public:
  Transform() : rotation_(Mat3::Identity()), position_(Vec3::Zero()) {}

  /// Throws std::invalid_argument when `rotation` is not in SO(3).
  Transform(const Mat3& rotation, const Vec3& position);

  /// Skips the SO(3) check. Used for results of closed-form operations and by
  /// tests that need to build invalid inputs.
  static Transform unchecked(const Mat3& rotation, const Vec3& position);
  static Transform from_matrix(const Mat4& m);
  static Transform translation(const Vec3& p) { return {Mat3::Identity(), p}; }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& position() const { return position_; }

  Mat4 matrix() const;
  Transform inverse() const;
  bool is_valid() const;

  Vec3 apply(const Vec3& point) const { return rotation_ * point + position_; }
  Transform operator*(const Transform& rhs) const;

 private:
  struct NoCheck {};
  Transform(const Mat3& r, const Vec3& p, NoCheck) : rotation_(r), position_(p) {}

  Mat3 rotation_;
  Vec3 position_;
};

Mat3 skew(const Vec3& p);
Vec3 unskew(const Mat3& m);

/// exp([S]θ). Accepts a unit screw axis with an angle, or any raw twist with
/// theta = 1.
Transform exp(const Twist& axis, double theta = 1.0);

/// Matrix logarithm, returned as a twist with the angle folded in, so that
/// exp(log(T)) == T. Throws std::invalid_argument if T.rotation() is not a
/// rotation matrix.
Twist log(const Transform& t);

/// [Ad_T] = [[R, 0], [[p]R, R]].
Mat6 adjoint(const Transform& t);

}  // namespace nlarm::se3
