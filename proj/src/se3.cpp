#include "nlarm/se3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nlarm::se3 {

Tolerances& tolerances() {
  static Tolerances tol;
  return tol;
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  const Mat3 gram = r.transpose() * r;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

bool is_screw_axis(const Twist& s) {
  const double tol = tolerances().unit_norm;
  const double w = s.omega.norm();
  if (std::abs(w - 1.0) <= tol) return true;
  return w <= tol && std::abs(s.v.norm() - 1.0) <= tol;
}

Transform::Transform(const Mat3& rotation, const Vec3& position)
    : rotation_(rotation), position_(position) {
  if (!is_rotation(rotation_, tolerances().orthonormality)) {
    throw std::invalid_argument("Transform: rotation is not orthonormal with det +1");
  }
  if (!position_.allFinite()) {
    throw std::invalid_argument("Transform: position is not finite");
  }
}

Transform Transform::unchecked(const Mat3& rotation, const Vec3& position) {
  return Transform(rotation, position, NoCheck{});
}

Transform Transform::from_matrix(const Mat4& m) {
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tolerances().orthonormality) {
    throw std::invalid_argument("Transform: bottom row of homogeneous matrix must be [0 0 0 1]");
  }
  return Transform(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

Mat4 Transform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = position_;
  return m;
}

Transform Transform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return Transform(rt, -rt * position_, NoCheck{});
}

bool Transform::is_valid() const {
  return is_rotation(rotation_, tolerances().orthonormality) && position_.allFinite();
}

Transform Transform::operator*(const Transform& rhs) const {
  return Transform(rotation_ * rhs.rotation_, rotation_ * rhs.position_ + position_, NoCheck{});
}

Mat3 skew(const Vec3& p) {
  Mat3 m;
  m << 0.0, -p.z(), p.y(),
       p.z(), 0.0, -p.x(),
       -p.y(), p.x(), 0.0;
  return m;
}

Vec3 unskew(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Transform exp(const Twist& axis, double theta) {
  const Vec3 w = axis.omega * theta;
  const Vec3 v = axis.v * theta;
  const double angle = w.norm();

  if (angle < tolerances().small_angle) {
    // First-order series: R ≈ I + [w], p ≈ v + ½[w]v.
    const Mat3 wx = skew(w);
    return Transform::unchecked(Mat3::Identity() + wx, v + 0.5 * wx * v);
  }

  const Mat3 k = skew(w / angle);
  const Mat3 k2 = k * k;
  const double s = std::sin(angle);
  const double c = std::cos(angle);
  const Mat3 r = Mat3::Identity() + s * k + (1.0 - c) * k2;
  const Mat3 g = angle * Mat3::Identity() + (1.0 - c) * k + (angle - s) * k2;
  return Transform::unchecked(r, g * (v / angle));
}

Twist log(const Transform& t) {
  if (!t.is_valid()) {
    throw std::invalid_argument("se3::log: input rotation is not in SO(3)");
  }
  const Mat3& r = t.rotation();
  const Vec3& p = t.position();
  const auto& tol = tolerances();

  const Vec3 sin_axis = 0.5 * unskew(r - r.transpose());
  const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(sin_axis.norm(), cos_theta);

  if (theta < tol.small_angle) {
    // G⁻¹ ≈ I - ½[w] near the identity.
    const Vec3 w = sin_axis;
    return {w, p - 0.5 * skew(w) * p};
  }

  Vec3 axis;
  if (std::numbers::pi - theta < tol.near_pi) {
    // Antisymmetric part vanishes at π; recover ω̂ω̂ᵀ from the symmetric part.
    const Mat3 b = 0.5 * (r + r.transpose()) - cos_theta * Mat3::Identity();
    Eigen::Index k = 0;
    b.diagonal().maxCoeff(&k);
    axis = b.col(k) / std::sqrt((1.0 - cos_theta) * b(k, k));
    if (axis.dot(sin_axis) < 0.0) axis = -axis;
    axis.normalize();
  } else {
    axis = sin_axis / sin_axis.norm();
  }

  const Mat3 k = skew(axis);
  const double half = 0.5 * theta;
  const Mat3 g_inv_theta =
      Mat3::Identity() - half * k + (1.0 - half / std::tan(half)) * k * k;
  return {axis * theta, g_inv_theta * p};
}

Mat6 adjoint(const Transform& t) {
  Mat6 ad = Mat6::Zero();
  const Mat3& r = t.rotation();
  ad.topLeftCorner<3, 3>() = r;
  ad.bottomRightCorner<3, 3>() = r;
  ad.bottomLeftCorner<3, 3>() = skew(t.position()) * r;
  return ad;
}

}  // namespace nlarm::se3
