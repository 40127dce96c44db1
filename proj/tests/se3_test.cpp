#include "nlarm/se3.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "test_support.hpp"

namespace nlarm::se3 {
namespace {

using nlarm::testing::max_abs;
using nlarm::testing::random_transform;
using nlarm::testing::random_vec3;

constexpr double kPi = std::numbers::pi;

TEST(Skew, ZeroVector) { EXPECT_EQ(skew(Vec3::Zero()), Mat3::Zero()); }

TEST(Skew, UnitX) {
  Mat3 expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  EXPECT_EQ(skew(Vec3::UnitX()), expected);
}

TEST(Skew, MatchesCrossProductAndIsExactlyAntisymmetric) {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 1000; ++n) {
    const Vec3 p = random_vec3(rng, -10, 10);
    const Vec3 x = random_vec3(rng, -10, 10);
    const Mat3 s = skew(p);
    // Componentwise cross product, written out.
    const Vec3 cross(p.y() * x.z() - p.z() * x.y(), p.z() * x.x() - p.x() * x.z(),
                     p.x() * x.y() - p.y() * x.x());
    EXPECT_LT((s * x - cross).norm(), 1e-12);
    EXPECT_EQ(s, Mat3(-s.transpose()));
  }
}

TEST(Exp, ZeroTwistIsIdentity) {
  const Transform t = exp(Twist{}, 1.0);
  EXPECT_EQ(t.rotation(), Mat3::Identity());
  EXPECT_EQ(t.position(), Vec3::Zero());
}

TEST(Exp, BaseYawAxisQuarterTurn) {
  const Twist s1(Vec3::UnitZ(), Vec3::Zero());
  const Transform t = exp(s1, kPi / 2);
  Mat3 rz;
  rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT(max_abs(t.rotation() - rz), 1e-15);
  EXPECT_LT(t.position().norm(), 1e-15);
}

TEST(Exp, PureTranslationAxis) {
  const Transform t = exp(Twist(Vec3::Zero(), Vec3::UnitX()), 0.3);
  EXPECT_EQ(t.rotation(), Mat3::Identity());
  EXPECT_NEAR(t.position().x(), 0.3, 1e-15);
}

TEST(Exp, RawTwistAndUnitAxisAgree) {
  const Twist axis(Vec3(0, 1, 0), Vec3(-0.08945, 0, 0));
  const Transform a = exp(axis, 0.7);
  const Transform b = exp(axis * 0.7, 1.0);
  EXPECT_LT(max_abs(a.matrix() - b.matrix()), 1e-15);
}

TEST(Exp, OutputIsAlwaysARotation) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 1000; ++n) {
    const Twist tw(random_vec3(rng, -4, 4), random_vec3(rng, -2, 2));
    EXPECT_TRUE(is_rotation(exp(tw).rotation(), 1e-9));
  }
}

TEST(Log, Identity) {
  const Twist tw = log(Transform{});
  EXPECT_EQ(tw.vector(), Vec6::Zero());
}

TEST(Log, PureTranslation) {
  const Twist tw = log(Transform::translation(Vec3(0.1, 0, 0)));
  EXPECT_EQ(tw.omega, Vec3::Zero());
  EXPECT_LT((tw.v - Vec3(0.1, 0, 0)).norm(), 1e-15);
}

TEST(Log, HalfTurnAboutZ) {
  const Mat3 r = Eigen::AngleAxisd(kPi, Vec3::UnitZ()).toRotationMatrix();
  const Transform t(r, Vec3(0.2, -0.1, 0.3));
  const Twist tw = log(t);
  EXPECT_NEAR(std::abs(tw.omega.z()), kPi, 1e-12);
  EXPECT_LT(tw.omega.head<2>().norm(), 1e-12);
  EXPECT_LT(max_abs(exp(tw).matrix() - t.matrix()), 1e-9);
}

TEST(Log, HalfTurnAboutOffAxis) {
  const Vec3 axis = Vec3(1, -2, 0.5).normalized();
  for (double eps : {0.0, 1e-12, 1e-8, 1e-5, 5e-4, 2e-3}) {
    const Transform t(Eigen::AngleAxisd(kPi - eps, axis).toRotationMatrix(), Vec3(0.3, 0.1, -0.2));
    EXPECT_LT(max_abs(exp(log(t)).matrix() - t.matrix()), 1e-9) << "eps=" << eps;
  }
}

TEST(Log, TinyRotationUsesSeries) {
  const Transform t(Eigen::AngleAxisd(1e-11, Vec3::UnitY()).toRotationMatrix(), Vec3(0, 0, 0.5));
  EXPECT_LT(max_abs(exp(log(t)).matrix() - t.matrix()), 1e-12);
}

TEST(Log, RejectsNonOrthonormalRotation) {
  Mat3 bad = Mat3::Identity();
  bad(0, 1) = 0.01;
  EXPECT_THROW(log(Transform::unchecked(bad, Vec3::Zero())), std::invalid_argument);
  EXPECT_THROW(Transform(bad, Vec3::Zero()), std::invalid_argument);
  const Mat3 reflection = Vec3(1, 1, -1).asDiagonal();
  EXPECT_THROW(log(Transform::unchecked(reflection, Vec3::Zero())), std::invalid_argument);
}

TEST(ExpLog, RoundTripRandomTransforms) {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 1000; ++n) {
    const Transform t = random_transform(rng);
    EXPECT_LT(max_abs(exp(log(t)).matrix() - t.matrix()), 1e-9);
  }
}

TEST(ExpLog, RoundTripRandomTwists) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> angle(1e-6, kPi - 1e-3);
  for (int n = 0; n < 1000; ++n) {
    const Vec3 w = random_vec3(rng, -1, 1).normalized() * angle(rng);
    const Twist tw(w, random_vec3(rng, -1, 1));
    const Twist back = log(exp(tw));
    EXPECT_LT((back.vector() - tw.vector()).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Adjoint, IdentityAndBlockStructure) {
  EXPECT_EQ(adjoint(Transform{}), Mat6::Identity());
  std::mt19937_64 rng(9);
  const Transform t = random_transform(rng);
  const Mat6 ad = adjoint(t);
  EXPECT_EQ(Mat3(ad.topRightCorner<3, 3>()), Mat3::Zero());
  EXPECT_EQ(Mat3(ad.topLeftCorner<3, 3>()), t.rotation());
  EXPECT_EQ(Mat3(ad.bottomRightCorner<3, 3>()), t.rotation());
}

TEST(Adjoint, Homomorphism) {
  std::mt19937_64 rng(13);
  for (int n = 0; n < 1000; ++n) {
    const Transform a = random_transform(rng);
    const Transform b = random_transform(rng);
    EXPECT_LT(max_abs(adjoint(a * b) - adjoint(a) * adjoint(b)), 1e-9);
    EXPECT_LT(max_abs(adjoint(a) * adjoint(a.inverse()) - Mat6::Identity()), 1e-9);
  }
}

TEST(Adjoint, TransportsTwistsLikeConjugation) {
  // [Ad_T V] = T [V] T⁻¹, checked in 4x4 form.
  std::mt19937_64 rng(17);
  auto bracket = [](const Vec6& v) {
    Mat4 m = Mat4::Zero();
    m.topLeftCorner<3, 3>() = skew(v.head<3>());
    m.topRightCorner<3, 1>() = v.tail<3>();
    return m;
  };
  for (int n = 0; n < 100; ++n) {
    const Transform t = random_transform(rng);
    Vec6 v;
    v << random_vec3(rng, -1, 1), random_vec3(rng, -1, 1);
    const Mat4 lhs = bracket(adjoint(t) * v);
    const Mat4 rhs = t.matrix() * bracket(v) * t.matrix().inverse();
    EXPECT_LT(max_abs(lhs - rhs), 1e-12);
  }
}

TEST(Transform, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(19);
  for (int n = 0; n < 100; ++n) {
    const Transform t = random_transform(rng);
    EXPECT_LT(max_abs((t * t.inverse()).matrix() - Mat4::Identity()), 1e-9);
  }
}

TEST(ScrewAxis, Normalization) {
  EXPECT_TRUE(is_screw_axis(Twist(Vec3::UnitZ(), Vec3(1, 2, 3))));
  EXPECT_TRUE(is_screw_axis(Twist(Vec3::Zero(), Vec3::UnitX())));
  EXPECT_FALSE(is_screw_axis(Twist(Vec3(0, 0, 2), Vec3::Zero())));
  EXPECT_FALSE(is_screw_axis(Twist{}));
}

}  // namespace
}  // namespace nlarm::se3
