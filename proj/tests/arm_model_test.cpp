#include "nlarm/arm_model.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "test_support.hpp"

namespace nlarm::arm {
namespace {

using nlarm::testing::chain_fk;
using nlarm::testing::fd_body_twist;
using nlarm::testing::fd_space_twist;
using nlarm::testing::max_abs;
using nlarm::testing::random_in_limits;
using se3::Vec3;
using se3::Vec6;

Vec6 vec6(double a, double b, double c, double d, double e, double f) {
  Vec6 v;
  v << a, b, c, d, e, f;
  return v;
}

TEST(BuildPx100, ScrewAxesMatchPublishedValues) {
  const ArmModel m = build_px100();
  // Published to 5 decimals.
  EXPECT_LT(max_abs(m.screws()[0].vector() - vec6(0, 0, 1, 0, 0, 0)), 5e-6);
  EXPECT_LT(max_abs(m.screws()[1].vector() - vec6(0, 1, 0, -0.08945, 0, 0)), 5e-6);
  EXPECT_LT(max_abs(m.screws()[2].vector() - vec6(0, 1, 0, -0.18945, 0, 0.035)), 5e-6);
  EXPECT_LT(max_abs(m.screws()[3].vector() - vec6(0, 1, 0, -0.18945, 0, 0.135)), 5e-6);
}

TEST(BuildPx100, HomeMatrix) {
  const ArmModel m = build_px100();
  se3::Mat4 expected;
  expected << 1, 0, 0, 0.22105,
              0, 1, 0, 0,
              0, 0, 1, 0.18945,
              0, 0, 0, 1;
  EXPECT_LT(max_abs(m.home().matrix() - expected), 5e-6);
}

TEST(BuildPx100, RejectsBadGeometry) {
  ArmGeometry g;
  g.L3 = 0.0;
  EXPECT_THROW(build_px100(g), std::invalid_argument);
  g.L3 = -0.1;
  EXPECT_THROW(build_px100(g), std::invalid_argument);
  JointLimits limits = default_joint_limits();
  limits[2] = {1.0, -1.0};
  EXPECT_THROW(build_px100({}, limits), std::invalid_argument);
}

TEST(ModelJson, RoundTripAndDefaults) {
  const ArmModel m = model_from_json(nlohmann::json::object());
  EXPECT_EQ(m.home().position(), build_px100().home().position());
  const ArmModel m2 = model_from_json(model_to_json(m));
  EXPECT_EQ(m2.home().position(), m.home().position());
  EXPECT_EQ(m2.joint_limits()[3].hi, m.joint_limits()[3].hi);
  EXPECT_THROW(model_from_json({{"joint_limits", {{0, 1}}}}), std::invalid_argument);
  EXPECT_THROW(model_from_json({{"lengths", {{"L1", "long"}}}}), std::invalid_argument);
}

TEST(FkSpace, ZeroIsHome) {
  const ArmModel m = build_px100();
  EXPECT_EQ(fk_space(m, JointVector::Zero()).matrix(), m.home().matrix());
}

TEST(FkSpace, BaseQuarterTurn) {
  const ArmModel m = build_px100();
  const se3::Transform t = fk_space(m, JointVector(std::numbers::pi / 2, 0, 0, 0));
  EXPECT_LT((t.position() - Vec3(0, 0.22105, 0.18945)).norm(), 1e-12);
  EXPECT_NEAR(std::atan2(t.rotation()(1, 0), t.rotation()(0, 0)), std::numbers::pi / 2, 1e-12);
}

TEST(FkSpace, MatchesSerialChainOracle) {
  const ArmModel m = build_px100();
  const JointVector q(0.1, -0.2, 0.3, -0.4);
  const se3::Transform poe = fk_space(m, q);
  const se3::Transform chain = chain_fk(m.geometry(), q);
  EXPECT_LT((poe.position() - chain.position()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(max_abs(poe.rotation() - chain.rotation()), 1e-9);

  std::mt19937_64 rng(23);
  for (int n = 0; n < 200; ++n) {
    const JointVector r = random_in_limits(rng, m);
    EXPECT_LT(max_abs(fk_space(m, r).matrix() - chain_fk(m.geometry(), r).matrix()), 1e-9);
    EXPECT_TRUE(fk_space(m, r).is_valid());
  }
}

TEST(SpaceJacobian, ZeroConfigurationIsScrewList) {
  const ArmModel m = build_px100();
  const Jacobian js = space_jacobian(m, JointVector::Zero());
  for (int i = 0; i < kJoints; ++i) EXPECT_EQ(Vec6(js.col(i)), m.screws()[i].vector());
}

TEST(SpaceJacobian, FirstColumnIsAlwaysS1AndMatchesFiniteDifferences) {
  const ArmModel m = build_px100();
  std::mt19937_64 rng(29);
  for (int n = 0; n < 100; ++n) {
    const JointVector q = random_in_limits(rng, m);
    const Jacobian js = space_jacobian(m, q);
    EXPECT_EQ(Vec6(js.col(0)), m.screws()[0].vector());
    for (int i = 0; i < kJoints; ++i) {
      const Vec6 fd = fd_space_twist(m, q, JointVector::Unit(i), 1e-6);
      EXPECT_LT((Vec6(js.col(i)) - fd).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(BodyJacobian, ZeroConfiguration) {
  const ArmModel m = build_px100();
  Jacobian screws;
  for (int i = 0; i < kJoints; ++i) screws.col(i) = m.screws()[i].vector();
  const Jacobian expected = se3::adjoint(m.home().inverse()) * screws;
  EXPECT_LT(max_abs(body_jacobian(m, JointVector::Zero()) - expected), 1e-15);
}

TEST(BodyJacobian, AdjointIdentityAndFiniteDifferenceTwist) {
  const ArmModel m = build_px100();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 100; ++n) {
    const JointVector q = random_in_limits(rng, m);
    const Jacobian jb = body_jacobian(m, q);
    EXPECT_LT(max_abs(se3::adjoint(fk_space(m, q)) * jb - space_jacobian(m, q)), 1e-9);

    const JointVector qdot(u(rng), u(rng), u(rng), u(rng));
    const Vec6 fd = fd_body_twist(m, q, qdot, 1e-6);
    EXPECT_LT((jb * qdot - fd).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(BodyJacobian, FullColumnRankAwayFromAlignment) {
  const ArmModel m = build_px100();
  std::mt19937_64 rng(37);
  int checked = 0;
  while (checked < 100) {
    const JointVector q = random_in_limits(rng, m);
    if (q.tail<3>().cwiseAbs().maxCoeff() < 0.05) continue;
    const Eigen::JacobiSVD<Jacobian> svd(body_jacobian(m, q));
    EXPECT_GT(svd.singularValues()[3], 1e-8);
    ++checked;
  }
}

TEST(Limits, ViolationsAndClamp) {
  const ArmModel m = build_px100();
  const JointVector q(0.0, 2.5, -3.0, 0.0);
  EXPECT_EQ(m.limit_violations(q), (std::vector<int>{1, 2}));
  EXPECT_TRUE(m.within_limits(m.clamp(q)));
  EXPECT_FALSE(m.within_limits(JointVector(0, std::nan(""), 0, 0)));
}

}  // namespace
}  // namespace nlarm::arm
