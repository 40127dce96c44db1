#include "nlarm/executor.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "test_support.hpp"

namespace nlarm::exec {
namespace {

using se3::Vec3;

class ExecutorTest : public ::testing::Test {
 protected:
  arm::ArmModel model = arm::build_px100();
  ik::IKParams params;
  ExecutorConfig cfg;
  scene::Scene demo = scene::load_scene_file(scene::demo_scene_path());

  ArmState home_state() const {
    ArmState s;
    s.objects = world_from_detections(scene::detect(demo, std::nullopt, demo.extrinsics));
    return s;
  }
  scene::Detection detection(Color c) const { return scene::detect(demo, c, demo.extrinsics).at(0); }
  Vec3 ee(const ArmState& s) const { return arm::fk_space(model, s.q).position(); }
};

TEST_F(ExecutorTest, MoveUpFromHome) {
  const ArmState s = home_state();
  const MotionPlan plan = plan_move(s, Direction::up, 0.05, model, params, cfg);
  ASSERT_EQ(plan.steps.size(), 1u);
  const auto& q = std::get<MoveTo>(plan.steps[0].action).q;
  EXPECT_LT((arm::fk_space(model, q).position() - Vec3(0.22105, 0, 0.23945)).norm(), 1e-4);
  EXPECT_NEAR(ee_pitch(arm::fk_space(model, q)), 0.0, 1e-3);
}

TEST_F(ExecutorTest, LeftThenRightReturnsHome) {
  ArmState s = home_state();
  s = execute(plan_move(s, Direction::left, 0.05, model, params, cfg), s, model, cfg, [](const ArmState&) {});
  EXPECT_GT(ee(s).y(), 0.04);
  s = execute(plan_move(s, Direction::right, 0.05, model, params, cfg), s, model, cfg, [](const ArmState&) {});
  EXPECT_LT((ee(s) - model.home().position()).norm(), 1e-3);
}

TEST_F(ExecutorTest, DirectionConvention) {
  const ArmState s = home_state();
  const Vec3 p0 = ee(s);
  for (auto [d, axis] : ExecutorConfig::default_directions()) {
    if (d == Direction::forward) continue;  // home is already at full reach
    const auto q = std::get<MoveTo>(plan_move(s, d, 0.03, model, params, cfg).steps[0].action).q;
    const Vec3 moved = arm::fk_space(model, q).position() - p0;
    EXPECT_LT((moved - 0.03 * axis).norm(), 2e-4) << intent::to_string(d);
  }
}

TEST_F(ExecutorTest, TargetBeyondReachIsRejectedWithoutSideEffects) {
  const ArmState s = home_state();
  const ArmState before = s;
  const double reach = model.geometry().Lm + model.geometry().L3 + model.geometry().L4 + model.geometry().L2;
  try {
    plan_move(s, Direction::forward, reach, model, params, cfg);
    FAIL();
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.kind(), PlanningErrorKind::unreachable);
    EXPECT_NE(std::string(e.what()).find("target"), std::string::npos);
  }
  EXPECT_EQ(s, before);
}

TEST_F(ExecutorTest, JointLimitErrorsListJoints) {
  auto limits = arm::default_joint_limits();
  limits[0] = {-0.1, 0.1};
  const auto narrow = arm::build_px100({}, limits);
  ArmState s = home_state();
  try {
    plan_pick(s, detection(Color::red), narrow, params, cfg);
    FAIL();
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.kind(), PlanningErrorKind::joint_limits);
    EXPECT_EQ(e.joints(), std::vector<int>{1});
  }
  try {
    plan_joint_pose(arm::JointVector(0, 2.5, 0, -2.0), "bad", model);
    FAIL();
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.joints(), (std::vector<int>{2, 4}));
  }
}

TEST_F(ExecutorTest, PickRedCube) {
  ArmState s = home_state();
  const Vec3 start = s.find("red-1")->position_base;
  const MotionPlan plan = plan_pick(s, detection(Color::red), model, params, cfg);
  ASSERT_EQ(plan.steps.size(), 5u);
  for (const auto& step : plan.steps) {
    if (auto* m = std::get_if<MoveTo>(&step.action)) EXPECT_TRUE(model.within_limits(m->q));
  }
  const auto states = execute_collect(plan, s, model, cfg);
  const ArmState& last = states.back();
  EXPECT_EQ(last.gripper, Gripper::closed);
  ASSERT_EQ(last.held_object, "red-1");
  const Vec3 end = last.find("red-1")->position_base;
  EXPECT_NEAR(end.z() - start.z(), 0.08, 1e-3);
  EXPECT_LT((end.head<2>() - start.head<2>()).norm(), 1e-3);
  // Rigid attachment: the cube sits at the grasp offset carried by the fingers.
  EXPECT_LT((arm::fk_space(model, last.q).apply(last.held_offset) - end).norm(), 1e-9);
  EXPECT_LT((grasp_point(*last.find("red-1"), cfg) - ee(last)).norm(), 1e-4);
  // Other cubes stay put.
  EXPECT_EQ(last.find("blue-1")->position_base, s.find("blue-1")->position_base);
}

TEST_F(ExecutorTest, PickThenPlace) {
  ArmState s = home_state();
  s = execute(plan_pick(s, detection(Color::green), model, params, cfg), s, model, cfg, [](const ArmState&) {});
  ASSERT_EQ(s.held_object, "green-1");
  s = execute(plan_place(s, model, params, cfg), s, model, cfg, [](const ArmState&) {});
  EXPECT_EQ(s.gripper, Gripper::open);
  EXPECT_FALSE(s.held_object);
  const auto* cube = s.find("green-1");
  EXPECT_NEAR(cube->position_base.z(), cube->size_m / 2, 1e-12);
  EXPECT_LT((cube->position_base.head<2>() - cfg.drop_position.head<2>()).norm(), 1e-3);
  EXPECT_THROW(plan_place(s, model, params, cfg), PlanningError);
}

TEST_F(ExecutorTest, ObjectOnBaseAxisIsRejected) {
  scene::Detection d{"x", Color::red, Vec3(0, 0, 0.015), 0.03};
  EXPECT_THROW(plan_pick(home_state(), d, model, params, cfg), PlanningError);
}

TEST_F(ExecutorTest, EmptyPlanEmitsOneUnchangedState) {
  const ArmState s = home_state();
  const auto states = execute_collect({}, s, model, cfg);
  ASSERT_EQ(states.size(), 1u);
  EXPECT_EQ(states[0], s);
}

TEST_F(ExecutorTest, ClosingFarFromCubesHoldsNothing) {
  const MotionPlan plan{{{SetGripper{Gripper::closed}, "close"}}};
  const auto states = execute_collect(plan, home_state(), model, cfg);
  EXPECT_EQ(states.back().gripper, Gripper::closed);
  EXPECT_FALSE(states.back().held_object);
}

TEST_F(ExecutorTest, StopPreemptsAtTheNextTick) {
  const ArmState s = home_state();
  const MotionPlan plan = plan_joint_pose(cfg.sleep_q, "sleep", model);
  int ticks = 0;
  const ArmState last = execute(plan, s, model, cfg, [&](const ArmState&) { ++ticks; }, [&] { return ticks >= 3; });
  EXPECT_EQ(ticks, 3);
  EXPECT_NE(last.q, cfg.sleep_q);
  EXPECT_NEAR(last.t, 3 / cfg.rate_hz, 1e-12);
}

TEST_F(ExecutorTest, JointSpeedBoundsEachTick) {
  const ArmState s = home_state();
  const auto states = execute_collect(plan_joint_pose(cfg.sleep_q, "sleep", model), s, model, cfg);
  const double max_step = cfg.joint_speed / cfg.rate_hz;
  arm::JointVector prev = s.q;
  for (const auto& st : states) {
    EXPECT_LE((st.q - prev).cwiseAbs().maxCoeff(), max_step + 1e-12);
    prev = st.q;
  }
  EXPECT_EQ(states.back().q, cfg.sleep_q);
}

// Random command sequences: every emitted state respects the limits, holding
// implies a closed gripper, time strictly increases, and rejected plans leave
// the state untouched.
TEST_F(ExecutorTest, RandomSessionsKeepInvariants) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick_cmd(0, 9);
  std::uniform_int_distribution<int> pick_dir(0, 5);
  std::uniform_real_distribution<double> mag(0.01, 0.12);
  int executed = 0, rejected = 0, attached = 0;
  for (int session = 0; session < 10; ++session) {
    ArmState s = home_state();
    double last_t = -1;
    for (int n = 0; n < 25; ++n) {
      const ArmState before = s;
      MotionPlan plan;
      try {
        const int c = pick_cmd(rng);
        if (c < 5) {
          plan = plan_move(s, intent::kAllDirections[pick_dir(rng)], mag(rng), model, params, cfg);
        } else if (c < 7) {
          plan = plan_pick(s, detection(intent::kAllColors[pick_dir(rng) % 3]), model, params, cfg);
        } else if (c == 7) {
          plan = plan_place(s, model, params, cfg);
        } else if (c == 8) {
          plan = plan_joint_pose(cfg.home_q, "home", model);
        } else {
          plan = plan_joint_pose(cfg.sleep_q, "sleep", model);
        }
      } catch (const PlanningError&) {
        ++rejected;
        ASSERT_EQ(s, before);
        continue;
      }
      s = execute(plan, s, model, cfg, [&](const ArmState& st) {
        ASSERT_TRUE(model.within_limits(st.q)) << st.q.transpose();
        if (st.held_object) {
          ASSERT_EQ(st.gripper, Gripper::closed);
          const auto* o = st.find(*st.held_object);
          ASSERT_LT((arm::fk_space(model, st.q).apply(st.held_offset) - o->position_base).norm(), 1e-9);
        }
        ASSERT_GT(st.t, last_t);
        last_t = st.t;
      });
      if (s.held_object) ++attached;
      ++executed;
    }
  }
  EXPECT_GT(executed, 100);
  EXPECT_GT(rejected, 0);
  EXPECT_GT(attached, 0);
}

TEST_F(ExecutorTest, FifteenPicksAcrossColors) {
  int ok = 0;
  for (Color c : {Color::red, Color::blue, Color::green}) {
    for (int trial = 0; trial < 5; ++trial) {
      ArmState s = home_state();
      const auto d = detection(c);
      const double z0 = s.find(d.object_id)->position_base.z();
      s = execute(plan_pick(s, d, model, params, cfg), s, model, cfg, [](const ArmState&) {});
      if (s.held_object == d.object_id && s.find(d.object_id)->position_base.z() - z0 >= 0.05) ++ok;
    }
  }
  EXPECT_EQ(ok, 15);
}

TEST(ExecutorConfig, JsonRoundTripAndValidation) {
  ExecutorConfig cfg;
  cfg.rate_hz = 50;
  cfg.directions[Direction::left] = -Vec3::UnitY();
  cfg.directions[Direction::right] = Vec3::UnitY();
  const auto back = executor_config_from_json(to_json(cfg));
  EXPECT_EQ(back.rate_hz, 50);
  EXPECT_EQ(back.directions.at(Direction::left), -Vec3::UnitY());
  EXPECT_EQ(back.sleep_q, cfg.sleep_q);

  EXPECT_THROW(executor_config_from_json({{"rate_hz", 0}}), std::invalid_argument);
  EXPECT_THROW(executor_config_from_json({{"directions", {{"left", {0.5, 0.5, 0}}}}}), std::invalid_argument);
  EXPECT_THROW(executor_config_from_json({{"directions", {{"left", {1, 0, 0}}}}}), std::invalid_argument);
}

TEST_F(ExecutorTest, StateJson) {
  const auto j = state_to_json(home_state(), model);
  EXPECT_EQ(j.at("q").size(), 4u);
  EXPECT_NEAR(j.at("ee_position")[0].get<double>(), 0.22105, 1e-12);
  EXPECT_NEAR(j.at("ee_position")[2].get<double>(), 0.18945, 1e-12);
  EXPECT_EQ(j.at("gripper"), "open");
  EXPECT_TRUE(j.at("held_object").is_null());
  EXPECT_EQ(j.at("scene").size(), 3u);
}

}  // namespace
}  // namespace nlarm::exec
