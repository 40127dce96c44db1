#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlarm/arm_model.hpp"
#include "nlarm/executor.hpp"
#include "nlarm/ik.hpp"
#include "nlarm/llm_backend.hpp"
#include "nlarm/scene.hpp"

namespace nlarm::pipeline {

/// Text -> intent -> detection -> plan. Shared by the REPL, the HTTP service
/// and the benchmark so identical text yields identical intents and plans.
struct Outcome {
  std::optional<intent::IntentCommand> intent;  // absent when interpretation failed
  exec::MotionPlan plan;
  bool accepted = false;
  bool stop = false;  // preempt the running plan and drop queued ones
  std::string error;  // set iff !accepted
  std::string plan_summary;
  double interpret_s = 0.0;
  double plan_s = 0.0;
};

nlohmann::json to_json(const Outcome& o);

class Pipeline {
 public:
  Pipeline(arm::ArmModel model, scene::Scene scene, std::unique_ptr<intent::Interpreter> interpreter,
           ik::IKParams ik_params = {}, exec::ExecutorConfig exec_cfg = {});

  const arm::ArmModel& model() const { return model_; }
  const scene::Scene& scene() const { return scene_; }
  const intent::Interpreter& interpreter() const { return *interpreter_; }
  const ik::IKParams& ik_params() const { return ik_params_; }
  const exec::ExecutorConfig& executor_config() const { return exec_cfg_; }

  /// Arm at home, gripper open, cubes where the camera sees them.
  exec::ArmState initial_state() const;

  /// Never throws for user-level failures; they come back as accepted=false
  /// with an error message ("empty command", "clarification needed: ...",
  /// interpreter and planning errors).
  Outcome process(std::string_view text, const exec::ArmState& state, int trial = 0) const;

  /// Plan for an already interpreted command. Throws exec::PlanningError.
  exec::MotionPlan plan(const intent::IntentCommand& cmd, const exec::ArmState& state) const;

  /// Cubes of a color as the camera would report them in the current world,
  /// excluding the held cube, ordered by id.
  std::vector<scene::Detection> detect(const exec::ArmState& state, std::optional<intent::Color> color) const;

 private:
  arm::ArmModel model_;
  scene::Scene scene_;
  std::unique_ptr<intent::Interpreter> interpreter_;
  ik::IKParams ik_params_;
  exec::ExecutorConfig exec_cfg_;
};

std::string summarize_plan(const exec::MotionPlan& plan);

struct TimingResult {
  std::vector<double> samples_s;
  std::vector<std::string> warnings;  // one per excluded repetition
};

/// Wall-clock (steady clock) duration of interpret + plan per repetition,
/// run sequentially from the pipeline's initial state. Repetitions where the
/// interpreter fails are excluded and reported as warnings.
TimingResult time_pipeline(const Pipeline& pipeline, std::string_view text, int repetitions);

}  // namespace nlarm::pipeline
