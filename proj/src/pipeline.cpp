#include "nlarm/pipeline.hpp"

#include <sstream>

namespace nlarm::pipeline {

using intent::Action;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

json to_json(const Outcome& o) {
  json j = {{"intent", o.intent ? intent::to_json(*o.intent) : json(nullptr)},
            {"plan_summary", o.plan_summary},
            {"plan", exec::to_json(o.plan)},
            {"accepted", o.accepted},
            {"timing", {{"interpret_s", o.interpret_s}, {"plan_s", o.plan_s}}}};
  if (!o.error.empty()) j["error"] = o.error;
  return j;
}

Pipeline::Pipeline(arm::ArmModel model, scene::Scene scene, std::unique_ptr<intent::Interpreter> interpreter,
                   ik::IKParams ik_params, exec::ExecutorConfig exec_cfg)
    : model_(std::move(model)),
      scene_(std::move(scene)),
      interpreter_(std::move(interpreter)),
      ik_params_(ik_params),
      exec_cfg_(std::move(exec_cfg)) {
  ik_params_.validate();
  exec_cfg_.validate();
}

exec::ArmState Pipeline::initial_state() const {
  exec::ArmState s;
  s.q = exec_cfg_.home_q;
  s.objects = exec::world_from_detections(scene::detect(scene_, std::nullopt, scene_.extrinsics));
  return s;
}

std::vector<scene::Detection> Pipeline::detect(const exec::ArmState& state, std::optional<intent::Color> color) const {
  scene::Scene view;
  view.extrinsics = scene_.extrinsics;
  for (const auto& o : state.objects) {
    if (state.held_object == o.id) continue;
    view.objects.push_back({o.id, o.color, o.size_m, scene::base_to_camera(o.position_base, scene_.extrinsics)});
  }
  return scene::detect(view, color, scene_.extrinsics);
}

exec::MotionPlan Pipeline::plan(const intent::IntentCommand& cmd, const exec::ArmState& state) const {
  using exec::PlanningError;
  using exec::PlanningErrorKind;
  switch (cmd.action) {
    case Action::move:
      return exec::plan_move(state, *cmd.direction, cmd.magnitude_m.value_or(exec_cfg_.default_magnitude), model_,
                             ik_params_, exec_cfg_);
    case Action::pick_up: {
      const auto target = scene::nearest(detect(state, cmd.color));
      if (!target) {
        throw PlanningError(PlanningErrorKind::precondition,
                            "no " + std::string(intent::to_string(*cmd.color)) + " cube in view");
      }
      return exec::plan_pick(state, *target, model_, ik_params_, exec_cfg_);
    }
    case Action::place: return exec::plan_place(state, model_, ik_params_, exec_cfg_);
    case Action::home: return exec::plan_joint_pose(exec_cfg_.home_q, "home", model_);
    case Action::sleep: return exec::plan_joint_pose(exec_cfg_.sleep_q, "sleep", model_);
    case Action::stop: return {};
    case Action::clarify: break;
  }
  throw PlanningError(PlanningErrorKind::precondition, "command needs clarification");
}

std::string summarize_plan(const exec::MotionPlan& plan) {
  std::string out;
  for (const auto& s : plan.steps) out += (out.empty() ? "" : "; ") + s.label;
  return out;
}

Outcome Pipeline::process(std::string_view text, const exec::ArmState& state, int trial) const {
  Outcome out;
  if (blank(text)) {
    out.error = "empty command";
    return out;
  }
  const auto t0 = std::chrono::steady_clock::now();
  try {
    out.intent = interpreter_->interpret(text, trial);
  } catch (const intent::IntentError& e) {
    out.interpret_s = seconds_since(t0);
    out.error = e.kind() == intent::ErrorKind::empty_input
                    ? "empty command"
                    : std::string(intent::to_string(e.kind())) + ": " + e.what();
    return out;
  }
  out.interpret_s = seconds_since(t0);

  const auto& cmd = *out.intent;
  if (cmd.action == Action::clarify) {
    out.error = "clarification needed" + (cmd.note.empty() ? "" : ": " + cmd.note);
    return out;
  }
  if (cmd.action == Action::stop) {
    out.accepted = true;
    out.stop = true;
    out.plan_summary = "stop";
    return out;
  }
  const auto t1 = std::chrono::steady_clock::now();
  try {
    out.plan = plan(cmd, state);
    out.accepted = true;
    out.plan_summary = summarize_plan(out.plan);
  } catch (const exec::PlanningError& e) {
    out.error = std::string("planning failed: ") + e.what();
  }
  out.plan_s = seconds_since(t1);
  return out;
}

TimingResult time_pipeline(const Pipeline& pipeline, std::string_view text, int repetitions) {
  TimingResult r;
  const exec::ArmState state = pipeline.initial_state();
  for (int i = 0; i < repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = pipeline.process(text, state, i);
    const double dt = seconds_since(t0);
    if (!o.intent) {
      r.warnings.push_back("repetition " + std::to_string(i + 1) + " excluded: " + o.error);
      continue;
    }
    r.samples_s.push_back(dt);
  }
  return r;
}

}  // namespace nlarm::pipeline
