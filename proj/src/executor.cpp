#include "nlarm/executor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace nlarm::exec {

using nlohmann::json;
using se3::Vec3;

std::string_view to_string(Gripper g) { return g == Gripper::open ? "open" : "closed"; }

std::vector<WorldObject> world_from_detections(const std::vector<scene::Detection>& detections) {
  std::vector<WorldObject> out;
  out.reserve(detections.size());
  for (const auto& d : detections) out.push_back({d.object_id, d.color, d.size_m, d.position_base});
  return out;
}

const WorldObject* ArmState::find(const std::string& id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

std::map<Direction, Vec3> ExecutorConfig::default_directions() {
  return {{Direction::forward, Vec3::UnitX()}, {Direction::backward, -Vec3::UnitX()},
          {Direction::left, Vec3::UnitY()},    {Direction::right, -Vec3::UnitY()},
          {Direction::up, Vec3::UnitZ()},      {Direction::down, -Vec3::UnitZ()}};
}

void ExecutorConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) throw std::invalid_argument(std::string("executor.") + name + " must be positive");
  };
  positive(joint_speed, "joint_speed");
  positive(rate_hz, "rate_hz");
  positive(attach_radius, "attach_radius");
  positive(approach_height, "approach_height");
  positive(lift_height, "lift_height");
  positive(default_magnitude, "default_magnitude");
  if (gripper_time_s < 0 || grasp_depth < 0) throw std::invalid_argument("executor: negative gripper_time_s or grasp_depth");

  std::set<std::pair<int, int>> axes;
  for (Direction d : intent::kAllDirections) {
    auto it = directions.find(d);
    if (it == directions.end()) {
      throw std::invalid_argument("executor.directions: missing " + std::string(intent::to_string(d)));
    }
    const Vec3& v = it->second;
    int axis = -1;
    for (int i = 0; i < 3; ++i) {
      if (std::abs(std::abs(v[i]) - 1.0) < 1e-12 && std::abs(v[(i + 1) % 3]) < 1e-12 && std::abs(v[(i + 2) % 3]) < 1e-12) {
        axis = i;
      }
    }
    if (axis < 0) throw std::invalid_argument("executor.directions." + std::string(intent::to_string(d)) + " is not a signed base axis");
    axes.insert({axis, v[axis] > 0 ? 1 : -1});
  }
  if (axes.size() != 6) throw std::invalid_argument("executor.directions must cover all six signed axes");
}

namespace {

Vec3 vec3_from(const json& v, const char* field) {
  if (!v.is_array() || v.size() != 3) throw std::invalid_argument(std::string("executor.") + field + ": expected [x, y, z]");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

arm::JointVector joints_from(const json& v, const char* field) {
  if (!v.is_array() || v.size() != 4) throw std::invalid_argument(std::string("executor.") + field + ": expected 4 angles");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
}

json array_of(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

ExecutorConfig executor_config_from_json(const json& doc) {
  ExecutorConfig cfg;
  if (!doc.is_object()) throw std::invalid_argument("executor: expected an object");
  try {
    auto num = [&](const char* key, double& out) {
      if (doc.contains(key)) out = doc.at(key).get<double>();
    };
    num("joint_speed", cfg.joint_speed);
    num("rate_hz", cfg.rate_hz);
    num("gripper_time_s", cfg.gripper_time_s);
    num("attach_radius", cfg.attach_radius);
    num("approach_height", cfg.approach_height);
    num("grasp_depth", cfg.grasp_depth);
    num("lift_height", cfg.lift_height);
    num("grasp_pitch", cfg.grasp_pitch);
    num("default_magnitude", cfg.default_magnitude);
    if (doc.contains("home_q")) cfg.home_q = joints_from(doc["home_q"], "home_q");
    if (doc.contains("sleep_q")) cfg.sleep_q = joints_from(doc["sleep_q"], "sleep_q");
    if (doc.contains("drop_position")) cfg.drop_position = vec3_from(doc["drop_position"], "drop_position");
    if (doc.contains("directions")) {
      for (const auto& [name, v] : doc["directions"].items()) {
        auto d = intent::parse_direction(name);
        if (!d) throw std::invalid_argument("executor.directions: unknown direction '" + name + "'");
        cfg.directions[*d] = vec3_from(v, "directions");
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("executor: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const ExecutorConfig& cfg) {
  json dirs = json::object();
  for (const auto& [d, v] : cfg.directions) dirs[std::string(intent::to_string(d))] = array_of(v);
  return {{"joint_speed", cfg.joint_speed},         {"rate_hz", cfg.rate_hz},
          {"gripper_time_s", cfg.gripper_time_s},   {"attach_radius", cfg.attach_radius},
          {"approach_height", cfg.approach_height}, {"grasp_depth", cfg.grasp_depth},
          {"lift_height", cfg.lift_height},         {"grasp_pitch", cfg.grasp_pitch},
          {"default_magnitude", cfg.default_magnitude},
          {"home_q", array_of(cfg.home_q)},         {"sleep_q", array_of(cfg.sleep_q)},
          {"drop_position", array_of(cfg.drop_position)},
          {"directions", dirs}};
}

json to_json(const MotionPlan& plan) {
  json steps = json::array();
  for (const auto& s : plan.steps) {
    json j = {{"label", s.label}};
    if (auto* m = std::get_if<MoveTo>(&s.action)) {
      j["kind"] = "move_to";
      j["q"] = array_of(m->q);
    } else if (auto* g = std::get_if<SetGripper>(&s.action)) {
      j["kind"] = "gripper";
      j["state"] = to_string(g->state);
    } else {
      j["kind"] = "dwell";
      j["seconds"] = std::get<Dwell>(s.action).seconds;
    }
    steps.push_back(std::move(j));
  }
  return {{"steps", steps}};
}

namespace {

std::string describe(const Vec3& p) {
  std::ostringstream os;
  os.precision(4);
  os << "(" << p.x() << ", " << p.y() << ", " << p.z() << ")";
  return os.str();
}

}  // namespace

arm::JointVector solve_pose(const arm::ArmModel& model, const se3::Transform& target, const arm::JointVector& q_hint,
                            const ik::IKParams& params) {
  const Vec3& p = target.position();
  const double yaw = std::atan2(p.y(), p.x());
  const std::vector<arm::JointVector> seeds = {
      q_hint,
      arm::JointVector(yaw, q_hint[1], q_hint[2], q_hint[3]),
      arm::JointVector(yaw, 0.0, 0.0, 0.0),
      arm::JointVector(yaw, 0.3, 0.3, 1.0),
      arm::JointVector(yaw, -0.3, 0.3, 1.5),
      arm::JointVector(yaw, 0.6, -0.6, 1.5),
  };

  std::optional<std::vector<int>> violations;
  for (const auto& seed : seeds) {
    ik::IKResult res;
    try {
      res = ik::ik_newton_raphson(model, target, seed, params);
    } catch (const ik::DivergenceError&) {
      continue;
    }
    if (!res.converged) continue;
    if (model.within_limits(res.q, 1e-9)) return model.clamp(res.q);
    if (!violations) violations = model.limit_violations(res.q, 1e-9);
  }
  if (violations) {
    std::vector<int> joints;
    std::string list;
    for (int j : *violations) {
      joints.push_back(j + 1);
      list += (list.empty() ? "" : ", ") + std::string("joint ") + std::to_string(j + 1);
    }
    throw PlanningError(PlanningErrorKind::joint_limits, "target " + describe(p) + " needs " + list + " outside limits",
                        std::move(joints));
  }
  throw PlanningError(PlanningErrorKind::unreachable, "IK did not converge for target " + describe(p));
}

namespace {

se3::Transform oriented(const Vec3& p, double pitch) {
  try {
    return ik::reachable_target(p, pitch);
  } catch (const std::invalid_argument&) {
    throw PlanningError(PlanningErrorKind::unreachable, "target " + describe(p) + " lies on the base axis");
  }
}

}  // namespace

MotionPlan plan_move(const ArmState& state, Direction direction, double magnitude_m, const arm::ArmModel& model,
                     const ik::IKParams& params, const ExecutorConfig& cfg) {
  if (!(magnitude_m > 0) || !std::isfinite(magnitude_m)) {
    throw PlanningError(PlanningErrorKind::precondition, "move magnitude must be positive");
  }
  const auto pose = ik::task_pose(arm::fk_space(model, state.q), 1e-6);
  if (!pose) {
    throw PlanningError(PlanningErrorKind::precondition,
                        "end-effector is on the base axis or reaching over the base; home the arm first");
  }
  const Vec3 target = pose->position + magnitude_m * cfg.directions.at(direction);
  const auto q = solve_pose(model, oriented(target, pose->pitch), state.q, params);
  std::ostringstream label;
  label << "move " << intent::to_string(direction) << " " << magnitude_m << " m";
  return {{{MoveTo{q}, label.str()}}};
}

se3::Vec3 grasp_point(const WorldObject& obj, const ExecutorConfig& cfg) {
  return obj.position_base + Vec3(0, 0, obj.size_m / 2 - cfg.grasp_depth);
}

MotionPlan plan_pick(const ArmState& state, const scene::Detection& target, const arm::ArmModel& model,
                     const ik::IKParams& params, const ExecutorConfig& cfg) {
  if (!target.position_base.allFinite() || target.position_base.head<2>().norm() < 1e-6) {
    throw PlanningError(PlanningErrorKind::precondition, target.object_id + " lies on the base axis");
  }
  const WorldObject obj{target.object_id, target.color, target.size_m, target.position_base};
  const Vec3 top = obj.position_base + Vec3(0, 0, obj.size_m / 2);
  const Vec3 grasp = grasp_point(obj, cfg);

  const auto q_approach = solve_pose(model, oriented(top + Vec3(0, 0, cfg.approach_height), cfg.grasp_pitch), state.q, params);
  const auto q_grasp = solve_pose(model, oriented(grasp, cfg.grasp_pitch), q_approach, params);
  const auto q_lift = solve_pose(model, oriented(grasp + Vec3(0, 0, cfg.lift_height), cfg.grasp_pitch), q_grasp, params);

  const std::string& id = obj.id;
  return {{{SetGripper{Gripper::open}, "open gripper"},
           {MoveTo{q_approach}, "approach " + id},
           {MoveTo{q_grasp}, "descend to " + id},
           {SetGripper{Gripper::closed}, "grasp " + id},
           {MoveTo{q_lift}, "lift " + id}}};
}

MotionPlan plan_place(const ArmState& state, const arm::ArmModel& model, const ik::IKParams& params,
                      const ExecutorConfig& cfg) {
  if (!state.held_object) throw PlanningError(PlanningErrorKind::precondition, "nothing is held");
  const Vec3 above = cfg.drop_position + Vec3(0, 0, cfg.approach_height);
  const auto q_above = solve_pose(model, oriented(above, cfg.grasp_pitch), state.q, params);
  const auto q_drop = solve_pose(model, oriented(cfg.drop_position, cfg.grasp_pitch), q_above, params);
  return {{{MoveTo{q_above}, "move over drop pose"},
           {MoveTo{q_drop}, "lower " + *state.held_object},
           {SetGripper{Gripper::open}, "release " + *state.held_object},
           {MoveTo{q_above}, "retreat"}}};
}

MotionPlan plan_joint_pose(const arm::JointVector& q, const std::string& label, const arm::ArmModel& model) {
  if (!model.within_limits(q, 1e-9)) {
    auto v = model.limit_violations(q, 1e-9);
    for (int& j : v) ++j;
    throw PlanningError(PlanningErrorKind::joint_limits, label + " pose is outside the joint limits", v);
  }
  return {{{MoveTo{model.clamp(q)}, label}}};
}

namespace {

void track_held(ArmState& s, const arm::ArmModel& model) {
  if (!s.held_object) return;
  for (auto& o : s.objects) {
    if (o.id == *s.held_object) o.position_base = arm::fk_space(model, s.q).apply(s.held_offset);
  }
}

void close_gripper(ArmState& s, const arm::ArmModel& model, const ExecutorConfig& cfg) {
  s.gripper = Gripper::closed;
  if (s.held_object) return;
  const se3::Transform ee = arm::fk_space(model, s.q);
  WorldObject* best = nullptr;
  double best_d = cfg.attach_radius;
  for (auto& o : s.objects) {
    const double d = (grasp_point(o, cfg) - ee.position()).norm();
    if (d <= best_d) {
      best = &o;
      best_d = d;
    }
  }
  if (!best) return;
  // Snap the grasp point onto the fingers; the cube then rides rigidly.
  best->position_base += ee.position() - grasp_point(*best, cfg);
  s.held_offset = ee.rotation().transpose() * (best->position_base - ee.position());
  s.held_object = best->id;
}

void open_gripper(ArmState& s) {
  s.gripper = Gripper::open;
  if (!s.held_object) return;
  for (auto& o : s.objects) {
    if (o.id == *s.held_object) o.position_base.z() = o.size_m / 2;
  }
  s.held_object.reset();
  s.held_offset = Vec3::Zero();
}

int tick_count(double seconds, double rate_hz) {
  return std::max(1, static_cast<int>(std::ceil(seconds * rate_hz - 1e-9)));
}

}  // namespace

ArmState execute(const MotionPlan& plan, ArmState state, const arm::ArmModel& model, const ExecutorConfig& cfg,
                 const StateSink& sink, const StopFlag& stop) {
  if (plan.empty()) {
    sink(state);
    return state;
  }
  const double dt = 1.0 / cfg.rate_hz;
  auto tick = [&] {
    state.t += dt;
    track_held(state, model);
    sink(state);
    return stop && stop();
  };

  for (const auto& step : plan.steps) {
    if (const auto* m = std::get_if<MoveTo>(&step.action)) {
      const arm::JointVector q0 = state.q;
      const arm::JointVector delta = m->q - q0;
      const int n = tick_count(delta.cwiseAbs().maxCoeff() / cfg.joint_speed, cfg.rate_hz);
      for (int k = 1; k <= n; ++k) {
        state.q = k == n ? m->q : model.clamp(q0 + delta * (static_cast<double>(k) / n));
        if (tick()) return state;
      }
    } else if (const auto* g = std::get_if<SetGripper>(&step.action)) {
      if (g->state == Gripper::closed) {
        close_gripper(state, model, cfg);
      } else {
        open_gripper(state);
      }
      const int n = tick_count(cfg.gripper_time_s, cfg.rate_hz);
      for (int k = 0; k < n; ++k) {
        if (tick()) return state;
      }
    } else {
      const int n = tick_count(std::get<Dwell>(step.action).seconds, cfg.rate_hz);
      for (int k = 0; k < n; ++k) {
        if (tick()) return state;
      }
    }
  }
  return state;
}

std::vector<ArmState> execute_collect(const MotionPlan& plan, const ArmState& state, const arm::ArmModel& model,
                                      const ExecutorConfig& cfg) {
  std::vector<ArmState> out;
  execute(plan, state, model, cfg, [&](const ArmState& s) { out.push_back(s); });
  return out;
}

double ee_pitch(const se3::Transform& t) {
  const auto& R = t.rotation();
  return std::atan2(-R(2, 0), R(2, 2));
}

json state_to_json(const ArmState& state, const arm::ArmModel& model) {
  const se3::Transform ee = arm::fk_space(model, state.q);
  json objects = json::array();
  for (const auto& o : state.objects) {
    objects.push_back({{"id", o.id},
                       {"color", intent::to_string(o.color)},
                       {"size_m", o.size_m},
                       {"position_base", array_of(o.position_base)}});
  }
  return {{"t", state.t},
          {"q", array_of(state.q)},
          {"ee_position", array_of(ee.position())},
          {"ee_pitch", ee_pitch(ee)},
          {"gripper", to_string(state.gripper)},
          {"held_object", state.held_object ? json(*state.held_object) : json(nullptr)},
          {"scene", objects}};
}

}  // namespace nlarm::exec
