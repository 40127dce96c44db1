#include "nlarm/arm_model.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nlarm::arm {

using se3::Transform;
using se3::Twist;
using se3::Vec3;

JointLimits default_joint_limits() {
  return {{{-std::numbers::pi, std::numbers::pi}, {-1.88, 1.98}, {-2.14, 1.60}, {-1.74, 2.14}}};
}

ArmModel::ArmModel(const ArmGeometry& geometry, const std::array<Twist, kJoints>& screws,
                   const Transform& home, const JointLimits& limits)
    : geometry_(geometry), screws_(screws), home_(home), limits_(limits) {
  for (int i = 0; i < kJoints; ++i) {
    if (!se3::is_screw_axis(screws_[i])) {
      throw std::invalid_argument("ArmModel: screw " + std::to_string(i + 1) + " is not normalized");
    }
    if (!(limits_[i].lo < limits_[i].hi)) {
      throw std::invalid_argument("ArmModel: joint " + std::to_string(i + 1) + " has lo >= hi");
    }
  }
}

bool ArmModel::within_limits(const JointVector& q, double slack) const {
  return limit_violations(q, slack).empty();
}

std::vector<int> ArmModel::limit_violations(const JointVector& q, double slack) const {
  std::vector<int> bad;
  for (int i = 0; i < kJoints; ++i) {
    if (!(q[i] >= limits_[i].lo - slack && q[i] <= limits_[i].hi + slack)) bad.push_back(i);
  }
  return bad;
}

JointVector ArmModel::clamp(const JointVector& q) const {
  JointVector out = q;
  for (int i = 0; i < kJoints; ++i) out[i] = std::clamp(q[i], limits_[i].lo, limits_[i].hi);
  return out;
}

namespace {

Twist revolute_screw(const Vec3& w, const Vec3& p) { return {w, -w.cross(p)}; }

}  // namespace

ArmModel build_px100(const ArmGeometry& g, const JointLimits& limits) {
  for (double len : {g.L1, g.L2, g.Lm, g.L3, g.L4}) {
    if (!(len > 0.0)) throw std::invalid_argument("build_px100: link lengths must be positive");
  }
  const Vec3 z = Vec3::UnitZ();
  const Vec3 y = Vec3::UnitY();
  const double shoulder_height = g.L1 + g.L2;

  std::array<Twist, kJoints> screws = {
      revolute_screw(z, Vec3::Zero()),
      revolute_screw(y, Vec3(0.0, 0.0, g.L1)),
      revolute_screw(y, Vec3(g.Lm, 0.0, shoulder_height)),
      revolute_screw(y, Vec3(g.Lm + g.L3, 0.0, shoulder_height)),
  };
  const Transform home = Transform::translation(Vec3(g.Lm + g.L3 + g.L4, 0.0, shoulder_height));
  return ArmModel(g, screws, home, limits);
}

ArmModel model_from_json(const nlohmann::json& doc) {
  ArmGeometry g;
  JointLimits limits = default_joint_limits();
  try {
    if (doc.contains("lengths")) {
      const auto& l = doc.at("lengths");
      g.L1 = l.value("L1", g.L1);
      g.L2 = l.value("L2", g.L2);
      g.Lm = l.value("Lm", g.Lm);
      g.L3 = l.value("L3", g.L3);
      g.L4 = l.value("L4", g.L4);
    }
    if (doc.contains("joint_limits")) {
      const auto& jl = doc.at("joint_limits");
      if (!jl.is_array() || jl.size() != kJoints) {
        throw std::invalid_argument("model: joint_limits must be an array of 4 [lo, hi] pairs");
      }
      for (int i = 0; i < kJoints; ++i) {
        limits[i] = {jl[i].at(0).get<double>(), jl[i].at(1).get<double>()};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("model: ") + e.what());
  }
  return build_px100(g, limits);
}

ArmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("model file " + path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

nlohmann::json model_to_json(const ArmModel& model) {
  const auto& g = model.geometry();
  nlohmann::json limits = nlohmann::json::array();
  for (const auto& l : model.joint_limits()) limits.push_back({l.lo, l.hi});
  return {{"lengths", {{"L1", g.L1}, {"L2", g.L2}, {"Lm", g.Lm}, {"L3", g.L3}, {"L4", g.L4}}},
          {"joint_limits", limits}};
}

Transform fk_space(const ArmModel& model, const JointVector& q) {
  Transform t;
  for (int i = 0; i < kJoints; ++i) t = t * se3::exp(model.screws()[i], q[i]);
  return t * model.home();
}

Jacobian space_jacobian(const ArmModel& model, const JointVector& q) {
  Jacobian js;
  Transform prefix;
  for (int i = 0; i < kJoints; ++i) {
    js.col(i) = se3::adjoint(prefix) * model.screws()[i].vector();
    prefix = prefix * se3::exp(model.screws()[i], q[i]);
  }
  return js;
}

Jacobian body_jacobian(const ArmModel& model, const JointVector& q) {
  const Transform t_bs = fk_space(model, q).inverse();
  return se3::adjoint(t_bs) * space_jacobian(model, q);
}

}  // namespace nlarm::arm
