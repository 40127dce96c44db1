#include "nlarm/service.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include <httplib.h>

namespace nlarm::service {
namespace {

using nlohmann::json;

ServiceConfig fast_config(double time_scale = 0.0) {
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.time_scale = time_scale;
  cfg.stream_rate_hz = 100;
  return cfg;
}

class Running {
 public:
  explicit Running(ServiceConfig cfg) : svc(std::move(cfg)) {
    svc.start();
    client = std::make_unique<httplib::Client>("127.0.0.1", svc.port());
    client->set_read_timeout(10, 0);
  }
  json post(const std::string& text) {
    auto r = client->Post("/api/command", json{{"text", text}}.dump(), "application/json");
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    return json::parse(r->body);
  }
  json get(const std::string& path) {
    auto r = client->Get(path);
    EXPECT_TRUE(r);
    return json::parse(r->body);
  }
  void wait_idle() {
    for (int i = 0; i < 2000 && svc.busy(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    ASSERT_FALSE(svc.busy());
  }

  Service svc;
  std::unique_ptr<httplib::Client> client;
};

TEST(Service, HealthSceneAndState) {
  Running s(fast_config());
  const auto health = s.get("/api/health");
  EXPECT_EQ(health.at("status"), "ok");
  EXPECT_EQ(health.at("backend"), "rule");

  const auto scene = s.get("/api/scene");
  EXPECT_EQ(scene.at("objects").size(), 3u);
  EXPECT_DOUBLE_EQ(scene.at("model").at("lengths").at("L1").get<double>(), 0.08945);
  EXPECT_EQ(scene.at("model").at("joint_limits").size(), 4u);

  const auto state = s.get("/api/state");
  EXPECT_NEAR(state.at("ee_position")[0].get<double>(), 0.22105, 1e-12);
  EXPECT_EQ(state.at("gripper"), "open");
  EXPECT_TRUE(state.at("held_object").is_null());
}

TEST(Service, CommandResponses) {
  Running s(fast_config());
  const auto left = s.post("move to the left");
  EXPECT_TRUE(left.at("accepted").get<bool>());
  EXPECT_EQ(left.at("intent").at("action"), "move");
  EXPECT_EQ(left.at("intent").at("direction"), "left");
  EXPECT_EQ(left.at("queue_position"), 0);

  const auto empty = s.post("");
  EXPECT_FALSE(empty.at("accepted").get<bool>());
  EXPECT_EQ(empty.at("error"), "empty command");

  const auto unclear = s.post("move to where you won't be scared");
  EXPECT_FALSE(unclear.at("accepted").get<bool>());
  EXPECT_TRUE(unclear.contains("error"));
}

TEST(Service, MalformedRequestsGetStructured4xx) {
  Running s(fast_config());
  auto check = [&](const std::string& body, const std::string& code) {
    auto r = s.client->Post("/api/command", body, "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400) << body;
    const auto j = json::parse(r->body);
    EXPECT_EQ(j.at("error").at("code"), code) << body;
    EXPECT_EQ(j.at("error").at("status"), 400);
  };
  check("{not json", "invalid_json");
  check("{}", "invalid_request");
  check(R"({"text": 5})", "invalid_request");
  check(R"(["move up"])", "invalid_request");
  check(R"({"text": "move up", "transcript_confidence": 2})", "invalid_request");

  auto r = s.client->Get("/api/nothing");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(json::parse(r->body).at("error").at("code"), "not_found");

  // The service keeps working after bad input.
  EXPECT_TRUE(s.post("go up").at("accepted").get<bool>());
}

TEST(Service, PickShowsUpOnTheStream) {
  Running s(fast_config(0.05));
  const auto resp = s.post("pick up the red cube");
  ASSERT_TRUE(resp.at("accepted").get<bool>()) << resp.dump();

  bool saw_closed = false, saw_held_idle = false;
  std::string buffer;
  httplib::Client stream("127.0.0.1", s.svc.port());
  stream.set_read_timeout(10, 0);
  stream.Get("/api/state/stream", [&](const char* data, std::size_t n) {
    buffer.append(data, n);
    for (auto pos = buffer.find("\n\n"); pos != std::string::npos; pos = buffer.find("\n\n")) {
      const std::string event = buffer.substr(0, pos);
      buffer.erase(0, pos + 2);
      if (event.rfind("data: ", 0) != 0) continue;
      const auto tick = json::parse(event.substr(6));
      if (tick.at("gripper") == "closed") saw_closed = true;
      if (tick.at("held_object") == "red-1" && !tick.at("busy").get<bool>()) saw_held_idle = true;
    }
    return !saw_held_idle;
  });
  EXPECT_TRUE(saw_closed);
  EXPECT_TRUE(saw_held_idle);
}

TEST(Service, QueueKeepsAcceptanceOrder) {
  Running s(fast_config(0.2));
  const std::vector<std::string> texts = {"move to the left", "go up", "move to the right", "go down"};
  std::size_t expected_pos = 0;
  for (const auto& t : texts) {
    const auto r = s.post(t);
    ASSERT_TRUE(r.at("accepted").get<bool>());
    EXPECT_EQ(r.at("queue_position").get<std::size_t>(), expected_pos++);
  }
  s.wait_idle();

  // Same commands applied one after another through the shared pipeline.
  const auto& p = s.svc.pipeline();
  exec::ArmState ref = p.initial_state();
  for (const auto& t : texts) {
    ref = exec::execute(p.process(t, ref).plan, ref, p.model(), p.executor_config(), [](const exec::ArmState&) {});
  }
  EXPECT_EQ(s.svc.snapshot().q, ref.q);
}

TEST(Service, StopPreemptsAndClearsQueue) {
  Running s(fast_config(1.0));
  ASSERT_TRUE(s.post("go to sleep").at("accepted").get<bool>());
  ASSERT_TRUE(s.post("go home").at("accepted").get<bool>());
  std::this_thread::sleep_for(std::chrono::milliseconds(150));
  const auto stop = s.post("stop");
  EXPECT_TRUE(stop.at("accepted").get<bool>());
  EXPECT_FALSE(s.svc.busy());
  const auto q = s.svc.snapshot().q;
  const auto sleep_q = s.svc.pipeline().executor_config().sleep_q;
  EXPECT_GT((q - sleep_q).cwiseAbs().maxCoeff(), 0.1);
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  EXPECT_EQ(s.svc.snapshot().q, q);

  // Planning resumes from where the arm stopped.
  EXPECT_TRUE(s.post("go home").at("accepted").get<bool>());
}

TEST(Service, ResetRestoresScene) {
  Running s(fast_config());
  ASSERT_TRUE(s.post("pick up the green cube").at("accepted").get<bool>());
  s.wait_idle();
  ASSERT_EQ(s.svc.snapshot().held_object, "green-1");
  const double t_before = s.svc.snapshot().t;
  auto r = s.client->Post("/api/scene/reset", "", "application/json");
  ASSERT_TRUE(r);
  const auto state = json::parse(r->body);
  EXPECT_TRUE(state.at("held_object").is_null());
  EXPECT_EQ(s.svc.snapshot().objects, s.svc.pipeline().initial_state().objects);
  EXPECT_GE(s.svc.snapshot().t, t_before);
}

TEST(Service, LatencyMetrics) {
  Running s(fast_config());
  s.post("go up");
  s.post("go down");
  const auto m = s.get("/api/metrics/latency");
  EXPECT_EQ(m.at("interpret_s").at("count"), 2);
  EXPECT_TRUE(m.at("plan_s").contains("stdev"));
  EXPECT_EQ(m.at("recent").size(), 2u);
}

TEST(Service, FailsFastOnBusyPortAndBadScene) {
  Service first(fast_config());
  const int port = first.bind();
  ServiceConfig cfg = fast_config();
  cfg.port = port;
  Service second(cfg);
  EXPECT_THROW(second.bind(), std::runtime_error);

  cfg.scene_path = "/nonexistent/scene.json";
  EXPECT_THROW(Service{cfg}, std::invalid_argument);

  const auto bad = std::filesystem::temp_directory_path() / "nlarm_bad_scene.json";
  std::ofstream(bad) << R"({"objects": [{"id": "a", "color": "purple", "size_m": 0.03, "position_cam": [0,0,0.5]}],
                           "extrinsics": {"rotation": [1,0,0,0,1,0,0,0,1], "translation": [0,0,0]}})";
  cfg.scene_path = bad;
  EXPECT_THROW(Service{cfg}, scene::SceneError);
}

TEST(ServiceConfig, JsonRoundTripAndRelativePaths) {
  ServiceConfig cfg;
  cfg.port = 9123;
  cfg.time_scale = 0.5;
  cfg.ik.max_iter = 50;
  cfg.executor.rate_hz = 40;
  cfg.backend.kind = intent::BackendKind::scripted_gpt4;
  const auto back = service_config_from_json(to_json(cfg));
  EXPECT_EQ(back.port, 9123);
  EXPECT_EQ(back.time_scale, 0.5);
  EXPECT_EQ(back.ik.max_iter, 50);
  EXPECT_EQ(back.executor.rate_hz, 40);
  EXPECT_EQ(back.backend.kind, intent::BackendKind::scripted_gpt4);

  const auto dir = std::filesystem::temp_directory_path() / "nlarm_cfg_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "service.json") << R"({"port": 0, "scene_path": "scene.json"})";
  EXPECT_EQ(load_service_config(dir / "service.json").scene_path, dir / "scene.json");

  EXPECT_THROW(service_config_from_json({{"port", "eighty"}}), std::invalid_argument);
  ServiceConfig bad;
  bad.port = 70000;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace nlarm::service
