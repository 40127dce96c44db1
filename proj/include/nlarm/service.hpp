#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "nlarm/pipeline.hpp"

namespace httplib {
class Server;
}

namespace nlarm::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path scene_path;  // empty: bundled demo scene
  std::filesystem::path model_path;  // empty: built-in PX100 geometry
  intent::LlmBackendConfig backend;
  ik::IKParams ik;
  exec::ExecutorConfig executor;
  double stream_rate_hz = 20.0;
  /// Wall-clock seconds per simulated second; 0 runs plans as fast as possible.
  double time_scale = 1.0;

  /// Throws std::invalid_argument on bad values or missing files.
  void validate() const;
};

ServiceConfig service_config_from_json(const nlohmann::json& doc);
ServiceConfig load_service_config(const std::filesystem::path& path);
nlohmann::json to_json(const ServiceConfig& cfg);

/// Builds the shared pipeline for a configuration (scene, model, backend).
std::unique_ptr<pipeline::Pipeline> make_pipeline(const ServiceConfig& cfg);

struct CommandResponse {
  std::uint64_t id = 0;
  pipeline::Outcome outcome;
  std::optional<std::size_t> queue_position;  // plans ahead of this one; set when queued
};

nlohmann::json to_json(const CommandResponse& r);

/// HTTP front end plus the single executor worker that owns the arm state.
class Service {
 public:
  /// Loads the scene, model and backend; throws on any invalid input.
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket. Throws std::runtime_error if the port is taken.
  int bind();
  /// Serves on a background thread (binds first if needed).
  void start();
  /// Stops the worker and the server; safe to call more than once.
  void stop();
  bool stopped() const { return stopped_; }
  int port() const { return port_; }

  CommandResponse submit(const std::string& text);
  exec::ArmState snapshot() const;
  std::uint64_t sequence() const;
  bool busy() const;
  /// Cancels running and queued plans, restores the initial state.
  void reset();
  const pipeline::Pipeline& pipeline() const { return *pipeline_; }

  nlohmann::json state_json() const;
  nlohmann::json scene_json() const;
  nlohmann::json latency_json() const;
  nlohmann::json health_json() const;

 private:
  struct Job {
    std::uint64_t id;
    exec::MotionPlan plan;
  };
  struct LatencySample {
    std::string text;
    double interpret_s, plan_s;
    bool accepted;
  };

  void worker_loop();
  void preempt_and_wait(std::unique_lock<std::mutex>& lock);
  void publish(const exec::ArmState& s);
  void install_routes();

  ServiceConfig cfg_;
  std::unique_ptr<pipeline::Pipeline> pipeline_;
  std::unique_ptr<httplib::Server> http_;
  int port_ = -1;
  std::thread http_thread_;
  std::thread worker_;
  std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();

  // Queue and planning state.
  mutable std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  std::deque<Job> queue_;
  bool running_job_ = false;
  bool shutting_down_ = false;
  std::atomic<bool> preempt_{false};
  exec::ArmState planned_;  // state after every queued plan completes
  std::uint64_t next_id_ = 1;
  std::deque<LatencySample> latency_;

  // Published snapshot.
  mutable std::mutex snap_mu_;
  std::condition_variable snap_cv_;
  exec::ArmState snapshot_;
  std::uint64_t seq_ = 0;

  std::atomic<bool> busy_{false};
  std::atomic<bool> stopped_{false};
};

}  // namespace nlarm::service
