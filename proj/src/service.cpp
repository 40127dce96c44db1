#include "nlarm/service.hpp"

#include <cmath>
#include <fstream>

#include <httplib.h>

#include "nlarm/stats.hpp"

namespace nlarm::service {

using nlohmann::json;

namespace {

ik::IKParams ik_params_from_json(const json& j) {
  ik::IKParams p;
  p.eps_omega = j.value("eps_omega", p.eps_omega);
  p.eps_v = j.value("eps_v", p.eps_v);
  p.max_iter = j.value("max_iter", p.max_iter);
  p.sv_cutoff = j.value("sv_cutoff", p.sv_cutoff);
  p.step_scale = j.value("step_scale", p.step_scale);
  p.validate();
  return p;
}

json to_json(const ik::IKParams& p) {
  return {{"eps_omega", p.eps_omega},
          {"eps_v", p.eps_v},
          {"max_iter", p.max_iter},
          {"sv_cutoff", p.sv_cutoff},
          {"step_scale", p.step_scale}};
}

json error_body(int status, const std::string& code, const std::string& message) {
  return {{"error", {{"status", status}, {"code", code}, {"message", message}}}};
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json summary_json(const std::vector<double>& v) {
  json j = {{"count", v.size()}};
  if (v.empty()) return j;
  double sum = 0, mx = 0;
  for (double x : v) {
    sum += x;
    mx = std::max(mx, x);
  }
  j["mean"] = sum / static_cast<double>(v.size());
  j["max"] = mx;
  if (v.size() >= 2) j["stdev"] = stats::summarize(v).stdev;
  return j;
}

constexpr std::size_t kLatencyWindow = 200;

}  // namespace

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw std::invalid_argument("service: port must be in 0..65535");
  if (!(stream_rate_hz > 0)) throw std::invalid_argument("service: stream_rate_hz must be positive");
  if (!(time_scale >= 0) || !std::isfinite(time_scale)) throw std::invalid_argument("service: time_scale must be >= 0");
  if (!scene_path.empty() && !std::filesystem::exists(scene_path)) {
    throw std::invalid_argument("service: scene file not found: " + scene_path.string());
  }
  if (!model_path.empty() && !std::filesystem::exists(model_path)) {
    throw std::invalid_argument("service: model file not found: " + model_path.string());
  }
  ik.validate();
  executor.validate();
  backend.validate();
}

ServiceConfig service_config_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("service config: expected an object");
  ServiceConfig cfg;
  try {
    cfg.host = doc.value("host", cfg.host);
    cfg.port = doc.value("port", cfg.port);
    cfg.scene_path = doc.value("scene_path", std::string());
    cfg.model_path = doc.value("model_path", std::string());
    cfg.stream_rate_hz = doc.value("stream_rate_hz", cfg.stream_rate_hz);
    cfg.time_scale = doc.value("time_scale", cfg.time_scale);
    if (doc.contains("backend")) cfg.backend = intent::backend_config_from_json(doc["backend"]);
    if (doc.contains("ik")) cfg.ik = ik_params_from_json(doc["ik"]);
    if (doc.contains("executor")) cfg.executor = exec::executor_config_from_json(doc["executor"]);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("service config: ") + e.what());
  } catch (const intent::IntentError& e) {
    throw std::invalid_argument(e.what());
  }
  return cfg;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  ServiceConfig cfg = service_config_from_json(doc);
  // Relative paths are taken from the config file's directory.
  const auto base = path.parent_path();
  for (auto* p : {&cfg.scene_path, &cfg.model_path, &cfg.backend.script_path, &cfg.backend.cases_path,
                  &cfg.backend.prompt_path}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return cfg;
}

json to_json(const ServiceConfig& cfg) {
  return {{"host", cfg.host},
          {"port", cfg.port},
          {"scene_path", cfg.scene_path.string()},
          {"model_path", cfg.model_path.string()},
          {"backend", intent::to_json(cfg.backend)},
          {"ik", to_json(cfg.ik)},
          {"executor", exec::to_json(cfg.executor)},
          {"stream_rate_hz", cfg.stream_rate_hz},
          {"time_scale", cfg.time_scale}};
}

std::unique_ptr<pipeline::Pipeline> make_pipeline(const ServiceConfig& cfg) {
  cfg.validate();
  auto model = cfg.model_path.empty() ? arm::build_px100() : arm::load_model(cfg.model_path);
  auto scene = scene::load_scene_file(cfg.scene_path.empty() ? scene::demo_scene_path() : cfg.scene_path);
  return std::make_unique<pipeline::Pipeline>(std::move(model), std::move(scene), intent::make_interpreter(cfg.backend),
                                              cfg.ik, cfg.executor);
}

json to_json(const CommandResponse& r) {
  json j = pipeline::to_json(r.outcome);
  j["id"] = r.id;
  if (r.queue_position) j["queue_position"] = *r.queue_position;
  return j;
}

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  pipeline_ = make_pipeline(cfg_);
  snapshot_ = planned_ = pipeline_->initial_state();
  http_ = std::make_unique<httplib::Server>();
  install_routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  if (port_ >= 0) return port_;
  if (cfg_.port == 0) {
    port_ = http_->bind_to_any_port(cfg_.host);
  } else if (http_->bind_to_port(cfg_.host, cfg_.port)) {
    port_ = cfg_.port;
  }
  if (port_ < 0) {
    throw std::runtime_error("cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port) + " (port in use?)");
  }
  return port_;
}

void Service::start() {
  bind();
  worker_ = std::thread([this] { worker_loop(); });
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void Service::stop() {
  if (stopped_.exchange(true)) return;
  {
    std::lock_guard lock(mu_);
    shutting_down_ = true;
    preempt_ = true;
  }
  work_cv_.notify_all();
  {
    std::lock_guard lock(snap_mu_);
  }
  snap_cv_.notify_all();
  http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  if (worker_.joinable()) worker_.join();
}

void Service::publish(const exec::ArmState& s) {
  {
    std::lock_guard lock(snap_mu_);
    snapshot_ = s;
    ++seq_;
  }
  snap_cv_.notify_all();
}

exec::ArmState Service::snapshot() const {
  std::lock_guard lock(snap_mu_);
  return snapshot_;
}

std::uint64_t Service::sequence() const {
  std::lock_guard lock(snap_mu_);
  return seq_;
}

bool Service::busy() const { return busy_; }

void Service::worker_loop() {
  const double tick_sleep = cfg_.time_scale / cfg_.executor.rate_hz;
  for (;;) {
    Job job;
    {
      std::unique_lock lock(mu_);
      work_cv_.wait(lock, [&] { return shutting_down_ || !queue_.empty(); });
      if (shutting_down_) return;
      job = std::move(queue_.front());
      queue_.pop_front();
      running_job_ = true;
    }
    exec::execute(
        job.plan, snapshot(), pipeline_->model(), cfg_.executor,
        [&](const exec::ArmState& s) {
          publish(s);
          if (tick_sleep > 0) std::this_thread::sleep_for(std::chrono::duration<double>(tick_sleep));
        },
        [&] { return preempt_.load(); });
    {
      std::lock_guard lock(mu_);
      running_job_ = false;
      busy_ = !queue_.empty();
    }
    idle_cv_.notify_all();
    {
      std::lock_guard lock(snap_mu_);
    }
    snap_cv_.notify_all();
  }
}

void Service::preempt_and_wait(std::unique_lock<std::mutex>& lock) {
  queue_.clear();
  preempt_ = true;
  idle_cv_.wait(lock, [&] { return !running_job_; });
  preempt_ = false;
  busy_ = false;
  planned_ = snapshot();
}

CommandResponse Service::submit(const std::string& text) {
  std::unique_lock lock(mu_);
  CommandResponse r;
  r.id = next_id_++;
  r.outcome = pipeline_->process(text, planned_);
  latency_.push_back({text, r.outcome.interpret_s, r.outcome.plan_s, r.outcome.accepted});
  if (latency_.size() > kLatencyWindow) latency_.pop_front();
  if (!r.outcome.accepted) return r;

  if (r.outcome.stop) {
    preempt_and_wait(lock);
    return r;
  }
  // Plans are deterministic, so the state after the queue drains is known now.
  planned_ = exec::execute(r.outcome.plan, planned_, pipeline_->model(), cfg_.executor, [](const exec::ArmState&) {});
  r.queue_position = queue_.size() + (running_job_ ? 1 : 0);
  queue_.push_back({r.id, r.outcome.plan});
  busy_ = true;
  work_cv_.notify_one();
  return r;
}

void Service::reset() {
  std::unique_lock lock(mu_);
  preempt_and_wait(lock);
  exec::ArmState s = pipeline_->initial_state();
  s.t = snapshot().t;
  planned_ = s;
  publish(s);
}

json Service::state_json() const {
  std::uint64_t seq;
  exec::ArmState s;
  {
    std::lock_guard lock(snap_mu_);
    s = snapshot_;
    seq = seq_;
  }
  json j = exec::state_to_json(s, pipeline_->model());
  j["seq"] = seq;
  j["busy"] = busy();
  return j;
}

json Service::scene_json() const {
  json objects = json::array();
  for (const auto& o : snapshot().objects) {
    objects.push_back({{"id", o.id},
                       {"color", intent::to_string(o.color)},
                       {"size_m", o.size_m},
                       {"position_base", {o.position_base.x(), o.position_base.y(), o.position_base.z()}}});
  }
  return {{"scene", scene::to_json(pipeline_->scene())},
          {"objects", objects},
          {"model", arm::model_to_json(pipeline_->model())},
          {"executor", exec::to_json(cfg_.executor)}};
}

json Service::latency_json() const {
  std::lock_guard lock(mu_);
  std::vector<double> interp, plan;
  json recent = json::array();
  for (const auto& s : latency_) {
    interp.push_back(s.interpret_s);
    plan.push_back(s.plan_s);
    recent.push_back({{"text", s.text}, {"interpret_s", s.interpret_s}, {"plan_s", s.plan_s}, {"accepted", s.accepted}});
  }
  return {{"backend", pipeline_->interpreter().name()},
          {"interpret_s", summary_json(interp)},
          {"plan_s", summary_json(plan)},
          {"recent", recent}};
}

json Service::health_json() const {
  std::size_t queued;
  {
    std::lock_guard lock(mu_);
    queued = queue_.size();
  }
  return {{"status", "ok"},
          {"backend", pipeline_->interpreter().name()},
          {"busy", busy()},
          {"queue_length", queued},
          {"uptime_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count()}};
}

void Service::install_routes() {
  auto& s = *http_;
  s.set_payload_max_length(64 * 1024);
  // SO_REUSEADDR only: with SO_REUSEPORT a second instance could share the port.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  s.Post("/api/command", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      return send_json(res, error_body(400, "invalid_json", "request body is not valid JSON"), 400);
    }
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
      return send_json(res, error_body(400, "invalid_request", "expected {\"text\": string}"), 400);
    }
    if (body.contains("transcript_confidence") && !body["transcript_confidence"].is_null()) {
      const auto& c = body["transcript_confidence"];
      if (!c.is_number() || c.get<double>() < 0 || c.get<double>() > 1) {
        return send_json(res, error_body(400, "invalid_request", "transcript_confidence must be a number in [0, 1]"), 400);
      }
    }
    send_json(res, to_json(submit(body["text"].get<std::string>())));
  });

  s.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) { send_json(res, state_json()); });

  s.Get("/api/state/stream", [this](const httplib::Request&, httplib::Response& res) {
    res.set_header("Cache-Control", "no-cache");
    const auto period = std::chrono::duration<double>(1.0 / cfg_.stream_rate_hz);
    struct Cursor {
      std::uint64_t seq = ~0ull;
      bool busy = false;
      std::chrono::steady_clock::time_point last_sent{};
    };
    auto cursor = std::make_shared<Cursor>();
    res.set_chunked_content_provider("text/event-stream", [this, period, cursor](std::size_t, httplib::DataSink& sink) {
      const auto next_slot = cursor->last_sent + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      if (auto now = std::chrono::steady_clock::now(); now < next_slot) std::this_thread::sleep_until(next_slot);
      bool changed;
      {
        std::unique_lock lock(snap_mu_);
        changed = snap_cv_.wait_for(lock, std::chrono::seconds(1), [&] {
          return stopped_ || seq_ != cursor->seq || busy_ != cursor->busy;
        });
      }
      if (stopped_) {
        sink.done();
        return false;
      }
      std::string msg;
      if (changed) {
        const json j = state_json();
        cursor->seq = j["seq"].get<std::uint64_t>();
        cursor->busy = j["busy"].get<bool>();
        cursor->last_sent = std::chrono::steady_clock::now();
        msg = "data: " + j.dump() + "\n\n";
      } else {
        msg = ": keepalive\n\n";
      }
      return sink.write(msg.data(), msg.size());
    });
  });

  s.Get("/api/scene", [this](const httplib::Request&, httplib::Response& res) { send_json(res, scene_json()); });

  s.Post("/api/scene/reset", [this](const httplib::Request&, httplib::Response& res) {
    reset();
    send_json(res, state_json());
  });

  s.Get("/api/metrics/latency", [this](const httplib::Request&, httplib::Response& res) { send_json(res, latency_json()); });

  s.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) { send_json(res, health_json()); });

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found" : "http_" + std::to_string(res.status);
    send_json(res, error_body(res.status, code, req.method + " " + req.path), res.status);
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send_json(res, error_body(500, "internal", message), 500);
  });
}

}  // namespace nlarm::service
