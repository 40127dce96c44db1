#include "nlarm/cli.hpp"

#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "nlarm/pipeline.hpp"
#include "nlarm/service.hpp"
#include "nlarm/stats.hpp"

namespace nlarm::cli {

using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

std::vector<double> parse_list(const std::string& text, std::size_t n, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": '" + item + "' is not a number");
    }
  }
  if (out.size() != n) throw UsageError(flag + ": expected " + std::to_string(n) + " comma-separated values");
  return out;
}

std::string num(double v, int decimals = 5) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << v;
  std::string s = os.str();
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

std::string join(const Eigen::VectorXd& v, int decimals = 5, const char* sep = " ") {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? sep : "") + num(v[i], decimals);
  return out;
}

json array_of(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

struct BackendOptions {
  std::string kind;
  std::string endpoint;
  std::string llm_model = "gpt-4";
  std::string credential_env = "OPENAI_API_KEY";
  double timeout_s = 10.0;
  int delay_ms = 0;
  std::string script;

  void add_to(CLI::App* app, const std::string& default_kind) {
    kind = default_kind;
    app->add_option("--backend", kind, "Intent backend")
        ->check(CLI::IsMember({"rule", "scripted_gpt35", "scripted_gpt4", "live"}))
        ->capture_default_str();
    app->add_option("--endpoint", endpoint, "Chat-completions URL (live backend)");
    app->add_option("--llm-model", llm_model, "Model name sent to the live backend")->capture_default_str();
    app->add_option("--credential-env", credential_env, "Variable holding the API key")->capture_default_str();
    app->add_option("--timeout", timeout_s, "Live request timeout, seconds")->capture_default_str();
    app->add_option("--delay-ms", delay_ms, "Delay injected into scripted responses")->check(CLI::NonNegativeNumber);
    app->add_option("--script", script, "Scripted response file");
  }

  intent::LlmBackendConfig config() const {
    intent::LlmBackendConfig cfg;
    cfg.kind = *intent::parse_backend_kind(kind);
    cfg.endpoint = endpoint;
    cfg.model = llm_model;
    cfg.credential_env = credential_env;
    cfg.timeout_s = timeout_s;
    cfg.injected_delay = std::chrono::milliseconds(delay_ms);
    cfg.script_path = script;
    return cfg;
  }
};

struct WorldOptions {
  std::string scene;
  std::string model;

  void add_to(CLI::App* app) {
    app->add_option("--scene", scene, "Scene JSON (default: bundled demo scene)")->check(CLI::ExistingFile);
    app->add_option("--model", model, "Arm model JSON (default: built-in geometry)")->check(CLI::ExistingFile);
  }
  arm::ArmModel load_model() const { return model.empty() ? arm::build_px100() : arm::load_model(model); }
  scene::Scene load_scene() const { return scene::load_scene_file(scene.empty() ? scene::demo_scene_path() : std::filesystem::path(scene)); }
};

pipeline::Pipeline make_pipeline(const WorldOptions& world, const BackendOptions& backend) {
  auto cfg = backend.config();
  cfg.validate();
  return pipeline::Pipeline(world.load_model(), world.load_scene(), intent::make_interpreter(cfg));
}

std::string describe_state(const exec::ArmState& s, const arm::ArmModel& model) {
  const auto ee = arm::fk_space(model, s.q);
  std::ostringstream os;
  os << "q=[" << join(s.q, 3, ", ") << "] ee=(" << join(ee.position(), 4, ", ") << ") pitch=" << num(exec::ee_pitch(ee), 3)
     << " gripper=" << exec::to_string(s.gripper) << " held=" << s.held_object.value_or("-") << " t=" << num(s.t, 2);
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_fk(const std::string& q_text, const WorldOptions& world, bool as_json, std::ostream& out) {
  const auto v = parse_list(q_text, 4, "--q");
  const arm::JointVector q(v[0], v[1], v[2], v[3]);
  const auto model = world.load_model();
  const auto t = arm::fk_space(model, q);
  if (as_json) {
    json rows = json::array();
    for (int r = 0; r < 4; ++r) rows.push_back(array_of(t.matrix().row(r).transpose()));
    out << json{{"q", array_of(q)},
                {"position", array_of(t.position())},
                {"pitch", exec::ee_pitch(t)},
                {"within_limits", model.within_limits(q)},
                {"T", rows}}
               .dump(2)
        << "\n";
    return kExitOk;
  }
  out << "position: " << join(t.position()) << "\n";
  out << "pitch: " << num(exec::ee_pitch(t)) << "\n";
  out << "T:\n";
  for (int r = 0; r < 4; ++r) out << "  " << join(t.matrix().row(r).transpose()) << "\n";
  if (!model.within_limits(q)) out << "warning: q is outside the joint limits\n";
  return kExitOk;
}

int cmd_ik(const std::string& pos_text, double pitch, const std::string& seed_text, const WorldOptions& world,
           bool as_json, std::ostream& out, std::ostream& err) {
  const auto p = parse_list(pos_text, 3, "--pos");
  const se3::Vec3 pos(p[0], p[1], p[2]);
  const auto model = world.load_model();
  se3::Transform target;
  try {
    target = ik::reachable_target(pos, pitch);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--pos: ") + e.what());
  }

  ik::IKResult res;
  if (!seed_text.empty()) {
    const auto s = parse_list(seed_text, 4, "--seed");
    res = ik::ik_newton_raphson(model, target, arm::JointVector(s[0], s[1], s[2], s[3]));
  } else {
    try {
      res.q = exec::solve_pose(model, target, arm::JointVector::Zero(), {});
      res.converged = true;
    } catch (const exec::PlanningError& e) {
      res = ik::ik_newton_raphson(model, target, arm::JointVector(std::atan2(pos.y(), pos.x()), 0, 0, 0));
    }
  }
  const auto reached = arm::fk_space(model, res.q);
  const auto error = se3::log(reached.inverse() * target);
  const bool in_limits = model.within_limits(res.q);
  if (as_json) {
    out << json{{"converged", res.converged},
                {"q", array_of(res.q)},
                {"within_limits", in_limits},
                {"position", array_of(reached.position())},
                {"error_omega", error.omega.norm()},
                {"error_v", error.v.norm()}}
               .dump(2)
        << "\n";
  } else {
    out << "converged: " << (res.converged ? "yes" : "no") << "\n";
    out << "q: " << join(res.q) << "\n";
    out << "reached: " << join(reached.position()) << "\n";
    out << "error: |w| = " << std::scientific << std::setprecision(2) << error.omega.norm()
        << " rad, |v| = " << error.v.norm() << " m\n"
        << std::defaultfloat;
    out << "within limits: " << (in_limits ? "yes" : "no") << "\n";
  }
  if (!res.converged) {
    err << "ik: no converged solution for the requested pose\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_repl(const WorldOptions& world, const BackendOptions& backend, std::istream& in, std::ostream& out) {
  const auto p = make_pipeline(world, backend);
  exec::ArmState state = p.initial_state();
  const bool interactive = &in == &std::cin && ::isatty(STDIN_FILENO);
  out << "backend: " << p.interpreter().name() << "\n" << "state: " << describe_state(state, p.model()) << "\n";
  std::string line;
  int trial = 0;
  while (true) {
    if (interactive) out << "> " << std::flush;
    if (!std::getline(in, line)) break;
    if (line == "quit" || line == "exit") break;
    const auto o = p.process(line, state, trial++);
    if (o.intent) out << "intent: " << intent::to_json(*o.intent).dump() << "\n";
    if (!o.accepted) {
      out << "error: " << o.error << "\n";
      continue;
    }
    out << "plan: " << (o.plan_summary.empty() ? "(none)" : o.plan_summary) << "\n";
    state = exec::execute(o.plan, state, p.model(), p.executor_config(), [](const exec::ArmState&) {});
    out << "state: " << describe_state(state, p.model()) << "\n";
  }
  return kExitOk;
}

int cmd_serve(service::ServiceConfig cfg, std::ostream& out) {
  const std::string host = cfg.host;
  service::Service svc(std::move(cfg));
  const int port = svc.bind();
  svc.start();
  out << "listening on http://" << host << ":" << port << " (backend " << svc.pipeline().interpreter().name() << ")" << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  svc.stop();
  out << "stopped" << std::endl;
  return kExitOk;
}

int cmd_eval(const BackendOptions& backend, int trials, const std::string& cases, bool as_json, std::ostream& out) {
  auto cfg = backend.config();
  cfg.cases_path = cases;
  cfg.validate();
  const auto interp = intent::make_interpreter(cfg);
  const auto grid = intent::evaluate_table1(*interp, intent::load_eval_cases(cases), trials);
  if (as_json) {
    out << intent::to_json(grid).dump(2) << "\n";
  } else {
    out << "backend: " << grid.backend << "\n" << intent::format_grid(grid);
  }
  return kExitOk;
}

int cmd_stats(const std::string& fixture, bool as_json, std::ostream& out) {
  const auto report = stats::reproduce_table2(stats::load_latency_table(fixture));
  if (as_json) {
    out << stats::to_json(report).dump(2) << "\n";
  } else {
    out << stats::format_table2(report);
  }
  return kExitOk;
}

int cmd_pick_demo(const WorldOptions& world, const BackendOptions& backend, const std::string& color_opt, int trials,
                  bool as_json, std::ostream& out) {
  const auto p = make_pipeline(world, backend);
  std::vector<intent::Color> colors;
  if (color_opt == "all") {
    colors = {intent::Color::red, intent::Color::blue, intent::Color::green};
  } else {
    colors = {*intent::parse_color(color_opt)};
  }

  json rows = json::array();
  int successes = 0, total = 0;
  std::ostringstream table;
  table << std::left << std::setw(10) << "Command";
  for (int t = 1; t <= trials; ++t) table << std::setw(9) << ("Trial " + std::to_string(t));
  table << "\n";
  int command = 1;
  for (auto c : colors) {
    std::string name(intent::to_string(c));
    name[0] = static_cast<char>(std::toupper(name[0]));
    const std::string text = "Pick up the " + name + " Cube";
    table << std::setw(10) << command;
    json cells = json::array();
    for (int t = 0; t < trials; ++t) {
      exec::ArmState state = p.initial_state();
      const auto o = p.process(text, state, t);
      bool ok = false;
      std::string detail;
      if (!o.accepted) {
        detail = o.error;
      } else {
        const auto target = p.detect(state, c);
        const std::string id = target.empty() ? "" : scene::nearest(target)->object_id;
        const double z0 = id.empty() ? 0 : state.find(id)->position_base.z();
        state = exec::execute(o.plan, state, p.model(), p.executor_config(), [](const exec::ArmState&) {});
        const double lift = id.empty() ? 0 : state.find(id)->position_base.z() - z0;
        ok = state.held_object == id && !id.empty() && lift >= 0.05;
        detail = "held=" + state.held_object.value_or("-") + " lift=" + num(lift, 3) + " m";
      }
      successes += ok ? 1 : 0;
      ++total;
      table << std::setw(9) << (ok ? "PASS" : "FAIL");
      cells.push_back({{"pass", ok}, {"detail", detail}});
    }
    table << "\n";
    rows.push_back({{"command", command}, {"text", text}, {"trials", cells}});
    ++command;
  }
  if (as_json) {
    out << json{{"backend", p.interpreter().name()}, {"rows", rows}, {"successes", successes}, {"total", total}}.dump(2)
        << "\n";
  } else {
    out << table.str();
    for (std::size_t i = 0; i < rows.size(); ++i) out << "Command " << i + 1 << ": " << rows[i]["text"].get<std::string>() << "\n";
    out << "successes: " << successes << "/" << total << "\n";
  }
  return successes == total ? kExitOk : kExitFailure;
}

int cmd_bench(const WorldOptions& world, const BackendOptions& backend, const std::string& against, int reps,
              std::vector<std::string> texts, bool as_json, std::ostream& out, std::ostream& err) {
  if (texts.empty()) {
    for (const auto& c : intent::load_eval_cases()) texts.push_back(c.text);
  }
  auto run = [&](const BackendOptions& b) {
    const auto p = make_pipeline(world, b);
    std::vector<pipeline::TimingResult> results;
    for (const auto& t : texts) {
      results.push_back(pipeline::time_pipeline(p, t, reps));
      for (const auto& w : results.back().warnings) err << "warning: [" << b.kind << "] " << t << ": " << w << "\n";
    }
    return results;
  };
  const auto primary = run(backend);
  std::optional<std::vector<pipeline::TimingResult>> secondary;
  if (!against.empty()) {
    BackendOptions other = backend;
    other.kind = against;
    secondary = run(other);
  }

  auto mean_of = [](const pipeline::TimingResult& r) -> std::optional<double> {
    if (r.samples_s.empty()) return std::nullopt;
    double s = 0;
    for (double v : r.samples_s) s += v;
    return s / static_cast<double>(r.samples_s.size());
  };

  json rows = json::array();
  std::vector<double> a, b;
  std::ostringstream table;
  table << std::left << std::setw(8) << "Command" << std::right << std::setw(6) << "n" << std::setw(12) << "mean_ms"
        << std::setw(12) << "stdev_ms";
  if (secondary) table << std::setw(12) << "against_ms";
  table << "  text\n";
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto& r = primary[i];
    const auto m = mean_of(r);
    json row = {{"text", texts[i]}, {"samples_s", r.samples_s}, {"excluded", r.warnings.size()}};
    table << std::left << std::setw(8) << i + 1 << std::right << std::setw(6) << r.samples_s.size() << std::setw(12)
          << (m ? num(*m * 1e3, 3) : "-") << std::setw(12)
          << (r.samples_s.size() >= 2 ? num(stats::summarize(r.samples_s).stdev * 1e3, 3) : "-");
    if (secondary) {
      const auto m2 = mean_of((*secondary)[i]);
      table << std::setw(12) << (m2 ? num(*m2 * 1e3, 3) : "-");
      row["against_samples_s"] = (*secondary)[i].samples_s;
      if (m && m2) {
        a.push_back(*m);
        b.push_back(*m2);
      }
    }
    table << "  " << texts[i] << "\n";
    rows.push_back(std::move(row));
  }
  json doc = {{"backend", backend.kind}, {"reps", reps}, {"rows", rows}};
  if (secondary) {
    doc["against"] = against;
    if (a.size() >= 2) {
      const auto t = stats::paired_t_test(a, b);
      doc["paired_t_test"] = stats::to_json(t);
      table << "paired t-test (" << backend.kind << " vs " << against << ", n=" << a.size()
            << "): t = " << num(t.t_statistic, 3) << ", p = " << num(t.p_value, 3) << "\n";
    } else {
      table << "paired t-test skipped: fewer than two commands with samples on both backends\n";
    }
  }
  out << (as_json ? doc.dump(2) + "\n" : table.str());
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Natural-language control of a simulated 4-DOF arm", "nlarm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  bool as_json = false;
  WorldOptions world;
  BackendOptions backend;

  auto* fk = app.add_subcommand("fk", "Forward kinematics for a joint vector");
  std::string q_text;
  fk->add_option("--q", q_text, "Joint angles a,b,c,d in radians")->required();
  fk->add_flag("--json", as_json, "Machine-readable output");
  fk->add_option("--model", world.model, "Arm model JSON")->check(CLI::ExistingFile);

  auto* ik = app.add_subcommand("ik", "Inverse kinematics for a position and pitch");
  std::string pos_text, seed_text;
  double pitch = 0.0;
  ik->add_option("--pos", pos_text, "Target position x,y,z in meters")->required();
  ik->add_option("--pitch", pitch, "End-effector pitch in radians (pi/2 points down)")->capture_default_str();
  ik->add_option("--seed", seed_text, "Initial guess a,b,c,d; disables the multi-seed search");
  ik->add_flag("--json", as_json, "Machine-readable output");
  ik->add_option("--model", world.model, "Arm model JSON")->check(CLI::ExistingFile);

  auto* repl = app.add_subcommand("repl", "Interactive loop: read a line, interpret, plan, execute, print state");
  world.add_to(repl);
  backend.add_to(repl, "rule");

  auto* serve = app.add_subcommand("serve", "HTTP API and state stream");
  std::string config_path, host;
  int port = 8080;
  double time_scale = 1.0, stream_rate = 20.0;
  serve->add_option("--config", config_path, "Service config JSON")->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Listen address (default 127.0.0.1)");
  auto* port_opt = serve->add_option("--port", port, "Listen port, 0 picks a free one")->check(CLI::Range(0, 65535));
  auto* scale_opt =
      serve->add_option("--time-scale", time_scale, "Wall seconds per simulated second (0 = no waiting)")
          ->check(CLI::NonNegativeNumber);
  auto* rate_opt = serve->add_option("--stream-rate", stream_rate, "State stream rate, Hz")->check(CLI::PositiveNumber);
  world.add_to(serve);
  BackendOptions serve_backend;
  serve_backend.add_to(serve, "rule");

  auto* eval = app.add_subcommand("eval-intents", "Run the intent test set and print the PASS/FAIL grid");
  BackendOptions eval_backend;
  eval_backend.add_to(eval, "scripted_gpt4");
  int eval_trials = 3;
  std::string cases_path;
  eval->add_option("--trials", eval_trials, "Trials per command")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--cases", cases_path, "Evaluation cases JSON")->check(CLI::ExistingFile);
  eval->add_flag("--json", as_json, "Machine-readable output");

  auto* rstats = app.add_subcommand("reproduce-stats", "Latency table summaries and the paired t-test");
  std::string fixture;
  rstats->add_option("--fixture", fixture, "Latency fixture JSON")->check(CLI::ExistingFile);
  rstats->add_flag("--json", as_json, "Machine-readable output");

  auto* pick = app.add_subcommand("pick-demo", "Repeated pick trials per cube color");
  std::string color = "all";
  int pick_trials = 5;
  pick->add_option("--color", color, "red, green, blue or all")
      ->check(CLI::IsMember({"red", "green", "blue", "all"}))
      ->capture_default_str();
  pick->add_option("--trials", pick_trials, "Trials per color")->check(CLI::PositiveNumber)->capture_default_str();
  pick->add_flag("--json", as_json, "Machine-readable output");
  world.add_to(pick);
  BackendOptions pick_backend;
  pick_backend.add_to(pick, "rule");

  auto* bench = app.add_subcommand("bench", "Time interpret + plan per command");
  BackendOptions bench_backend;
  bench_backend.add_to(bench, "rule");
  std::string against;
  int reps = 3;
  std::vector<std::string> texts;
  bench->add_option("--reps", reps, "Repetitions per command")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--text", texts, "Command text (repeatable; default: the intent test set)");
  bench->add_option("--against", against, "Second backend for a paired comparison")
      ->check(CLI::IsMember({"rule", "scripted_gpt35", "scripted_gpt4", "live"}));
  bench->add_flag("--json", as_json, "Machine-readable output");
  world.add_to(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fk->parsed()) return cmd_fk(q_text, world, as_json, out);
    if (ik->parsed()) return cmd_ik(pos_text, pitch, seed_text, world, as_json, out, err);
    if (repl->parsed()) return cmd_repl(world, backend, in, out);
    if (serve->parsed()) {
      service::ServiceConfig cfg = config_path.empty() ? service::ServiceConfig{} : service::load_service_config(config_path);
      if (!host.empty()) cfg.host = host;
      if (port_opt->count() || config_path.empty()) cfg.port = port;
      if (scale_opt->count()) cfg.time_scale = time_scale;
      if (rate_opt->count()) cfg.stream_rate_hz = stream_rate;
      if (!world.scene.empty()) cfg.scene_path = world.scene;
      if (!world.model.empty()) cfg.model_path = world.model;
      if (serve->count("--backend") || config_path.empty()) cfg.backend = serve_backend.config();
      return cmd_serve(std::move(cfg), out);
    }
    if (eval->parsed()) return cmd_eval(eval_backend, eval_trials, cases_path, as_json, out);
    if (rstats->parsed()) return cmd_stats(fixture, as_json, out);
    if (pick->parsed()) return cmd_pick_demo(world, pick_backend, color, pick_trials, as_json, out);
    if (bench->parsed()) return cmd_bench(world, bench_backend, against, reps, texts, as_json, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace nlarm::cli
