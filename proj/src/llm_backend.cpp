#include "nlarm/llm_backend.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace nlarm::intent {

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::rule: return "rule";
    case BackendKind::scripted_gpt35: return "scripted_gpt35";
    case BackendKind::scripted_gpt4: return "scripted_gpt4";
    case BackendKind::live: return "live";
  }
  return "rule";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
  for (auto k : {BackendKind::rule, BackendKind::scripted_gpt35, BackendKind::scripted_gpt4, BackendKind::live}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

void LlmBackendConfig::validate() const {
  if (!(timeout_s > 0.0)) throw IntentError(ErrorKind::configuration, "backend: timeout must be positive");
  if (kind != BackendKind::live) return;
  if (endpoint.empty()) throw IntentError(ErrorKind::configuration, "live backend: endpoint is required");
  const char* credential = credential_env.empty() ? nullptr : std::getenv(credential_env.c_str());
  if (credential == nullptr || *credential == '\0') {
    throw IntentError(ErrorKind::configuration,
                      "live backend: credential variable '" + credential_env + "' is not set");
  }
}

nlohmann::json to_json(const LlmBackendConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},
          {"endpoint", cfg.endpoint},
          {"model", cfg.model},
          {"credential_env", cfg.credential_env},
          {"timeout_s", cfg.timeout_s},
          {"script_path", cfg.script_path.string()},
          {"cases_path", cfg.cases_path.string()},
          {"injected_delay_ms", cfg.injected_delay.count()},
          {"prompt_path", cfg.prompt_path.string()}};
}

LlmBackendConfig backend_config_from_json(const nlohmann::json& j) {
  LlmBackendConfig cfg;
  try {
    const auto kind = parse_backend_kind(j.value("kind", std::string("rule")));
    if (!kind) throw IntentError(ErrorKind::configuration, "backend: unknown kind");
    cfg.kind = *kind;
    cfg.endpoint = j.value("endpoint", cfg.endpoint);
    cfg.model = j.value("model", cfg.model);
    cfg.credential_env = j.value("credential_env", cfg.credential_env);
    cfg.timeout_s = j.value("timeout_s", cfg.timeout_s);
    cfg.script_path = j.value("script_path", std::string());
    cfg.cases_path = j.value("cases_path", std::string());
    cfg.injected_delay = std::chrono::milliseconds(j.value("injected_delay_ms", 0));
    cfg.prompt_path = j.value("prompt_path", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw IntentError(ErrorKind::configuration, std::string("backend config: ") + e.what());
  }
  return cfg;
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("NLARM_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return NLARM_DATA_DIR;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntentError(ErrorKind::configuration, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IntentError(ErrorKind::configuration, path.string() + ": " + e.what());
  }
}

}  // namespace

std::string load_prompt_template(const std::filesystem::path& path) {
  return read_file(path.empty() ? data_dir() / "prompts" / "intent_v1.txt" : path);
}

// ---------------------------------------------------------------------------

ScriptedClient::ScriptedClient(std::map<std::string, int> text_to_id,
                               std::map<int, std::vector<std::string>> responses,
                               std::chrono::milliseconds delay)
    : text_to_id_(std::move(text_to_id)), responses_(std::move(responses)), delay_(delay) {}

ScriptedClient ScriptedClient::load(const std::filesystem::path& script, const std::filesystem::path& cases,
                                    std::chrono::milliseconds delay) {
  std::map<std::string, int> text_to_id;
  for (const auto& c : load_eval_cases(cases)) text_to_id[canonical_text(c.text)] = c.id;

  const nlohmann::json doc = read_json(script);
  if (!doc.contains("responses") || !doc.at("responses").is_object()) {
    throw IntentError(ErrorKind::configuration, script.string() + ": missing 'responses' object");
  }
  auto body_text = [](const nlohmann::json& body) {
    return body.is_string() ? body.get<std::string>() : body.dump();
  };
  std::map<int, std::vector<std::string>> responses;
  for (const auto& [key, value] : doc.at("responses").items()) {
    int id = 0;
    try {
      id = std::stoi(key);
    } catch (const std::exception&) {
      throw IntentError(ErrorKind::configuration, script.string() + ": response key '" + key + "' is not an id");
    }
    auto& bodies = responses[id];
    if (value.is_object() && value.contains("trials")) {
      for (const auto& b : value.at("trials")) bodies.push_back(body_text(b));
    } else {
      bodies.push_back(body_text(value));
    }
    if (bodies.empty()) throw IntentError(ErrorKind::configuration, script.string() + ": empty trials for " + key);
  }
  // Commands outside the evaluation set, keyed by their text.
  if (doc.contains("by_text")) {
    int next_id = -1;
    for (const auto& [text, value] : doc.at("by_text").items()) {
      auto& bodies = responses[next_id];
      if (value.is_object() && value.contains("trials")) {
        for (const auto& b : value.at("trials")) bodies.push_back(body_text(b));
      } else {
        bodies.push_back(body_text(value));
      }
      if (bodies.empty()) throw IntentError(ErrorKind::configuration, script.string() + ": empty trials for '" + text + "'");
      text_to_id[canonical_text(text)] = next_id--;
    }
  }
  return ScriptedClient(std::move(text_to_id), std::move(responses), delay);
}

std::string ScriptedClient::complete(const LlmRequest& request) const {
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  const auto id = text_to_id_.find(canonical_text(request.user_text));
  if (id == text_to_id_.end()) {
    throw IntentError(ErrorKind::script_miss, "no scripted response for '" + request.user_text + "'");
  }
  const auto bodies = responses_.find(id->second);
  if (bodies == responses_.end()) {
    throw IntentError(ErrorKind::script_miss, "script has no entry for case " + std::to_string(id->second));
  }
  const auto n = bodies->second.size();
  return bodies->second[static_cast<std::size_t>(request.trial) % n];
}

// ---------------------------------------------------------------------------

HttpChatClient::HttpChatClient(std::string endpoint, std::string model, std::string credential,
                               double timeout_s)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      credential_(std::move(credential)),
      timeout_s_(timeout_s) {}

std::string HttpChatClient::complete(const LlmRequest& request) const {
  // Split "scheme://host[:port]/path".
  const auto scheme_end = endpoint_.find("://");
  const auto path_start = endpoint_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string origin = endpoint_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

  httplib::Client client(origin);
  if (!client.is_valid()) throw IntentError(ErrorKind::configuration, "live backend: bad endpoint " + endpoint_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_s_));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const nlohmann::json payload = {
      {"model", model_},
      {"temperature", 0},
      {"messages",
       {{{"role", "system"}, {"content", request.system_prompt}}, {{"role", "user"}, {"content", request.user_text}}}}};
  const httplib::Headers headers = {{"Authorization", "Bearer " + credential_}};

  const auto start = std::chrono::steady_clock::now();
  const auto res = client.Post(path, headers, payload.dump(), "application/json");
  if (!res) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && elapsed >= 0.9 * timeout_s_)) {
      throw IntentError(ErrorKind::timeout, "live backend: timed out after " + std::to_string(elapsed) + " s");
    }
    throw IntentError(ErrorKind::transport, "live backend: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw IntentError(ErrorKind::transport, "live backend: HTTP " + std::to_string(res->status));
  }
  try {
    const auto doc = nlohmann::json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IntentError(ErrorKind::malformed_json, std::string("live backend: unexpected envelope: ") + e.what());
  }
}

IntentCommand interpret_llm(std::string_view text, const LlmClient& client, const std::string& prompt, int trial) {
  if (canonical_text(text).empty()) throw IntentError(ErrorKind::empty_input, "empty command");
  const std::string body = client.complete({prompt, std::string(text), trial});
  return parse_intent_response(body, std::string(text));
}

// ---------------------------------------------------------------------------

namespace {

class RuleInterpreter final : public Interpreter {
 public:
  IntentCommand interpret(std::string_view text, int) const override { return interpret_rule_based(text); }
  std::string name() const override { return "rule"; }
};

class LlmInterpreter final : public Interpreter {
 public:
  LlmInterpreter(std::string name, std::unique_ptr<LlmClient> client, std::string prompt)
      : name_(std::move(name)), client_(std::move(client)), prompt_(std::move(prompt)) {}

  IntentCommand interpret(std::string_view text, int trial) const override {
    return interpret_llm(text, *client_, prompt_, trial);
  }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  std::unique_ptr<LlmClient> client_;
  std::string prompt_;
};

}  // namespace

std::unique_ptr<Interpreter> make_llm_interpreter(std::string name, std::unique_ptr<LlmClient> client,
                                                  std::string prompt) {
  return std::make_unique<LlmInterpreter>(std::move(name), std::move(client), std::move(prompt));
}

std::unique_ptr<Interpreter> make_interpreter(const LlmBackendConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case BackendKind::rule:
      return std::make_unique<RuleInterpreter>();
    case BackendKind::scripted_gpt35:
    case BackendKind::scripted_gpt4: {
      const auto default_script =
          data_dir() / (cfg.kind == BackendKind::scripted_gpt35 ? "scripted_gpt35.json" : "scripted_gpt4.json");
      auto client = std::make_unique<ScriptedClient>(ScriptedClient::load(
          cfg.script_path.empty() ? default_script : cfg.script_path, cfg.cases_path, cfg.injected_delay));
      return make_llm_interpreter(std::string(to_string(cfg.kind)), std::move(client),
                                  load_prompt_template(cfg.prompt_path));
    }
    case BackendKind::live: {
      auto client = std::make_unique<HttpChatClient>(cfg.endpoint, cfg.model, std::getenv(cfg.credential_env.c_str()),
                                                     cfg.timeout_s);
      return make_llm_interpreter("live", std::move(client), load_prompt_template(cfg.prompt_path));
    }
  }
  throw IntentError(ErrorKind::configuration, "backend: unsupported kind");
}

// ---------------------------------------------------------------------------

std::vector<IntentEvalCase> eval_cases_from_json(const nlohmann::json& doc) {
  const nlohmann::json& list = doc.is_object() ? doc.at("cases") : doc;
  std::vector<IntentEvalCase> cases;
  std::set<int> seen;
  try {
    for (const auto& c : list) {
      IntentEvalCase ec;
      ec.id = c.at("id").get<int>();
      ec.text = c.at("text").get<std::string>();
      const auto dir = parse_direction(c.at("expected_direction").get<std::string>());
      if (!dir) throw IntentError(ErrorKind::configuration, "case " + std::to_string(ec.id) + ": bad direction");
      ec.expected_direction = *dir;
      ec.annotation_source = c.value("annotation_source", std::string("unspecified"));
      if (!seen.insert(ec.id).second) {
        throw IntentError(ErrorKind::configuration, "duplicate case id " + std::to_string(ec.id));
      }
      cases.push_back(std::move(ec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntentError(ErrorKind::configuration, std::string("eval cases: ") + e.what());
  }
  return cases;
}

std::vector<IntentEvalCase> load_eval_cases(const std::filesystem::path& path) {
  return eval_cases_from_json(read_json(path.empty() ? data_dir() / "intent_cases.json" : path));
}

int EvalGrid::failures() const {
  int n = 0;
  for (const auto& row : rows) {
    for (const auto& cell : row.trials) n += cell.pass ? 0 : 1;
  }
  return n;
}

EvalGrid evaluate_table1(const Interpreter& interpreter, const std::vector<IntentEvalCase>& cases, int trials) {
  EvalGrid grid;
  grid.backend = interpreter.name();
  for (const auto& c : cases) {
    EvalRow row;
    row.id = c.id;
    for (int t = 0; t < trials; ++t) {
      EvalCell cell;
      try {
        const IntentCommand cmd = interpreter.interpret(c.text, t);
        if (cmd.action != Action::move || !cmd.direction) {
          cell.detail = std::string(to_string(cmd.action));
        } else {
          cell.detail = std::string(to_string(*cmd.direction));
          cell.pass = *cmd.direction == c.expected_direction;
        }
      } catch (const IntentError& e) {
        cell.detail = std::string(to_string(e.kind())) + ": " + e.what();
      }
      row.trials.push_back(std::move(cell));
    }
    grid.rows.push_back(std::move(row));
  }
  return grid;
}

std::string format_grid(const EvalGrid& grid) {
  std::ostringstream out;
  const std::size_t trials = grid.rows.empty() ? 0 : grid.rows.front().trials.size();
  out << "Intent interpretation (" << grid.backend << ")\n";
  out << std::left << std::setw(9) << "Command";
  for (std::size_t t = 0; t < trials; ++t) out << std::setw(9) << ("Trial " + std::to_string(t + 1));
  out << "\n";
  for (const auto& row : grid.rows) {
    out << std::setw(9) << row.id;
    for (const auto& cell : row.trials) out << std::setw(9) << (cell.pass ? "PASS" : "FAIL");
    out << "\n";
  }
  out << "failures: " << grid.failures() << "\n";
  return out.str();
}

nlohmann::json to_json(const EvalGrid& grid) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : grid.rows) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : row.trials) cells.push_back({{"pass", cell.pass}, {"detail", cell.detail}});
    rows.push_back({{"id", row.id}, {"trials", cells}});
  }
  return {{"backend", grid.backend}, {"rows", rows}, {"failures", grid.failures()}};
}

}  // namespace nlarm::intent
