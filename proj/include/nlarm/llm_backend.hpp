#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlarm/intent.hpp"

namespace nlarm::intent {

enum class BackendKind { rule, scripted_gpt35, scripted_gpt4, live };

std::string_view to_string(BackendKind k);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

struct LlmBackendConfig {
  BackendKind kind = BackendKind::rule;

  // live
  std::string endpoint;  // e.g. https://api.openai.com/v1/chat/completions
  std::string model = "gpt-4";
  std::string credential_env = "OPENAI_API_KEY";
  double timeout_s = 10.0;

  // scripted; empty paths resolve to the bundled data files
  std::filesystem::path script_path;
  std::filesystem::path cases_path;
  std::chrono::milliseconds injected_delay{0};

  std::filesystem::path prompt_path;  // empty: bundled template

  /// Throws IntentError(configuration): live needs an endpoint and a
  /// non-empty credential variable; timeout must be positive.
  void validate() const;
};

nlohmann::json to_json(const LlmBackendConfig& cfg);
LlmBackendConfig backend_config_from_json(const nlohmann::json& j);

std::filesystem::path data_dir();
std::string load_prompt_template(const std::filesystem::path& path = {});

struct LlmRequest {
  std::string system_prompt;
  std::string user_text;
  int trial = 0;  // replay index for scripted clients
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  /// Returns the raw response body (the model's message content).
  virtual std::string complete(const LlmRequest& request) const = 0;
};

/// Replays recorded responses. Requests are matched to a case id by
/// normalized text; each case maps to one body or a per-trial list.
class ScriptedClient final : public LlmClient {
 public:
  ScriptedClient(std::map<std::string, int> text_to_id, std::map<int, std::vector<std::string>> responses,
                 std::chrono::milliseconds delay = {});

  /// Script format: {"responses": {"<id>": body | {"trials": [body, ...]}},
  ///                 "by_text": {"<text>": body | {"trials": [...]}}},
  /// where body is a JSON value or a raw string.
  static ScriptedClient load(const std::filesystem::path& script, const std::filesystem::path& cases,
                             std::chrono::milliseconds delay = {});

  std::string complete(const LlmRequest& request) const override;

 private:
  std::map<std::string, int> text_to_id_;
  std::map<int, std::vector<std::string>> responses_;
  std::chrono::milliseconds delay_;
};

/// OpenAI-style chat completion over HTTP(S) POST.
class HttpChatClient final : public LlmClient {
 public:
  HttpChatClient(std::string endpoint, std::string model, std::string credential, double timeout_s);
  std::string complete(const LlmRequest& request) const override;

 private:
  std::string endpoint_;
  std::string model_;
  std::string credential_;
  double timeout_s_;
};

/// Sends the prompt and text, then validates the body into a command.
IntentCommand interpret_llm(std::string_view text, const LlmClient& client, const std::string& prompt,
                            int trial = 0);

/// Common front for the rule grammar and the LLM-backed interpreters.
class Interpreter {
 public:
  virtual ~Interpreter() = default;
  virtual IntentCommand interpret(std::string_view text, int trial = 0) const = 0;
  virtual std::string name() const = 0;
};

std::unique_ptr<Interpreter> make_interpreter(const LlmBackendConfig& cfg);
std::unique_ptr<Interpreter> make_llm_interpreter(std::string name, std::unique_ptr<LlmClient> client,
                                                  std::string prompt);

struct IntentEvalCase {
  int id = 0;
  std::string text;
  Direction expected_direction = Direction::left;
  std::string annotation_source;
};

std::vector<IntentEvalCase> eval_cases_from_json(const nlohmann::json& doc);
std::vector<IntentEvalCase> load_eval_cases(const std::filesystem::path& path = {});

struct EvalCell {
  bool pass = false;
  std::string detail;  // interpreted direction, or the failure reason
};

struct EvalRow {
  int id = 0;
  std::vector<EvalCell> trials;
};

struct EvalGrid {
  std::string backend;
  std::vector<EvalRow> rows;

  int failures() const;
};

/// PASS iff the interpreted command is a move in the expected direction.
/// Backend errors become FAIL cells carrying the error text.
EvalGrid evaluate_table1(const Interpreter& interpreter, const std::vector<IntentEvalCase>& cases, int trials);

std::string format_grid(const EvalGrid& grid);
nlohmann::json to_json(const EvalGrid& grid);

}  // namespace nlarm::intent
