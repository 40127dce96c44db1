#include "nlarm/intent.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <vector>

namespace nlarm::intent {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<std::string_view, E>, N>& table, std::string_view s) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  return std::nullopt;
}

constexpr std::array<std::pair<std::string_view, Action>, 7> kActions = {{
    {"move", Action::move},
    {"pick_up", Action::pick_up},
    {"place", Action::place},
    {"home", Action::home},
    {"sleep", Action::sleep},
    {"stop", Action::stop},
    {"clarify", Action::clarify},
}};

constexpr std::array<std::pair<std::string_view, Direction>, 6> kDirections = {{
    {"left", Direction::left},
    {"right", Direction::right},
    {"forward", Direction::forward},
    {"backward", Direction::backward},
    {"up", Direction::up},
    {"down", Direction::down},
}};

constexpr std::array<std::pair<std::string_view, Color>, 3> kColors = {{
    {"red", Color::red},
    {"green", Color::green},
    {"blue", Color::blue},
}};

}  // namespace

std::string_view to_string(Action a) { return kActions[static_cast<std::size_t>(a)].first; }
std::string_view to_string(Direction d) { return kDirections[static_cast<std::size_t>(d)].first; }
std::string_view to_string(Color c) { return kColors[static_cast<std::size_t>(c)].first; }
std::optional<Action> parse_action(std::string_view s) { return lookup(kActions, s); }
std::optional<Direction> parse_direction(std::string_view s) { return lookup(kDirections, s); }
std::optional<Color> parse_color(std::string_view s) { return lookup(kColors, s); }

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::transport: return "transport";
    case ErrorKind::malformed_json: return "malformed_json";
    case ErrorKind::schema_violation: return "schema_violation";
    case ErrorKind::unknown_action: return "unknown_action";
    case ErrorKind::script_miss: return "script_miss";
    case ErrorKind::configuration: return "configuration";
  }
  return "unknown";
}

Direction opposite(Direction d) {
  switch (d) {
    case Direction::left: return Direction::right;
    case Direction::right: return Direction::left;
    case Direction::forward: return Direction::backward;
    case Direction::backward: return Direction::forward;
    case Direction::up: return Direction::down;
    case Direction::down: return Direction::up;
  }
  return d;
}

void IntentCommand::validate() const {
  if (action == Action::move && !direction) {
    throw IntentError(ErrorKind::schema_violation, "intent: action 'move' requires a direction");
  }
  if (action == Action::pick_up && !color) {
    throw IntentError(ErrorKind::schema_violation, "intent: action 'pick_up' requires a color");
  }
  if (magnitude_m && !(std::isfinite(*magnitude_m) && *magnitude_m > 0.0)) {
    throw IntentError(ErrorKind::schema_violation, "intent: magnitude must be a positive number");
  }
}

nlohmann::json to_json(const IntentCommand& cmd) {
  nlohmann::json j;
  j["action"] = to_string(cmd.action);
  j["direction"] = cmd.direction ? nlohmann::json(to_string(*cmd.direction)) : nlohmann::json(nullptr);
  j["color"] = cmd.color ? nlohmann::json(to_string(*cmd.color)) : nlohmann::json(nullptr);
  j["magnitude_m"] = cmd.magnitude_m ? nlohmann::json(*cmd.magnitude_m) : nlohmann::json(nullptr);
  j["raw_text"] = cmd.raw_text;
  if (!cmd.note.empty()) j["note"] = cmd.note;
  return j;
}

// ---------------------------------------------------------------------------
// Rule grammar

namespace {

using Tokens = std::vector<std::string>;

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    // U+2018 / U+2019 curly apostrophes arrive as E2 80 98 / E2 80 99.
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(text[i + 2]) == 0x98 || static_cast<unsigned char>(text[i + 2]) == 0x99)) {
      out.push_back('\'');
      i += 2;
    } else if (std::isalnum(c) || c == '\'') {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '.' && i > 0 && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
               std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      out.push_back('.');
    } else {
      out.push_back(' ');
    }
  }
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::string cur;
  for (char c : normalize(text)) {
    if (c == ' ') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Cursor over the token list; every production must consume it fully.
class Cursor {
 public:
  explicit Cursor(const Tokens& t) : tokens_(t) {}

  bool done() const { return pos_ >= tokens_.size(); }
  const std::string& peek() const { return tokens_[pos_]; }
  std::size_t pos() const { return pos_; }
  void reset(std::size_t p) { pos_ = p; }

  bool accept(std::string_view word) {
    if (!done() && tokens_[pos_] == word) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_any(std::initializer_list<std::string_view> words) {
    for (auto w : words) {
      if (accept(w)) return true;
    }
    return false;
  }
  bool accept_seq(std::initializer_list<std::string_view> words) {
    const std::size_t save = pos_;
    for (auto w : words) {
      if (!accept(w)) {
        pos_ = save;
        return false;
      }
    }
    return true;
  }
  void skip_any(std::initializer_list<std::string_view> words) {
    while (accept_any(words)) {
    }
  }
  std::optional<std::string> take() {
    if (done()) return std::nullopt;
    return tokens_[pos_++];
  }

 private:
  const Tokens& tokens_;
  std::size_t pos_ = 0;
};

const std::initializer_list<std::string_view> kFillers = {"please", "now", "ok", "okay", "hey",
                                                            "robot", "and", "then", "so"};

std::optional<Direction> direction_word(std::string_view w) {
  if (w == "left") return Direction::left;
  if (w == "right") return Direction::right;
  if (w == "forward" || w == "forwards" || w == "ahead") return Direction::forward;
  if (w == "backward" || w == "backwards" || w == "back") return Direction::backward;
  if (w == "up" || w == "upward" || w == "upwards") return Direction::up;
  if (w == "down" || w == "downward" || w == "downwards") return Direction::down;
  return std::nullopt;
}

std::optional<double> unit_scale(std::string_view w) {
  if (w == "cm" || w == "centimeter" || w == "centimeters" || w == "centimetre" || w == "centimetres") return 0.01;
  if (w == "mm" || w == "millimeter" || w == "millimeters" || w == "millimetre" || w == "millimetres") return 0.001;
  if (w == "m" || w == "meter" || w == "meters" || w == "metre" || w == "metres") return 1.0;
  if (w == "inch" || w == "inches" || w == "in") return 0.0254;
  return std::nullopt;
}

std::optional<double> number(std::string_view w) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc() || end != w.data() + w.size()) return std::nullopt;
  return v;
}

/// "[by] N unit" at the cursor; leaves the cursor untouched when absent.
std::optional<double> magnitude_phrase(Cursor& c) {
  const std::size_t save = c.pos();
  c.accept("by");
  const auto n = c.take();
  const auto u = c.take();
  if (n && u) {
    const auto value = number(*n);
    const auto scale = unit_scale(*u);
    if (value && scale) return *value * *scale;
  }
  c.reset(save);
  return std::nullopt;
}

bool parse_move(Cursor& c, IntentCommand& cmd) {
  c.accept_any({"move", "go", "step", "shift", "slide"});
  c.accept_any({"to", "towards", "toward"});
  c.accept("the");

  std::optional<Direction> dir;
  if (c.accept("opposite")) {
    c.accept("direction");
    if (!c.accept("of")) return false;
    c.accept("the");
    const auto w = c.take();
    if (!w) return false;
    dir = direction_word(*w);
    if (dir) dir = opposite(*dir);
  } else {
    const auto w = c.take();
    if (!w) return false;
    dir = direction_word(*w);
  }
  if (!dir) return false;
  c.accept("side");

  const std::optional<double> magnitude = magnitude_phrase(c);
  c.skip_any(kFillers);
  if (!c.done()) return false;

  cmd.action = Action::move;
  cmd.direction = dir;
  cmd.magnitude_m = magnitude.value_or(kDefaultMagnitude);
  return true;
}

bool parse_pick(Cursor& c, IntentCommand& cmd) {
  bool trailing_up = false;
  if (c.accept("pick")) {
    if (!c.accept("up")) trailing_up = true;
  } else if (!c.accept_any({"grab", "grasp", "get", "fetch", "take"})) {
    return false;
  }
  c.accept_any({"the", "a"});
  const auto w = c.take();
  if (!w) return false;
  const auto color = parse_color(*w);
  if (!color) return false;
  c.accept_any({"cube", "block", "box", "object", "one"});
  if (trailing_up && !c.accept("up")) return false;
  c.skip_any(kFillers);
  if (!c.done()) return false;
  cmd.action = Action::pick_up;
  cmd.color = color;
  return true;
}

bool parse_place(Cursor& c, IntentCommand& cmd) {
  if (!c.accept_any({"place", "put", "drop", "release", "set"})) return false;
  c.skip_any({"it", "the", "cube", "block", "object", "down"});
  c.skip_any(kFillers);
  if (!c.done()) return false;
  cmd.action = Action::place;
  return true;
}

bool parse_keyword(Cursor& c, IntentCommand& cmd) {
  if (c.accept_any({"stop", "halt", "freeze"})) {
    c.accept("moving");
    c.skip_any(kFillers);
    if (!c.done()) return false;
    cmd.action = Action::stop;
    return true;
  }
  c.skip_any({"go", "return", "move", "to", "the", "your"});
  std::optional<Action> action;
  if (c.accept("home")) action = Action::home;
  else if (c.accept("sleep")) action = Action::sleep;
  if (!action) return false;
  c.accept_any({"position", "pose"});
  c.skip_any(kFillers);
  if (!c.done()) return false;
  cmd.action = *action;
  return true;
}

bool opposite_day_prefix(Cursor& c) {
  const std::size_t save = c.pos();
  c.accept("pretend");
  c.accept("that");
  if (!c.accept_any({"it's", "its"})) c.accept_seq({"it", "is"});
  if (c.accept_seq({"opposite", "day"})) return true;
  c.reset(save);
  return false;
}

IntentCommand clarify(std::string raw, std::string note) {
  IntentCommand cmd;
  cmd.action = Action::clarify;
  cmd.raw_text = std::move(raw);
  cmd.note = std::move(note);
  return cmd;
}

}  // namespace

std::string canonical_text(std::string_view text) {
  std::string out;
  for (const auto& t : tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

IntentCommand interpret_rule_based(std::string_view text) {
  const Tokens tokens = tokenize(text);
  if (tokens.empty()) throw IntentError(ErrorKind::empty_input, "empty command");

  static const std::set<std::string_view> negations = {"not", "don't", "dont", "never", "avoid", "except"};
  for (const auto& t : tokens) {
    if (negations.count(t)) return clarify(std::string(text), "negated instruction");
  }

  Cursor c(tokens);
  c.skip_any(kFillers);
  const bool opposite_day = opposite_day_prefix(c);
  c.skip_any(kFillers);
  const std::size_t start = c.pos();

  IntentCommand cmd;
  cmd.raw_text = std::string(text);
  using Production = bool (*)(Cursor&, IntentCommand&);
  for (Production p : {Production{parse_keyword}, Production{parse_pick}, Production{parse_place},
                       Production{parse_move}}) {
    c.reset(start);
    IntentCommand candidate = cmd;
    if (p(c, candidate)) {
      if (opposite_day && candidate.direction) candidate.direction = opposite(*candidate.direction);
      try {
        candidate.validate();
      } catch (const IntentError& e) {
        return clarify(std::string(text), e.what());
      }
      return candidate;
    }
  }
  return clarify(std::string(text), "no matching command form");
}

// ---------------------------------------------------------------------------
// Response schema

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_fence(std::string_view s) {
  s = trim(s);
  if (s.substr(0, 3) != "```") return s;
  const auto first_newline = s.find('\n');
  const auto closing = s.rfind("```");
  if (first_newline == std::string_view::npos || closing <= first_newline) return s;
  return trim(s.substr(first_newline + 1, closing - first_newline - 1));
}

[[noreturn]] void schema_error(const std::string& what) {
  throw IntentError(ErrorKind::schema_violation, "response schema: " + what);
}

std::string canonical_action(std::string s) {
  for (char& ch : s) {
    ch = (ch == ' ' || ch == '-') ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  if (s == "pickup") s = "pick_up";
  return s;
}

template <typename E>
std::optional<E> optional_enum(const nlohmann::json& obj, const char* key,
                               std::optional<E> (*parse)(std::string_view)) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  const auto& v = obj.at(key);
  if (!v.is_string()) schema_error(std::string("'") + key + "' must be a string or null");
  std::string s = v.get<std::string>();
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  auto parsed = parse(s);
  if (!parsed) schema_error(std::string("'") + key + "' has unsupported value '" + s + "'");
  return parsed;
}

}  // namespace

IntentCommand parse_intent_response(std::string_view body, std::string raw_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(strip_fence(body));
  } catch (const nlohmann::json::parse_error& e) {
    throw IntentError(ErrorKind::malformed_json, std::string("response is not valid JSON: ") + e.what());
  }

  if (doc.is_array()) {
    if (doc.size() != 1) schema_error("expected exactly one instruction, got " + std::to_string(doc.size()));
    doc = doc.at(0);
  }
  if (!doc.is_object()) schema_error("top level must be an object");

  if (!doc.contains("action")) schema_error("missing 'action'");
  if (!doc.at("action").is_string()) schema_error("'action' must be a string");
  const std::string action_name = canonical_action(doc.at("action").get<std::string>());
  const auto action = parse_action(action_name);
  if (!action) throw IntentError(ErrorKind::unknown_action, "unknown action '" + action_name + "'");

  IntentCommand cmd;
  cmd.action = *action;
  cmd.raw_text = std::move(raw_text);
  cmd.direction = optional_enum<Direction>(doc, "direction", parse_direction);
  cmd.color = optional_enum<Color>(doc, "color", parse_color);

  if (!cmd.color && doc.contains("object") && doc.at("object").is_string()) {
    for (const auto& word : tokenize(doc.at("object").get<std::string>())) {
      if (auto c = parse_color(word)) {
        cmd.color = c;
        break;
      }
    }
  }

  for (const char* key : {"magnitude", "magnitude_m"}) {
    if (!doc.contains(key) || doc.at(key).is_null()) continue;
    if (!doc.at(key).is_number()) schema_error(std::string("'") + key + "' must be a number or null");
    cmd.magnitude_m = doc.at(key).get<double>();
  }
  if (cmd.action == Action::move && !cmd.magnitude_m) cmd.magnitude_m = kDefaultMagnitude;

  cmd.validate();
  return cmd;
}

}  // namespace nlarm::intent
