#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace nlarm::intent {

enum class Action { move, pick_up, place, home, sleep, stop, clarify };
enum class Direction { left, right, forward, backward, up, down };
enum class Color { red, green, blue };

inline constexpr std::array kAllDirections = {Direction::left,    Direction::right, Direction::forward,
                                              Direction::backward, Direction::up,    Direction::down};
inline constexpr std::array kAllColors = {Color::red, Color::green, Color::blue};

inline constexpr double kDefaultMagnitude = 0.05;  // m

std::string_view to_string(Action a);
std::string_view to_string(Direction d);
std::string_view to_string(Color c);
std::optional<Action> parse_action(std::string_view s);
std::optional<Direction> parse_direction(std::string_view s);
std::optional<Color> parse_color(std::string_view s);

/// left<->right, forward<->backward, up<->down.
Direction opposite(Direction d);

enum class ErrorKind {
  empty_input,
  timeout,
  transport,
  malformed_json,
  schema_violation,
  unknown_action,
  script_miss,
  configuration,
};

std::string_view to_string(ErrorKind k);

class IntentError : public std::runtime_error {
 public:
  IntentError(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct IntentCommand {
  Action action = Action::clarify;
  std::optional<Direction> direction;
  std::optional<Color> color;
  std::optional<double> magnitude_m;
  std::string raw_text;
  std::string note;  // why an interpretation ended in clarify

  /// Throws IntentError(schema_violation) if move lacks a direction, pick_up
  /// lacks a color, or the magnitude is not positive.
  void validate() const;
  bool operator==(const IntentCommand&) const = default;
};

nlohmann::json to_json(const IntentCommand& cmd);

/// Lowercased, punctuation-free, single-spaced form used for matching text.
std::string canonical_text(std::string_view text);

/// Deterministic grammar over lowercased tokens. Handles literal directions,
/// "opposite of <dir>", an "(pretend) it's opposite day" prefix, pick-up of a
/// colored cube, place/home/sleep/stop and an optional "by N cm" distance.
/// Anything else, including negations, yields action=clarify.
/// Throws IntentError(empty_input) for blank text.
IntentCommand interpret_rule_based(std::string_view text);

/// Validates a model response body into a command. Accepts one JSON object
/// (or a one-element array of them), optionally inside a ``` fence.
/// Throws IntentError with malformed_json, schema_violation or unknown_action.
IntentCommand parse_intent_response(std::string_view body, std::string raw_text);

}  // namespace nlarm::intent
