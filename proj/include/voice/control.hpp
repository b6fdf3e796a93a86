#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace voice {

// Server -> client text messages. "error" is a diagnostic extension (for
// example a dropped mis-sized audio frame); clients may ignore it.
enum class ControlType { transcript, agent_speaking, agent_done, error };

std::string_view to_string(ControlType t);

struct ControlMessage {
  ControlType type = ControlType::transcript;
  std::optional<std::string> text;    // transcript, error
  std::optional<bool> is_final;       // transcript
  std::optional<std::string> reason;  // agent_done: completed | interrupted | error
  nlohmann::json timeline;            // agent_done: turn timestamps, null when absent

  static ControlMessage transcript(std::string text, bool is_final) {
    return {ControlType::transcript, std::move(text), is_final, std::nullopt, nullptr};
  }
  static ControlMessage agent_speaking() { return {ControlType::agent_speaking, {}, {}, {}, nullptr}; }
  static ControlMessage agent_done(std::string reason, nlohmann::json timeline = nullptr) {
    return {ControlType::agent_done, {}, {}, std::move(reason), std::move(timeline)};
  }
  static ControlMessage error(std::string text) { return {ControlType::error, std::move(text), {}, {}, nullptr}; }
};

std::string encode(const ControlMessage& m);
// Throws protocol-error for anything that is not a well-formed control message.
ControlMessage parse_control(std::string_view text);

}  // namespace voice
