#include "voice/control.hpp"

#include "voice/error.hpp"

namespace voice {

using nlohmann::json;

std::string_view to_string(ControlType t) {
  switch (t) {
    case ControlType::transcript: return "transcript";
    case ControlType::agent_speaking: return "agent_speaking";
    case ControlType::agent_done: return "agent_done";
    case ControlType::error: return "error";
  }
  return "error";
}

std::string encode(const ControlMessage& m) {
  json j{{"type", to_string(m.type)}};
  if (m.text) j["text"] = *m.text;
  if (m.is_final) j["is_final"] = *m.is_final;
  if (m.reason) j["reason"] = *m.reason;
  if (!m.timeline.is_null()) j["timeline"] = m.timeline;
  return j.dump();
}

ControlMessage parse_control(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw Error(Errc::protocol_error, "control message is not JSON", std::string(text));
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw Error(Errc::protocol_error, "control message without a type", std::string(text));
  }
  ControlMessage m;
  const auto type = j["type"].get<std::string>();
  if (type == "transcript") {
    m.type = ControlType::transcript;
    if (!j.contains("text") || !j["text"].is_string() || !j.contains("is_final") || !j["is_final"].is_boolean()) {
      throw Error(Errc::protocol_error, "transcript needs text and is_final", std::string(text));
    }
  } else if (type == "agent_speaking") {
    m.type = ControlType::agent_speaking;
  } else if (type == "agent_done") {
    m.type = ControlType::agent_done;
  } else if (type == "error") {
    m.type = ControlType::error;
  } else {
    throw Error(Errc::protocol_error, "unknown control type '" + type + "'", std::string(text));
  }
  if (j.contains("text") && j["text"].is_string()) m.text = j["text"].get<std::string>();
  if (j.contains("is_final") && j["is_final"].is_boolean()) m.is_final = j["is_final"].get<bool>();
  if (j.contains("reason") && j["reason"].is_string()) m.reason = j["reason"].get<std::string>();
  if (j.contains("timeline")) m.timeline = j["timeline"];
  return m;
}

}  // namespace voice
