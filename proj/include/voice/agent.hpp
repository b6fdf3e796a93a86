#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "voice/cancel.hpp"
#include "voice/hospital.hpp"
#include "voice/llm_client.hpp"

namespace voice {

using ToolHandler = std::function<nlohmann::json(const nlohmann::json& args)>;

struct ToolSpec {
  std::string name;
  std::string description;
  // JSON-schema object: {"type":"object","properties":{...},"required":[...]}.
  // Property types string/integer/number/boolean and string "pattern" are
  // enforced before the handler runs.
  nlohmann::json parameters;
  ToolHandler handler;
};

class ToolRegistry {
 public:
  // Throws invalid-argument on a duplicate name.
  void add(ToolSpec spec);
  const ToolSpec* find(std::string_view name) const;
  std::span<const ToolSpec> specs() const { return specs_; }
  // "tools" array for a chat-completion request.
  nlohmann::json openai_tools() const;

 private:
  std::vector<ToolSpec> specs_;
};

// Schema check; returns an error message, empty when args conform.
std::string validate_arguments(const nlohmann::json& schema, const nlohmann::json& args);

// Runs one call. Never throws for bad input: unknown tools, unparsable or
// non-conforming arguments come back as {"error": ...} objects so the model
// can recover.
nlohmann::json execute_tool(const ToolRegistry& registry, const ToolCall& call);

// check_availability, schedule_appointment, cancel_appointment,
// get_patient_info, get_doctor_info over `store`. Only schedule and cancel
// mutate it. The store must outlive the registry.
ToolRegistry make_hospital_tools(HospitalStore& store);

extern const char* const kDefaultSystemPrompt;

struct AgentConfig {
  std::string system_prompt = kDefaultSystemPrompt;
  int max_tool_depth = 5;
  LlmConfig llm;
  std::string depth_fallback_text =
      "I'm sorry, I wasn't able to finish that request. Could you say it again?";

  void validate() const;
};

struct AgentTurn {
  std::string text;          // everything streamed to on_token
  int llm_rounds = 0;
  bool depth_exceeded = false;
  bool cancelled = false;
  std::vector<ToolCall> tool_calls;
  std::vector<ChatStreamStats> rounds;
  double first_delta_ms = -1.0;  // first content-bearing delta of round one
  double finished_ms = 0.0;
  std::string diagnostic;
};

using TokenHandler = std::function<void(std::string_view token, double at_ms)>;

// The recursive tool-use loop: send history plus tool definitions; execute
// any returned tool calls, append their results and ask again; stream text
// as it arrives. Bounded by max_tool_depth LLM rounds.
class Agent {
 public:
  Agent(AgentConfig config, const ToolRegistry& tools);

  // Appends the user message, assistant messages and tool results to
  // `history`. The system prompt is sent with every request but never stored.
  AgentTurn handle_utterance(std::vector<Message>& history, const std::string& user_text,
                             const TokenHandler& on_token, const CancelToken* cancel = nullptr) const;

  const AgentConfig& config() const { return config_; }

 private:
  AgentConfig config_;
  const ToolRegistry& tools_;
};

// Every assistant tool call has exactly one tool message with its id before
// the next assistant message, and every tool message answers a pending call.
bool history_well_formed(std::span<const Message> history);

}  // namespace voice
