#include "voice/agent.hpp"

#include <set>

#include "voice/clock.hpp"
#include "voice/error.hpp"

namespace voice {

using nlohmann::json;

const char* const kDefaultSystemPrompt =
    "You are the front-desk receptionist of a hospital, speaking with a caller on the phone. "
    "Keep replies short and conversational: one to three sentences, no lists or markdown. "
    "Use the tools to look up doctors, patients and open slots; never invent availability. "
    "Confirm the patient, doctor, date and time with the caller before booking or cancelling.";

void AgentConfig::validate() const {
  if (max_tool_depth < 1) throw Error(Errc::invalid_argument, "max_tool_depth must be >= 1");
  if (system_prompt.empty()) throw Error(Errc::invalid_argument, "system_prompt must not be empty");
}

Agent::Agent(AgentConfig config, const ToolRegistry& tools) : config_(std::move(config)), tools_(tools) {
  config_.validate();
}

AgentTurn Agent::handle_utterance(std::vector<Message>& history, const std::string& user_text,
                                  const TokenHandler& on_token, const CancelToken* cancel) const {
  if (user_text.empty()) throw Error(Errc::invalid_argument, "user_text must not be empty");
  history.push_back(Message::user(user_text));

  AgentTurn turn;
  const json tools = tools_.openai_tools();
  std::vector<Message> request;

  while (turn.llm_rounds < config_.max_tool_depth) {
    request.clear();
    request.reserve(history.size() + 1);
    request.push_back(Message::system(config_.system_prompt));
    request.insert(request.end(), history.begin(), history.end());

    std::vector<StreamDelta> fragments;
    std::string round_text;
    ++turn.llm_rounds;
    auto stats = chat_stream(
        config_.llm, request, tools,
        [&](const StreamDelta& d) {
          if (d.kind == DeltaKind::text) {
            round_text += d.text;
            turn.text += d.text;
            if (on_token) on_token(d.text, d.at_ms);
          } else if (d.kind == DeltaKind::tool_call_fragment) {
            fragments.push_back(d);
          }
        },
        cancel);
    if (turn.rounds.empty()) turn.first_delta_ms = stats.first_delta_ms;
    turn.rounds.push_back(stats);

    if (stats.cancelled) {
      turn.cancelled = true;
      if (!round_text.empty()) {
        Message m = Message::assistant(round_text);
        m.truncated = true;
        history.push_back(std::move(m));
      }
      break;
    }

    auto calls = accumulate_tool_calls(fragments, /*validate=*/false);
    if (calls.empty()) {
      history.push_back(Message::assistant(round_text));
      break;
    }
    for (std::size_t i = 0; i < calls.size(); ++i) {
      if (calls[i].id.empty()) calls[i].id = "call_" + std::to_string(turn.llm_rounds) + "_" + std::to_string(i);
    }
    history.push_back(Message::assistant(round_text.empty() ? std::nullopt : std::optional(round_text), calls));

    const bool last_round = turn.llm_rounds >= config_.max_tool_depth;
    for (const auto& call : calls) {
      json result = last_round ? json{{"error", "tool depth limit reached; call not executed"}}
                               : execute_tool(tools_, call);
      history.push_back(Message::tool(call.id, result.dump()));
      turn.tool_calls.push_back(call);
    }
    if (last_round) {
      turn.depth_exceeded = true;
      turn.diagnostic = "depth-exceeded: model still requested tools after " +
                        std::to_string(config_.max_tool_depth) + " rounds";
      history.push_back(Message::assistant(config_.depth_fallback_text));
      turn.text += config_.depth_fallback_text;
      if (on_token) on_token(config_.depth_fallback_text, now_ms());
      break;
    }
  }
  turn.finished_ms = now_ms();
  return turn;
}

bool history_well_formed(std::span<const Message> history) {
  std::set<std::string> pending;
  std::set<std::string> answered;
  for (const auto& m : history) {
    switch (m.role) {
      case Role::assistant:
        if (!pending.empty()) return false;
        if (!m.content && m.tool_calls.empty()) return false;
        for (const auto& c : m.tool_calls) {
          if (answered.contains(c.id) || !pending.insert(c.id).second) return false;
        }
        break;
      case Role::tool:
        if (!m.tool_call_id || !pending.erase(*m.tool_call_id)) return false;
        answered.insert(*m.tool_call_id);
        break;
      case Role::user:
      case Role::system:
        if (!pending.empty()) return false;
        break;
    }
  }
  return pending.empty();
}

}  // namespace voice
