#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "voice/cancel.hpp"

namespace voice {

enum class Role { system, user, assistant, tool };

std::string_view to_string(Role r);

struct ToolCall {
  std::string id;
  std::string name;
  std::string arguments_json;

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct Message {
  Role role = Role::user;
  std::optional<std::string> content;
  std::vector<ToolCall> tool_calls;   // assistant only
  std::optional<std::string> tool_call_id;  // tool only
  // Assistant reply cut short by a barge-in; content holds only what was spoken.
  bool truncated = false;

  static Message system(std::string text) { return {Role::system, std::move(text), {}, {}, false}; }
  static Message user(std::string text) { return {Role::user, std::move(text), {}, {}, false}; }
  static Message assistant(std::optional<std::string> text, std::vector<ToolCall> calls = {}) {
    return {Role::assistant, std::move(text), std::move(calls), {}, false};
  }
  static Message tool(std::string call_id, std::string result) {
    return {Role::tool, std::move(result), {}, std::move(call_id), false};
  }
};

nlohmann::json to_json(const Message& m);

enum class DeltaKind { text, tool_call_fragment, finish };

struct ToolCallFragment {
  std::optional<std::string> id;
  std::optional<std::string> name;
  std::string arguments;
};

struct StreamDelta {
  DeltaKind kind = DeltaKind::text;
  std::string text;
  int tool_index = -1;
  ToolCallFragment tool_fragment;
  std::string finish_reason;
  double at_ms = 0.0;
};

struct LlmConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string api_key;
  std::string model = "default";
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  int connect_timeout_ms = 5000;
  int read_timeout_ms = 60000;

  // OPENAI_BASE_URL, OPENAI_API_KEY, LLM_MODEL.
  static LlmConfig from_env();
};

// Incremental Server-Sent Events framing. feed() accepts arbitrary byte
// splits and returns the payloads of complete "data:" lines. Comment lines
// and the event/id/retry fields are skipped; any other line is a
// protocol-error.
class SseParser {
 public:
  std::vector<std::string> feed(std::string_view bytes);
  // Any unterminated trailing line, for end-of-stream handling.
  std::vector<std::string> finish();

 private:
  std::optional<std::string> take_line(std::string_view line);
  std::string partial_;
};

inline constexpr std::string_view kSseDone = "[DONE]";

// One streamed chat-completion chunk to deltas. A chunk with an empty (or
// missing) choices array yields nothing.
std::vector<StreamDelta> decode_chunk(const nlohmann::json& chunk, double at_ms);

nlohmann::json build_chat_request(const LlmConfig& config, std::span<const Message> messages,
                                  const nlohmann::json& tools);

// Concatenates fragments per tool_index; id and name come from the first
// fragment carrying them; output is ordered by index. With validate set,
// arguments that do not parse as one JSON object throw
// malformed-tool-arguments naming the tool. Empty arguments read as "{}".
std::vector<ToolCall> accumulate_tool_calls(std::span<const StreamDelta> deltas, bool validate = true);

struct ChatStreamStats {
  double request_sent_ms = 0.0;
  double first_delta_ms = -1.0;  // first TEXT or TOOL_CALL_FRAGMENT, -1 if none
  double finished_ms = 0.0;
  std::size_t text_deltas = 0;
  std::size_t tool_fragments = 0;
  std::string finish_reason;
  bool cancelled = false;

  double ttft_ms() const { return first_delta_ms < 0 ? -1.0 : first_delta_ms - request_sent_ms; }
};

using DeltaHandler = std::function<void(const StreamDelta&)>;

// Streams POST {base_url}/v1/chat/completions. Deltas reach on_delta in
// arrival order, ending with FINISH. Errors: request-error (HTTP status or
// transport), protocol-error (malformed SSE or JSON), truncated-stream (ended
// without a finish_reason). Cancelling the token aborts the transfer and
// returns stats with cancelled set.
ChatStreamStats chat_stream(const LlmConfig& config, std::span<const Message> messages,
                            const nlohmann::json& tools, const DeltaHandler& on_delta,
                            const CancelToken* cancel = nullptr);

}  // namespace voice
