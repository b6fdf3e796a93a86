#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace voice {

inline constexpr int kScenarioSchemaVersion = 1;

struct ToolCallDirective {
  std::string name;
  // Sent verbatim as the streamed "arguments" string; need not be valid JSON.
  std::string arguments;
  std::string id;        // generated when empty
  bool parallel = false;  // joins the previous directive's response
};

using ScriptItem = std::variant<std::string, ToolCallDirective>;

struct ScenarioTurn {
  std::string user_transcript;
  std::vector<std::string> stt_partials;
  double stt_final_delay_ms = 0.0;
  double llm_ttft_ms = 0.0;
  double llm_inter_token_ms = 0.0;
  std::vector<ScriptItem> llm_script;
  double tts_ttfb_ms = 0.0;
  double tts_ms_per_word = 60.0;
  double tts_rtf = 0.0;

  // All text tokens concatenated.
  std::string script_text() const;
};

// One LLM response of a turn: text tokens and, when it ends in tool calls,
// those calls. A turn's script splits into rounds at tool-call directives.
struct ScriptRound {
  std::vector<std::string> tokens;
  std::vector<ToolCallDirective> tool_calls;
};

std::vector<ScriptRound> script_rounds(const ScenarioTurn& turn);

struct MockSttOptions {
  int partial_every_frames = 10;
  std::optional<std::string> required_token;
  double cold_start_ms = 0.0;
  bool omit_is_final = false;  // malformed-message injection
};

struct MockLlmOptions {
  std::string model = "mock-llm";
  double cold_start_ms = 0.0;
  bool inject_empty_choices_chunk = false;
  int fail_status = 0;
  int truncate_after_chunks = -1;  // drop the connection after N data chunks
  std::optional<std::string> required_api_key;
};

struct MockTtsOptions {
  double cold_start_ms = 0.0;
  int fail_status = 0;
  int drop_after_chunks = -1;
  double chunk_ms = 20.0;
  double tone_hz = 440.0;
};

struct Scenario {
  int schema_version = kScenarioSchemaVersion;
  std::string name;
  std::vector<ScenarioTurn> turns;
  MockSttOptions stt;
  MockLlmOptions llm;
  MockTtsOptions tts;

  const ScenarioTurn& turn(std::size_t index) const { return turns[index % turns.size()]; }
};

// Throws load-error. Syntax errors carry "line L, column C"; semantic errors
// name the offending field as a JSON path such as /turns/2/llm_ttft_ms.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const Scenario& scenario);

}  // namespace voice
