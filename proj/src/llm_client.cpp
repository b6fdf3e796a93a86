#include "voice/llm_client.hpp"

#include <exception>
#include <map>

#include "voice/clock.hpp"
#include "voice/error.hpp"
#include "voice/http.hpp"
#include "voice/url.hpp"

namespace voice {

using nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
  }
  return "user";
}

json to_json(const Message& m) {
  json j{{"role", to_string(m.role)}};
  j["content"] = m.content ? json(*m.content) : json(nullptr);
  if (!m.tool_calls.empty()) {
    json calls = json::array();
    for (const auto& c : m.tool_calls) {
      calls.push_back({{"id", c.id},
                       {"type", "function"},
                       {"function", {{"name", c.name}, {"arguments", c.arguments_json}}}});
    }
    j["tool_calls"] = std::move(calls);
  }
  if (m.tool_call_id) j["tool_call_id"] = *m.tool_call_id;
  return j;
}

LlmConfig LlmConfig::from_env() {
  LlmConfig c;
  c.base_url = env_or("OPENAI_BASE_URL", c.base_url);
  c.api_key = env_or("OPENAI_API_KEY", "");
  c.model = env_or("LLM_MODEL", c.model);
  return c;
}

// --- SSE --------------------------------------------------------------------

std::optional<std::string> SseParser::take_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.empty() || line.front() == ':') return std::nullopt;
  const auto colon = line.find(':');
  const std::string_view field = line.substr(0, colon);
  std::string_view value = colon == std::string_view::npos ? std::string_view{} : line.substr(colon + 1);
  if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
  if (field == "data") return std::string(value);
  if (field == "event" || field == "id" || field == "retry") return std::nullopt;
  throw Error(Errc::protocol_error, "malformed SSE line", std::string(line));
}

std::vector<std::string> SseParser::feed(std::string_view bytes) {
  std::vector<std::string> out;
  partial_.append(bytes);
  std::size_t start = 0;
  for (std::size_t nl; (nl = partial_.find('\n', start)) != std::string::npos; start = nl + 1) {
    if (auto data = take_line(std::string_view(partial_).substr(start, nl - start))) {
      out.push_back(std::move(*data));
    }
  }
  partial_.erase(0, start);
  return out;
}

std::vector<std::string> SseParser::finish() {
  std::vector<std::string> out;
  if (!partial_.empty()) {
    if (auto data = take_line(partial_)) out.push_back(std::move(*data));
    partial_.clear();
  }
  return out;
}

// --- chunk decoding ---------------------------------------------------------

std::vector<StreamDelta> decode_chunk(const json& chunk, double at_ms) {
  std::vector<StreamDelta> out;
  if (!chunk.is_object()) throw Error(Errc::protocol_error, "chunk is not an object", chunk.dump());
  auto choices = chunk.find("choices");
  if (choices == chunk.end() || !choices->is_array() || choices->empty()) return out;
  const json& choice = (*choices)[0];
  if (auto delta = choice.find("delta"); delta != choice.end() && delta->is_object()) {
    if (auto content = delta->find("content"); content != delta->end() && content->is_string()) {
      std::string text = content->get<std::string>();
      if (!text.empty()) {
        StreamDelta d;
        d.kind = DeltaKind::text;
        d.text = std::move(text);
        d.at_ms = at_ms;
        out.push_back(std::move(d));
      }
    }
    if (auto calls = delta->find("tool_calls"); calls != delta->end() && calls->is_array()) {
      for (const auto& call : *calls) {
        StreamDelta d;
        d.kind = DeltaKind::tool_call_fragment;
        d.at_ms = at_ms;
        if (!call.contains("index") || !call["index"].is_number_integer()) {
          throw Error(Errc::protocol_error, "tool call fragment without index", chunk.dump());
        }
        d.tool_index = call["index"].get<int>();
        if (auto id = call.find("id"); id != call.end() && id->is_string()) {
          d.tool_fragment.id = id->get<std::string>();
        }
        if (auto fn = call.find("function"); fn != call.end() && fn->is_object()) {
          if (auto name = fn->find("name"); name != fn->end() && name->is_string()) {
            d.tool_fragment.name = name->get<std::string>();
          }
          if (auto args = fn->find("arguments"); args != fn->end() && args->is_string()) {
            d.tool_fragment.arguments = args->get<std::string>();
          }
        }
        out.push_back(std::move(d));
      }
    }
  }
  if (auto reason = choice.find("finish_reason"); reason != choice.end() && reason->is_string()) {
    StreamDelta d;
    d.kind = DeltaKind::finish;
    d.finish_reason = reason->get<std::string>();
    d.at_ms = at_ms;
    out.push_back(std::move(d));
  }
  return out;
}

json build_chat_request(const LlmConfig& config, std::span<const Message> messages, const json& tools) {
  json req{{"model", config.model}, {"stream", true}};
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(to_json(m));
  req["messages"] = std::move(msgs);
  if (tools.is_array() && !tools.empty()) req["tools"] = tools;
  if (config.temperature) req["temperature"] = *config.temperature;
  if (config.max_tokens) req["max_tokens"] = *config.max_tokens;
  return req;
}

std::vector<ToolCall> accumulate_tool_calls(std::span<const StreamDelta> deltas, bool validate) {
  std::map<int, ToolCall> by_index;
  for (const auto& d : deltas) {
    if (d.kind != DeltaKind::tool_call_fragment) continue;
    auto& call = by_index[d.tool_index];
    if (call.id.empty() && d.tool_fragment.id) call.id = *d.tool_fragment.id;
    if (call.name.empty() && d.tool_fragment.name) call.name = *d.tool_fragment.name;
    call.arguments_json += d.tool_fragment.arguments;
  }
  std::vector<ToolCall> out;
  out.reserve(by_index.size());
  for (auto& [index, call] : by_index) {
    if (call.arguments_json.empty()) call.arguments_json = "{}";
    if (validate) {
      bool ok = false;
      try {
        ok = json::parse(call.arguments_json).is_object();
      } catch (const json::parse_error&) {
      }
      if (!ok) {
        throw Error(Errc::malformed_tool_arguments,
                    "arguments for tool '" + call.name + "' are not a JSON object", call.arguments_json);
      }
    }
    out.push_back(std::move(call));
  }
  return out;
}

// --- streaming request ------------------------------------------------------

ChatStreamStats chat_stream(const LlmConfig& config, std::span<const Message> messages, const json& tools,
                            const DeltaHandler& on_delta, const CancelToken* cancel) {
  if (messages.empty()) throw Error(Errc::invalid_argument, "chat_stream needs at least one message");
  if (config.base_url.empty()) throw Error(Errc::invalid_argument, "LLM base_url is empty");

  const Url url = parse_url(config.base_url);
  std::string path = url.path_prefix();
  if (!path.ends_with("/v1")) path += "/v1";
  path += "/chat/completions";

  HttpStreamRequest req;
  req.url = url;
  req.path = path;
  req.body = build_chat_request(config, messages, tools).dump();
  req.headers = {{"Accept", "text/event-stream"}};
  if (!config.api_key.empty()) req.headers.emplace_back("Authorization", "Bearer " + config.api_key);
  req.connect_timeout_ms = config.connect_timeout_ms;
  req.read_timeout_ms = config.read_timeout_ms;

  ChatStreamStats stats;
  SseParser sse;
  bool done = false;
  bool finished = false;
  std::exception_ptr failure;

  auto handle_payload = [&](const std::string& payload) {
    if (done) return;
    if (payload == kSseDone) {
      done = true;
      return;
    }
    json chunk;
    try {
      chunk = json::parse(payload);
    } catch (const json::parse_error&) {
      throw Error(Errc::protocol_error, "SSE data is not JSON", payload);
    }
    const double at = now_ms();
    for (auto& d : decode_chunk(chunk, at)) {
      if (d.kind == DeltaKind::finish) {
        finished = true;
        stats.finish_reason = d.finish_reason;
      } else {
        if (stats.first_delta_ms < 0) stats.first_delta_ms = at;
        ++(d.kind == DeltaKind::text ? stats.text_deltas : stats.tool_fragments);
      }
      on_delta(d);
    }
  };

  stats.request_sent_ms = now_ms();
  bool got_bytes = false;
  const HttpStreamResult res = http_post_stream(req, cancel, [&](std::string_view bytes) {
    got_bytes = true;
    try {
      for (const auto& payload : sse.feed(bytes)) handle_payload(payload);
    } catch (...) {
      failure = std::current_exception();
      return false;
    }
    return true;
  });
  stats.finished_ms = now_ms();

  if (failure) std::rethrow_exception(failure);
  if (res.cancelled || (cancel && cancel->cancelled())) {
    stats.cancelled = true;
    return stats;
  }
  if (res.status != 0 && res.status != 200) {
    throw Error(Errc::request_error, "chat completion returned HTTP " + std::to_string(res.status),
                res.error_body, res.status);
  }
  if (!res.transport_error.empty() && !finished) {
    if (got_bytes) throw Error(Errc::truncated_stream, "stream dropped mid-response: " + res.transport_error);
    throw Error(Errc::request_error, "chat completion transport failure: " + res.transport_error);
  }
  for (const auto& payload : sse.finish()) handle_payload(payload);
  if (!finished) throw Error(Errc::truncated_stream, "stream ended without a finish_reason");
  return stats;
}

}  // namespace voice
