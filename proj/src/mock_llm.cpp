#include <httplib.h>

#include "voice/clock.hpp"
#include "voice/error.hpp"
#include "voice/mock.hpp"

namespace voice {

using nlohmann::json;

namespace {

std::string sse(const json& chunk) { return "data: " + chunk.dump() + "\n\n"; }

json chunk_with(const std::string& model, json choices) {
  return {{"id", "chatcmpl-mock"},
          {"object", "chat.completion.chunk"},
          {"created", 0},
          {"model", model},
          {"choices", std::move(choices)}};
}

json delta_chunk(const std::string& model, json delta, json finish = nullptr) {
  return chunk_with(model, json::array({{{"index", 0}, {"delta", std::move(delta)}, {"finish_reason", finish}}}));
}

// Timed SSE events for one response. `at` is relative to the first content
// event; the role chunk goes out immediately (at < 0).
struct Event {
  double at;
  std::string data;
  bool content;
};

std::vector<Event> build_events(const ScenarioTurn& turn, const ScriptRound& round, const std::string& id_prefix,
                                const MockLlmOptions& opt) {
  std::vector<Event> events;
  events.push_back({-1.0, sse(delta_chunk(opt.model, {{"role", "assistant"}, {"content", ""}})), false});
  std::size_t n = 0;
  auto next_at = [&] { return static_cast<double>(n++) * turn.llm_inter_token_ms; };

  for (const auto& token : round.tokens) {
    events.push_back({next_at(), sse(delta_chunk(opt.model, {{"content", token}})), true});
    if (opt.inject_empty_choices_chunk && events.size() == 2) {
      events.push_back({events.back().at, sse(chunk_with(opt.model, json::array())), false});
    }
  }
  for (std::size_t i = 0; i < round.tool_calls.size(); ++i) {
    const auto& call = round.tool_calls[i];
    const std::string id =
        call.id.empty() ? id_prefix + std::to_string(i) : call.id;
    json head{{"index", i}, {"id", id}, {"type", "function"}, {"function", {{"name", call.name}, {"arguments", ""}}}};
    events.push_back({next_at(), sse(delta_chunk(opt.model, {{"tool_calls", json::array({head})}})), true});
    for (std::size_t pos = 0; pos < call.arguments.size(); pos += 8) {
      json frag{{"index", i}, {"function", {{"arguments", call.arguments.substr(pos, 8)}}}};
      events.push_back({next_at(), sse(delta_chunk(opt.model, {{"tool_calls", json::array({frag})}})), true});
    }
  }
  const double end_at = n == 0 ? 0.0 : events.back().at;
  const char* finish = round.tool_calls.empty() ? "stop" : "tool_calls";
  events.push_back({end_at, sse(delta_chunk(opt.model, json::object(), finish)), false});
  events.push_back({end_at, "data: [DONE]\n\n", false});
  return events;
}

}  // namespace

MockLlm::MockLlm(Scenario scenario, const std::string& host, uint16_t port)
    : scenario_(std::move(scenario)), server_(std::make_unique<httplib::Server>()), host_(host) {
  server_->set_tcp_nodelay(true);
  server_->set_keep_alive_max_count(1);
  server_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const double received = now_ms();
    json body = json::parse(req.body, nullptr, false);
    {
      std::lock_guard lock(mutex_);
      ++stats_.requests;
      stats_.request_bodies.push_back(body);
      stats_.request_received_ms.push_back(received);
    }
    if (scenario_.llm.required_api_key &&
        req.get_header_value("Authorization") != "Bearer " + *scenario_.llm.required_api_key) {
      res.status = 401;
      res.set_content(R"({"error":{"message":"invalid api key"}})", "application/json");
      return;
    }
    if (scenario_.llm.fail_status) {
      res.status = scenario_.llm.fail_status;
      res.set_content(R"({"error":{"message":"scripted failure"}})", "application/json");
      return;
    }
    if (!body.is_object() || !body.contains("messages") || !body["messages"].is_array()) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"messages required"}})", "application/json");
      return;
    }

    std::size_t users = 0, assistants_after = 0;
    for (const auto& m : body["messages"]) {
      const std::string role = m.value("role", "");
      if (role == "user") {
        ++users;
        assistants_after = 0;
      } else if (role == "assistant") {
        ++assistants_after;
      }
    }
    const auto& turn = scenario_.turn(users == 0 ? 0 : users - 1);
    const auto rounds = script_rounds(turn);
    const std::size_t round_index = std::min(assistants_after, rounds.size() - 1);
    const std::string id_prefix = "call_" + std::to_string(users) + "_" + std::to_string(assistants_after) + "_";
    auto events = build_events(turn, rounds[round_index], id_prefix, scenario_.llm);

    double first_at = received + turn.llm_ttft_ms;
    if (cold_pending_.exchange(false)) first_at += scenario_.llm.cold_start_ms;
    const int truncate_after = scenario_.llm.truncate_after_chunks;

    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, events = std::move(events), first_at, truncate_after](std::size_t, httplib::DataSink& sink) {
          int sent = 0;
          bool first_content = true;
          for (const auto& ev : events) {
            if (ev.at >= 0) sleep_until_ms(first_at + ev.at);
            if (truncate_after >= 0 && sent >= truncate_after) {
              std::lock_guard lock(mutex_);
              ++stats_.aborted_streams;
              return false;
            }
            if (!sink.write(ev.data.data(), ev.data.size())) {
              std::lock_guard lock(mutex_);
              ++stats_.aborted_streams;
              return false;
            }
            ++sent;
            if (ev.content && first_content) {
              first_content = false;
              std::lock_guard lock(mutex_);
              stats_.first_content_ms.push_back(now_ms());
            }
          }
          sink.done();
          std::lock_guard lock(mutex_);
          ++stats_.completed_streams;
          return true;
        });
  };
  server_->Post("/v1/chat/completions", handler);
  server_->Post("/chat/completions", handler);

  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(Errc::connect_error, "mock llm cannot bind " + host + ":" + std::to_string(port));
  port_ = static_cast<uint16_t>(bound);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockLlm::~MockLlm() { stop(); }

std::string MockLlm::base_url() const { return "http://" + host_ + ":" + std::to_string(port_) + "/v1"; }

MockLlm::Stats MockLlm::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

void MockLlm::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace voice
