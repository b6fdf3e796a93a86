#include "voice/gateway.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "voice/clock.hpp"
#include "voice/control.hpp"
#include "voice/error.hpp"
#include "voice/net/ws.hpp"
#include "voice/url.hpp"

namespace voice {

using nlohmann::json;

namespace {

class WsSink final : public ClientSink {
 public:
  explicit WsSink(std::shared_ptr<net::WsConnection> conn) : conn_(std::move(conn)) {}

  void send_audio(const AudioFrame& frame) override {
    auto bytes = to_le_bytes(frame.samples);
    conn_->send_binary(std::string(bytes.begin(), bytes.end()));
  }
  void send_control(const ControlMessage& message) override { conn_->send_text(encode(message)); }
  void drop_pending_audio() override { conn_->drop_pending_binary(); }

 private:
  std::shared_ptr<net::WsConnection> conn_;
};

bool reachable(const std::string& url, int timeout_ms) {
  try {
    const Url u = parse_url(url);
    net::asio::io_context ioc;
    net::beast::tcp_stream stream(ioc);
    net::tcp::resolver resolver(ioc);
    auto results = resolver.resolve(u.host, std::to_string(u.port));
    stream.expires_after(std::chrono::milliseconds(timeout_ms));
    bool ok = false;
    stream.async_connect(results, [&](net::beast::error_code ec, const auto&) { ok = !ec; });
    ioc.run();
    return ok;
  } catch (const std::exception&) {
    return false;
  }
}

std::string content_type_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

}  // namespace

GatewayConfig GatewayConfig::from_env() {
  GatewayConfig c;
  c.pipeline = PipelineConfig::from_env();
  const std::string bind = env_or("BIND_ADDR", "");
  if (!bind.empty()) std::tie(c.host, c.port) = parse_host_port(bind);
  return c;
}

class GatewayServer::Session : public std::enable_shared_from_this<Session> {
 public:
  Session(GatewayServer& server, std::uint64_t id, std::shared_ptr<net::WsConnection> conn)
      : server_(server),
        id_(id),
        conn_(std::move(conn)),
        sink_(conn_),
        config_(server.config_.pipeline),
        detector_(config_.vad, config_.vad_calibration_rms),
        vad_(config_.vad) {}

  void start() {
    PipelineSession::Callbacks callbacks;
    callbacks.on_audio_started = [weak = weak_from_this()] {
      if (auto s = weak.lock()) s->conn_->post([s] { s->on_agent_audio_started(); });
    };
    callbacks.on_turn_done = [weak = weak_from_this()](const TurnResult& r) {
      if (r.outcome == TurnOutcome::failed) spdlog::warn("turn failed: {}", r.error);
      if (auto s = weak.lock()) s->conn_->post([s] { s->on_agent_done(); });
    };
    pipeline_ = std::make_unique<PipelineSession>(config_, sink_, std::move(callbacks));

    net::WsConnection::Handlers h;
    h.on_message = [weak = weak_from_this()](net::WsMessage&& msg) {
      if (auto s = weak.lock()) s->on_message(std::move(msg));
    };
    h.on_close = [weak = weak_from_this()](const net::beast::error_code&) {
      auto s = weak.lock();
      if (!s) return;
      GatewayServer& server = s->server_;
      {
        std::lock_guard lock(server.mutex_);
        ++server.teardown_threads_;
      }
      std::thread([s = std::move(s), &server]() mutable {
        s->teardown();
        s.reset();
        std::lock_guard lock(server.mutex_);
        --server.teardown_threads_;
        server.cv_.notify_all();
      }).detach();
    };

    try {
      stt_ = SttSession::open(config_.stt);
    } catch (const Error& e) {
      spdlog::error("session {}: speech recognition unavailable: {}", id_, e.what());
      conn_->start(std::move(h));
      conn_->send_text(encode(ControlMessage::error(std::string("stt unavailable: ") + e.what())));
      conn_->close();
      return;
    }
    reader_ = std::thread([this] { read_transcripts(); });
    conn_->start(std::move(h));
  }

  // Idempotent; safe from any thread except the session's own workers.
  void teardown() {
    if (torn_down_.exchange(true)) return;
    closing_ = true;
    if (pipeline_) pipeline_->shutdown();
    if (stt_) stt_->close();
    if (reader_.joinable()) reader_.join();
    if (pipeline_) pipeline_->shutdown();
    conn_->close();
    stt_.reset();
    server_.session_finished(id_);
  }

  void close_connection() { conn_->close(); }

 private:
  // Runs on the connection strand.
  void on_message(net::WsMessage&& msg) {
    if (!msg.binary) return;  // the client sends no control messages
    if (msg.data.size() != kClientFrameBytes) {
      {
        std::lock_guard lock(server_.mutex_);
        ++server_.stats_.dropped_frames;
      }
      conn_->send_text(encode(ControlMessage::error("protocol-error: audio frame must be " +
                                                    std::to_string(kClientFrameBytes) + " bytes, got " +
                                                    std::to_string(msg.data.size()))));
      return;
    }
    AudioFrame frame;
    frame.sample_rate_hz = kMicSampleRate;
    frame.timestamp_ms = now_ms();
    frame.samples = from_le_bytes(
        std::span(reinterpret_cast<const uint8_t*>(msg.data.data()), msg.data.size()));
    const bool speaking = pipeline_->state() == SessionState::speaking;
    AudioFrame gated = gate_mic(frame, speaking, config_.echo_gate_attenuation);

    if (stt_ && !closing_) {
      try {
        stt_->send_audio(gated);
      } catch (const Error& e) {
        spdlog::warn("session {}: stt send failed: {}", id_, e.what());
      }
    }

    vad_buffer_.insert(vad_buffer_.end(), gated.samples.begin(), gated.samples.end());
    const std::size_t n = config_.vad.frame_samples();
    while (vad_buffer_.size() >= n) {
      AudioFrame vf;
      vf.sample_rate_hz = kMicSampleRate;
      vf.samples.assign(vad_buffer_.begin(), vad_buffer_.begin() + static_cast<std::ptrdiff_t>(n));
      vad_buffer_.erase(vad_buffer_.begin(), vad_buffer_.begin() + static_cast<std::ptrdiff_t>(n));
      auto step = vad_.on_frame(detector_.speech_probability(vf));
      if (!step.event) continue;
      switch (step.event->kind) {
        case TurnEventKind::utterance_ended:
          utterance_end_ms_ = now_ms();
          if (stt_) {
            try {
              stt_->finalize();
            } catch (const Error&) {
            }
          }
          break;
        case TurnEventKind::interruption:
          if (pipeline_->interrupt()) spdlog::info("session {}: barge-in", id_);
          break;
        default:
          break;
      }
    }
  }

  void on_agent_audio_started() {
    if (vad_.state() == TurnState::processing) vad_.on_signal(AgentSignal::agent_audio_started);
  }

  void on_agent_done() {
    if (vad_.state() == TurnState::speaking) {
      vad_.on_signal(AgentSignal::agent_done);
    } else if (vad_.state() == TurnState::processing) {
      vad_.reset();
    }
  }

  void read_transcripts() {
    std::string pending;
    try {
      while (auto ev = stt_->next_event()) {
        if (closing_) break;
        conn_->send_text(encode(ControlMessage::transcript(ev->text, ev->is_final)));
        if (!ev->is_final) continue;
        if (!ev->text.empty()) pending += (pending.empty() ? "" : " ") + ev->text;
        if (!ev->speech_final || trim(pending).empty()) continue;
        TranscriptEvent final_event = *ev;
        final_event.text = std::exchange(pending, {});
        const double end = utterance_end_ms_.load();
        {
          std::lock_guard lock(server_.mutex_);
          ++server_.stats_.turns_started;
        }
        if (closing_) break;
        pipeline_->start_turn(final_event, end > 0 ? std::optional(end) : std::nullopt);
      }
    } catch (const Error& e) {
      if (!closing_) {
        spdlog::warn("session {}: transcript stream failed: {}", id_, e.what());
        conn_->send_text(encode(ControlMessage::error(std::string(to_string(e.code())) + ": " + e.what())));
      }
    }
  }

  GatewayServer& server_;
  std::uint64_t id_;
  std::shared_ptr<net::WsConnection> conn_;
  WsSink sink_;
  PipelineConfig config_;
  std::unique_ptr<PipelineSession> pipeline_;
  std::unique_ptr<SttSession> stt_;
  std::thread reader_;
  EnergyDetector detector_;
  VadMachine vad_;
  std::vector<int16_t> vad_buffer_;
  std::atomic<double> utterance_end_ms_{-1.0};
  std::atomic<bool> closing_{false};
  std::atomic<bool> torn_down_{false};
};

GatewayServer::GatewayServer(GatewayConfig config) : config_(std::move(config)) { config_.pipeline.validate(); }

GatewayServer::~GatewayServer() { stop(); }

uint16_t GatewayServer::start() {
  net::HttpWsServer::Handlers handlers;
  handlers.check_upgrade = [](const net::HttpRequest& req) -> std::optional<net::HttpResponse> {
    const std::string target(req.target());
    if (target == "/ws" || target.starts_with("/ws?")) return std::nullopt;
    return net::make_response(req, net::http::status::not_found, "not found");
  };
  handlers.on_ws = [this](std::shared_ptr<net::WsConnection> conn, const net::HttpRequest&) {
    std::shared_ptr<Session> session;
    {
      std::lock_guard lock(mutex_);
      if (stopped_) {
        conn->close();
        return;
      }
      const auto id = next_id_++;
      session = std::make_shared<Session>(*this, id, conn);
      sessions_[id] = session;
      ++stats_.sessions_opened;
    }
    spdlog::info("client connected ({} active)", active_sessions());
    session->start();
  };
  handlers.on_http = [this](const net::HttpRequest& req) {
    std::string target(req.target());
    if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (req.method() != net::http::verb::get && req.method() != net::http::verb::head)
      return net::make_response(req, net::http::status::method_not_allowed, "method not allowed");
    if (target == "/healthz") {
      json h = health();
      auto status = h["status"] == "ok" ? net::http::status::ok : net::http::status::service_unavailable;
      return net::make_response(req, status, h.dump(), "application/json");
    }
    if (config_.static_dir.empty()) {
      if (target == "/") return net::make_response(req, net::http::status::ok, "voice agent gateway\n");
      return net::make_response(req, net::http::status::not_found, "not found");
    }
    if (target.find("..") != std::string::npos)
      return net::make_response(req, net::http::status::bad_request, "bad path");
    std::filesystem::path file = config_.static_dir / (target == "/" ? "index.html" : target.substr(1));
    if (std::filesystem::is_directory(file)) file /= "index.html";
    std::ifstream in(file, std::ios::binary);
    if (!in) return net::make_response(req, net::http::status::not_found, "not found");
    std::stringstream ss;
    ss << in.rdbuf();
    return net::make_response(req, net::http::status::ok, ss.str(), content_type_for(file));
  };

  server_ = std::make_unique<net::HttpWsServer>(std::move(handlers), config_.io_threads);
  port_ = server_->listen(config_.host, config_.port);
  spdlog::info("gateway listening on {}:{}", config_.host, port_);
  return port_;
}

void GatewayServer::stop() {
  if (stopped_.exchange(true)) return;
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, s] : sessions_) sessions.push_back(s);
  }
  for (auto& s : sessions) s->teardown();
  sessions.clear();
  {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, std::chrono::seconds(5), [&] { return sessions_.empty() && teardown_threads_ == 0; });
  }
  if (server_) server_->stop();
}

void GatewayServer::session_finished(std::uint64_t id) {
  {
    std::lock_guard lock(mutex_);
    if (sessions_.erase(id)) ++stats_.sessions_closed;
  }
  cv_.notify_all();
  spdlog::info("client disconnected ({} active)", active_sessions());
}

std::string GatewayServer::ws_url() const {
  const std::string host = config_.host == "0.0.0.0" ? "127.0.0.1" : config_.host;
  return "ws://" + host + ":" + std::to_string(port_) + "/ws";
}

GatewayServer::Stats GatewayServer::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::size_t GatewayServer::active_sessions() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

json GatewayServer::health() const {
  const auto& p = config_.pipeline;
  json deps{{"stt", reachable(p.stt.endpoint_url, config_.health_timeout_ms)},
            {"llm", reachable(p.agent.llm.base_url, config_.health_timeout_ms)},
            {"tts", reachable(p.tts.base_url, config_.health_timeout_ms)}};
  const bool ok = deps["stt"] && deps["llm"] && deps["tts"];
  return {{"status", ok ? "ok" : "degraded"}, {"sessions", active_sessions()}, {"dependencies", deps}};
}

}  // namespace voice
