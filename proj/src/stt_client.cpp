#include "voice/stt_client.hpp"

#include "json.hpp"

#include "voice/clock.hpp"
#include "voice/net/ws.hpp"
#include "voice/url.hpp"

namespace voice {

using nlohmann::json;

SttSessionConfig SttSessionConfig::from_env() {
  SttSessionConfig c;
  c.endpoint_url = env_or("STT_URL", "ws://127.0.0.1:8081/v1/listen");
  if (auto key = env_or("STT_API_KEY", ""); !key.empty()) c.auth_token = key;
  c.provider = env_or("STT_PROVIDER", "minimal") == "deepgram" ? SttProvider::deepgram
                                                               : SttProvider::minimal;
  return c;
}

namespace {

bool require_bool(const json& j, const char* field, const std::string& payload) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_boolean()) {
    throw Error(Errc::protocol_error, std::string("transcript message missing boolean '") + field + "'",
                payload);
  }
  return it->get<bool>();
}

}  // namespace

std::optional<TranscriptEvent> parse_transcript_message(SttProvider provider, const std::string& payload,
                                                        double received_at_ms) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::parse_error&) {
    throw Error(Errc::protocol_error, "transcript message is not JSON", payload);
  }
  if (!j.is_object()) throw Error(Errc::protocol_error, "transcript message is not an object", payload);

  TranscriptEvent ev;
  ev.received_at_ms = received_at_ms;
  if (provider == SttProvider::deepgram) {
    if (j.value("type", "") != "Results") return std::nullopt;
    const auto& alts = j.at("channel").at("alternatives");
    if (!alts.is_array() || alts.empty()) throw Error(Errc::protocol_error, "no alternatives", payload);
    ev.text = alts[0].value("transcript", "");
    ev.is_final = require_bool(j, "is_final", payload);
    ev.speech_final = j.value("speech_final", false);
    ev.audio_start_ms = j.value("start", 0.0) * 1000.0;
  } else {
    const std::string type = j.value("type", "Results");
    if (type != "Results") return std::nullopt;
    if (!j.contains("text") || !j["text"].is_string()) {
      throw Error(Errc::protocol_error, "transcript message missing string 'text'", payload);
    }
    ev.text = j["text"].get<std::string>();
    ev.is_final = require_bool(j, "is_final", payload);
    ev.speech_final = require_bool(j, "speech_final", payload);
    ev.audio_start_ms = j.value("audio_start_ms", 0.0);
  }
  if (ev.speech_final && !ev.is_final) {
    throw Error(Errc::protocol_error, "speech_final without is_final", payload);
  }
  if (ev.is_final && ev.text.empty() && !ev.speech_final) return std::nullopt;
  return ev;
}

SttSession::SttSession(SttSessionConfig config) : config_(std::move(config)) {}

std::unique_ptr<SttSession> SttSession::open(const SttSessionConfig& config) {
  if (config.sample_rate_hz != kMicSampleRate) {
    throw Error(Errc::invalid_argument, "STT sessions run at 16000 Hz");
  }
  std::string url = config.endpoint_url;
  const char sep = url.find('?') == std::string::npos ? '?' : '&';
  url += sep;
  url += "encoding=" + config.encoding + "&sample_rate=" + std::to_string(config.sample_rate_hz) +
         "&channels=1";
  net::Headers headers;
  if (config.auth_token) {
    if (config.auth_in_query) {
      url += "&token=" + *config.auth_token;
    } else {
      headers.emplace_back("Authorization", "Token " + *config.auth_token);
    }
  }

  std::unique_ptr<SttSession> session(new SttSession(config));
  session->ws_ = net::WsClient::connect(url, headers,
                                        std::chrono::milliseconds(config.connect_timeout_ms));
  session->last_send_ms_ = now_ms();
  SttSession* raw = session.get();
  session->reader_ = std::thread([raw] { raw->reader_loop(); });
  if (config.keepalive_interval_ms > 0) {
    session->keepalive_ = std::thread([raw] { raw->keepalive_loop(); });
  }
  return session;
}

SttSession::~SttSession() {
  close();
  if (keepalive_.joinable()) keepalive_.join();
  if (ws_) ws_->close();
  if (reader_.joinable()) reader_.join();
  ws_.reset();
}

void SttSession::reader_loop() {
  while (true) {
    auto msg = ws_->receive();
    if (!msg) break;
    if (msg->binary) continue;
    Item item = Error(Errc::protocol_error, "unreachable");
    try {
      auto ev = parse_transcript_message(config_.provider, msg->data, now_ms());
      if (!ev) continue;
      item = std::move(*ev);
    } catch (const Error& e) {
      item = e;
    }
    std::lock_guard lock(mutex_);
    events_.push_back(std::move(item));
    cv_.notify_all();
  }
  std::lock_guard lock(mutex_);
  ended_ = true;
  closed_ = true;
  cv_.notify_all();
}

void SttSession::keepalive_loop() {
  const double interval = config_.keepalive_interval_ms;
  std::unique_lock lock(mutex_);
  while (!closed_) {
    const double due = last_send_ms_ + interval;
    if (now_ms() >= due) {
      last_send_ms_ = now_ms();
      ++keepalives_;
      lock.unlock();
      ws_->send_text(R"({"type":"KeepAlive"})");
      lock.lock();
      continue;
    }
    cv_.wait_until(lock, to_time_point(due));
  }
}

void SttSession::send_audio(const AudioFrame& frame) {
  if (frame.sample_rate_hz != config_.sample_rate_hz || frame.channels != 1) {
    throw Error(Errc::invalid_argument, "STT audio must be " + std::to_string(config_.sample_rate_hz) +
                                            " Hz mono, got " + std::to_string(frame.sample_rate_hz) +
                                            " Hz");
  }
  {
    std::lock_guard lock(mutex_);
    if (closed_) throw Error(Errc::session_closed, "send_audio on a closed STT session");
    last_send_ms_ = now_ms();
  }
  const auto bytes = to_le_bytes(frame.samples);
  if (!ws_->send_binary(std::string(bytes.begin(), bytes.end()))) {
    throw Error(Errc::session_closed, "STT connection is closed");
  }
}

void SttSession::send_control(const std::string& text) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) throw Error(Errc::session_closed, "STT session is closed");
    last_send_ms_ = now_ms();
  }
  if (!ws_->send_text(text)) throw Error(Errc::session_closed, "STT connection is closed");
}

void SttSession::finalize() { send_control(R"({"type":"Finalize"})"); }

void SttSession::close() {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    closed_ = true;
    cv_.notify_all();
  }
  // The service flushes pending results and closes its side; next_event()
  // keeps returning them until end of stream.
  if (ws_) ws_->send_text(R"({"type":"CloseStream"})");
}

std::optional<TranscriptEvent> SttSession::next_event(std::optional<std::chrono::milliseconds> timeout) {
  std::unique_lock lock(mutex_);
  auto ready = [&] { return !events_.empty() || ended_; };
  if (timeout) {
    if (!cv_.wait_for(lock, *timeout, ready)) throw Error(Errc::timeout, "no transcript within deadline");
  } else {
    cv_.wait(lock, ready);
  }
  if (events_.empty()) return std::nullopt;
  Item item = std::move(events_.front());
  events_.pop_front();
  if (auto* err = std::get_if<Error>(&item)) throw *err;
  return std::get<TranscriptEvent>(std::move(item));
}

bool SttSession::is_open() const {
  std::lock_guard lock(mutex_);
  return !closed_;
}

std::size_t SttSession::keepalives_sent() const {
  std::lock_guard lock(mutex_);
  return keepalives_;
}

}  // namespace voice
