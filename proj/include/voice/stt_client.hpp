#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>

#include "voice/audio.hpp"
#include "voice/error.hpp"

namespace voice {

namespace net {
class WsClient;
}

struct TranscriptEvent {
  std::string text;
  bool is_final = false;
  bool speech_final = false;
  double audio_start_ms = 0.0;
  double received_at_ms = 0.0;
};

enum class SttProvider {
  minimal,   // flat {text, is_final, speech_final, audio_start_ms}
  deepgram,  // channel.alternatives[0].transcript, start in seconds
};

struct SttSessionConfig {
  std::string endpoint_url;
  std::optional<std::string> auth_token;
  bool auth_in_query = false;
  SttProvider provider = SttProvider::minimal;
  int sample_rate_hz = kMicSampleRate;
  std::string encoding = "linear16";
  int keepalive_interval_ms = 5000;
  int connect_timeout_ms = 5000;

  // STT_URL, STT_API_KEY, STT_PROVIDER ("minimal" | "deepgram").
  static SttSessionConfig from_env();
};

// Maps one provider text message to a transcript. Returns nullopt for
// messages that carry no transcript (metadata, utterance-end markers) and
// throws protocol-error, with the raw payload as detail, for results that
// are missing required fields.
std::optional<TranscriptEvent> parse_transcript_message(SttProvider provider,
                                                        const std::string& payload,
                                                        double received_at_ms);

// Persistent streaming-recognition session. One thread may send while another
// reads events.
class SttSession {
 public:
  // Throws connect-error (auth refusals carry status 401/403).
  static std::unique_ptr<SttSession> open(const SttSessionConfig& config);
  ~SttSession();
  SttSession(const SttSession&) = delete;
  SttSession& operator=(const SttSession&) = delete;

  // Throws invalid-argument for anything but 16 kHz mono, session-closed
  // after close() or a dropped connection.
  void send_audio(const AudioFrame& frame);
  // Asks the service to finalize the current utterance now.
  void finalize();
  // Sends CloseStream and closes. Idempotent.
  void close();

  // Next event in wire order; nullopt at end of stream. Throws the stored
  // protocol-error for a malformed message, or timeout.
  std::optional<TranscriptEvent> next_event(
      std::optional<std::chrono::milliseconds> timeout = std::nullopt);

  bool is_open() const;
  std::size_t keepalives_sent() const;

 private:
  explicit SttSession(SttSessionConfig config);
  void reader_loop();
  void keepalive_loop();
  void send_control(const std::string& json);

  using Item = std::variant<TranscriptEvent, Error>;

  SttSessionConfig config_;
  std::unique_ptr<net::WsClient> ws_;
  std::thread reader_;
  std::thread keepalive_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Item> events_;
  bool ended_ = false;
  bool closed_ = false;
  double last_send_ms_ = 0.0;
  std::size_t keepalives_ = 0;
};

}  // namespace voice
