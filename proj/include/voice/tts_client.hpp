#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "voice/audio.hpp"
#include "voice/cancel.hpp"
#include "voice/error.hpp"

namespace voice {

struct TtsConfig {
  std::string base_url = "http://127.0.0.1:8083";
  std::string api_key;
  std::string voice_id = "default";
  std::string model_id = "eleven_turbo_v2_5";
  int frame_ms = 20;
  int connect_timeout_ms = 5000;
  int read_timeout_ms = 30000;

  // TTS_URL, TTS_API_KEY, TTS_VOICE_ID.
  static TtsConfig from_env();
};

struct TtsRequest {
  std::string text;
  std::string voice_id;
  std::string model_id;
};

struct TtsStreamStats {
  double request_sent_ms = 0.0;
  double first_byte_ms = -1.0;
  double finished_ms = 0.0;
  double ttfb_ms = 0.0;
  double total_audio_ms = 0.0;
  double wall_ms = 0.0;
  double rtf = 0.0;
  std::size_t frames = 0;
  bool cancelled = false;
};

// Mid-stream failure; partial() holds the stats up to the drop.
class TruncatedAudioError : public Error {
 public:
  TruncatedAudioError(const std::string& message, TtsStreamStats partial)
      : Error(Errc::truncated_audio, message), partial_(partial) {}
  const TtsStreamStats& partial() const { return partial_; }

 private:
  TtsStreamStats partial_;
};

// Cuts an arbitrary byte stream of 16-bit LE PCM into fixed-size frames,
// carrying odd bytes and short tails across calls.
class PcmReframer {
 public:
  PcmReframer(int sample_rate_hz, int frame_ms);
  std::vector<AudioFrame> feed(std::string_view bytes, double at_ms);
  // Remaining samples as one short frame, if any.
  std::vector<AudioFrame> finish(double at_ms);
  std::size_t frame_samples() const { return frame_samples_; }

 private:
  int sample_rate_hz_;
  std::size_t frame_samples_;
  std::string carry_;
  std::vector<int16_t> samples_;
};

using FrameHandler = std::function<void(AudioFrame&&)>;

// POST {base_url}/v1/text-to-speech/{voice_id}/stream and deliver 24 kHz
// frames as they arrive. Leading and trailing whitespace is trimmed before
// submission; empty text throws invalid-argument without a request. Errors:
// synthesis-error for a non-200 status, TruncatedAudioError for a dropped
// stream.
TtsStreamStats synthesize_stream(const TtsConfig& config, const TtsRequest& request,
                                 const FrameHandler& on_frame, const CancelToken* cancel = nullptr);

std::string trim(std::string_view text);

}  // namespace voice
