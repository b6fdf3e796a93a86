#include "voice/tts_client.hpp"

#include <cctype>

#include "json.hpp"

#include "voice/clock.hpp"
#include "voice/http.hpp"
#include "voice/url.hpp"

namespace voice {

TtsConfig TtsConfig::from_env() {
  TtsConfig c;
  c.base_url = env_or("TTS_URL", c.base_url);
  c.api_key = env_or("TTS_API_KEY", "");
  c.voice_id = env_or("TTS_VOICE_ID", c.voice_id);
  return c;
}

std::string trim(std::string_view text) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return std::string(text);
}

PcmReframer::PcmReframer(int sample_rate_hz, int frame_ms)
    : sample_rate_hz_(sample_rate_hz), frame_samples_(samples_per_chunk(sample_rate_hz, frame_ms)) {}

std::vector<AudioFrame> PcmReframer::feed(std::string_view bytes, double at_ms) {
  carry_.append(bytes);
  const std::size_t usable = carry_.size() & ~std::size_t{1};
  for (std::size_t i = 0; i < usable; i += 2) {
    const auto lo = static_cast<uint8_t>(carry_[i]);
    const auto hi = static_cast<uint8_t>(carry_[i + 1]);
    samples_.push_back(static_cast<int16_t>(lo | hi << 8));
  }
  carry_.erase(0, usable);

  std::vector<AudioFrame> frames;
  std::size_t at = 0;
  for (; at + frame_samples_ <= samples_.size(); at += frame_samples_) {
    AudioFrame f;
    f.samples.assign(samples_.begin() + static_cast<std::ptrdiff_t>(at),
                     samples_.begin() + static_cast<std::ptrdiff_t>(at + frame_samples_));
    f.sample_rate_hz = sample_rate_hz_;
    f.timestamp_ms = at_ms;
    frames.push_back(std::move(f));
  }
  samples_.erase(samples_.begin(), samples_.begin() + static_cast<std::ptrdiff_t>(at));
  return frames;
}

std::vector<AudioFrame> PcmReframer::finish(double at_ms) {
  std::vector<AudioFrame> frames;
  if (!samples_.empty()) {
    AudioFrame f;
    f.samples = std::move(samples_);
    f.sample_rate_hz = sample_rate_hz_;
    f.timestamp_ms = at_ms;
    frames.push_back(std::move(f));
  }
  samples_.clear();
  carry_.clear();
  return frames;
}

TtsStreamStats synthesize_stream(const TtsConfig& config, const TtsRequest& request,
                                 const FrameHandler& on_frame, const CancelToken* cancel) {
  const std::string text = trim(request.text);
  if (text.empty()) throw Error(Errc::invalid_argument, "TTS text is empty");
  const std::string voice = request.voice_id.empty() ? config.voice_id : request.voice_id;
  const std::string model = request.model_id.empty() ? config.model_id : request.model_id;

  const Url url = parse_url(config.base_url);
  HttpStreamRequest req;
  req.url = url;
  req.path = url.path_prefix() + "/v1/text-to-speech/" + voice + "/stream?output_format=pcm_24000";
  req.body = nlohmann::json{{"text", text}, {"model_id", model}}.dump();
  req.headers = {{"Accept", "audio/pcm"}};
  if (!config.api_key.empty()) req.headers.emplace_back("xi-api-key", config.api_key);
  req.connect_timeout_ms = config.connect_timeout_ms;
  req.read_timeout_ms = config.read_timeout_ms;

  TtsStreamStats stats;
  PcmReframer reframer(kTtsSampleRate, config.frame_ms);
  std::size_t samples = 0;
  std::exception_ptr failure;
  auto deliver = [&](std::vector<AudioFrame>&& frames) {
    for (auto& f : frames) {
      samples += f.samples.size();
      ++stats.frames;
      on_frame(std::move(f));
    }
  };
  auto finalize_stats = [&] {
    stats.finished_ms = now_ms();
    stats.wall_ms = stats.finished_ms - stats.request_sent_ms;
    stats.ttfb_ms = stats.first_byte_ms < 0 ? 0.0 : stats.first_byte_ms - stats.request_sent_ms;
    stats.total_audio_ms = 1000.0 * static_cast<double>(samples) / kTtsSampleRate;
    stats.rtf = stats.total_audio_ms > 0 ? stats.wall_ms / stats.total_audio_ms : 0.0;
  };

  stats.request_sent_ms = now_ms();
  const HttpStreamResult res = http_post_stream(req, cancel, [&](std::string_view bytes) {
    const double at = now_ms();
    if (stats.first_byte_ms < 0) stats.first_byte_ms = at;
    try {
      deliver(reframer.feed(bytes, at));
    } catch (...) {
      failure = std::current_exception();
      return false;
    }
    return !(cancel && cancel->cancelled());
  });
  if (failure) std::rethrow_exception(failure);

  if (res.cancelled || (cancel && cancel->cancelled())) {
    stats.cancelled = true;
    finalize_stats();
    return stats;
  }
  if (res.status != 200 && res.status != 0) {
    throw Error(Errc::synthesis_error, "TTS returned HTTP " + std::to_string(res.status), res.error_body,
                res.status);
  }
  if (!res.transport_error.empty()) {
    deliver(reframer.finish(now_ms()));
    finalize_stats();
    if (stats.first_byte_ms < 0) {
      throw Error(Errc::synthesis_error, "TTS request failed: " + res.transport_error);
    }
    throw TruncatedAudioError("TTS stream dropped: " + res.transport_error, stats);
  }
  deliver(reframer.finish(now_ms()));
  finalize_stats();
  return stats;
}

}  // namespace voice
