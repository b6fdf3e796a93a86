#pragma once

#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "voice/audio.hpp"
#include "voice/clock.hpp"
#include "voice/control.hpp"
#include "voice/mock.hpp"
#include "voice/pipeline.hpp"
#include "voice/scenario.hpp"

namespace testing {

using voice::AudioFrame;
using voice::ControlMessage;

// Everything a pipeline session emitted, stamped on arrival.
class RecordingSink : public voice::ClientSink {
 public:
  struct Item {
    std::variant<AudioFrame, ControlMessage> payload;
    double at_ms;
  };

  void send_audio(const AudioFrame& frame) override {
    std::lock_guard lock(mutex_);
    items_.push_back({frame, voice::now_ms()});
  }
  void send_control(const ControlMessage& message) override {
    std::lock_guard lock(mutex_);
    items_.push_back({message, voice::now_ms()});
  }
  void drop_pending_audio() override {
    std::lock_guard lock(mutex_);
    ++drops_;
  }

  std::vector<Item> items() const {
    std::lock_guard lock(mutex_);
    return items_;
  }
  std::size_t audio_frames() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& i : items_) n += std::holds_alternative<AudioFrame>(i.payload);
    return n;
  }
  std::size_t audio_frames_after(double t) const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& i : items_) n += std::holds_alternative<AudioFrame>(i.payload) && i.at_ms > t;
    return n;
  }
  std::vector<ControlMessage> controls() const {
    std::lock_guard lock(mutex_);
    std::vector<ControlMessage> out;
    for (const auto& i : items_) {
      if (auto* c = std::get_if<ControlMessage>(&i.payload)) out.push_back(*c);
    }
    return out;
  }
  std::size_t drops() const {
    std::lock_guard lock(mutex_);
    return drops_;
  }
  void clear() {
    std::lock_guard lock(mutex_);
    items_.clear();
  }

 private:
  mutable std::mutex mutex_;
  std::vector<Item> items_;
  std::size_t drops_ = 0;
};

inline voice::Scenario scenario_from(const nlohmann::json& j) { return voice::parse_scenario(j.dump()); }

// One turn, one short sentence, no latency.
inline voice::Scenario quick_scenario(std::vector<std::string> tokens = {"Hello", " there,", " how", " can",
                                                                         " I", " help?"}) {
  nlohmann::json turn{{"user_transcript", "hello"}, {"llm_script", tokens}, {"tts_ms_per_word", 60}};
  return scenario_from({{"schema_version", 1}, {"turns", {turn}}});
}

inline voice::PipelineConfig pipeline_config_for(const voice::MockSuite& mocks) {
  voice::PipelineConfig c;
  c.stt.endpoint_url = mocks.stt.url();
  c.agent.llm.base_url = mocks.llm.base_url();
  c.tts.base_url = mocks.tts.base_url();
  return c;
}

inline voice::TranscriptEvent final_transcript(std::string text) {
  voice::TranscriptEvent ev;
  ev.text = std::move(text);
  ev.is_final = true;
  ev.speech_final = true;
  ev.received_at_ms = voice::now_ms();
  return ev;
}

inline AudioFrame tone_frame(std::size_t samples = 320, int16_t amplitude = 12000, std::size_t phase = 0) {
  AudioFrame f;
  f.sample_rate_hz = voice::kMicSampleRate;
  f.samples = voice::make_tone(samples, voice::kMicSampleRate, 440.0, amplitude, phase);
  return f;
}

inline AudioFrame silent_frame(std::size_t samples = 320) {
  AudioFrame f;
  f.sample_rate_hz = voice::kMicSampleRate;
  f.samples.assign(samples, 0);
  return f;
}

inline std::string bytes_of(const AudioFrame& f) {
  auto b = voice::to_le_bytes(f.samples);
  return std::string(b.begin(), b.end());
}

}  // namespace testing
