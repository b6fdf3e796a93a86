#pragma once

#include <optional>
#include <string_view>

#include "voice/audio.hpp"

namespace voice {

enum class TurnState { idle, listening, processing, speaking, interrupted };
enum class TurnEventKind { speech_started, utterance_ended, interruption, agent_done_ack };
enum class AgentSignal { agent_audio_started, agent_done };

std::string_view to_string(TurnState s);
std::string_view to_string(TurnEventKind k);
std::string_view to_string(AgentSignal s);

struct VadConfig {
  int frame_ms = 32;
  double speech_threshold = 0.5;
  int silence_ms_to_end_turn = 700;
  int min_speech_ms = 96;
  int sample_rate_hz = kMicSampleRate;

  void validate() const;
  std::size_t frame_samples() const;
};

struct TurnEvent {
  TurnEventKind kind;
  double at_ms = 0.0;
};

// Maps a frame to a speech probability in [0, 1].
class SpeechDetector {
 public:
  virtual ~SpeechDetector() = default;
  virtual double speech_probability(const AudioFrame& frame) const = 0;
};

// clamp(RMS / calibration_rms, 0, 1). Stateless and deterministic.
class EnergyDetector final : public SpeechDetector {
 public:
  explicit EnergyDetector(VadConfig config = {}, double calibration_rms = 8000.0);
  double speech_probability(const AudioFrame& frame) const override;

 private:
  VadConfig config_;
  double calibration_rms_;
};

double frame_rms(std::span<const int16_t> samples);

struct VadStep {
  TurnState state;
  std::optional<TurnEvent> event;
};

// Five-state turn-taking machine.
//
//   IDLE --speech >= min_speech_ms--> LISTENING --silence >= 700 ms--> PROCESSING
//   PROCESSING --agent audio started--> SPEAKING --agent done--> IDLE
//   SPEAKING --speech >= min_speech_ms--> INTERRUPTED --next step--> LISTENING
//
// Speech frames during PROCESSING are ignored. Agent signals outside the
// states that define them throw protocol-error. Event timestamps are stream
// time: frames seen so far times frame_ms.
class VadMachine {
 public:
  explicit VadMachine(VadConfig config = {});

  VadStep on_frame(double speech_prob);
  VadStep on_signal(AgentSignal signal);
  // One input per step: the signal when present, otherwise the frame.
  VadStep step(double frame_prob, std::optional<AgentSignal> signal = std::nullopt);

  void reset();

  TurnState state() const { return state_; }
  double stream_ms() const { return stream_ms_; }
  int speech_run_ms() const { return speech_run_ms_; }
  int silence_run_ms() const { return silence_run_ms_; }
  const VadConfig& config() const { return config_; }

 private:
  VadStep settle(std::optional<TurnEventKind> kind);

  VadConfig config_;
  TurnState state_ = TurnState::idle;
  int speech_run_ms_ = 0;
  int silence_run_ms_ = 0;
  double stream_ms_ = 0.0;
};

}  // namespace voice
