#include "voice/vad.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "voice/error.hpp"

namespace voice {

std::string_view to_string(TurnState s) {
  switch (s) {
    case TurnState::idle: return "IDLE";
    case TurnState::listening: return "LISTENING";
    case TurnState::processing: return "PROCESSING";
    case TurnState::speaking: return "SPEAKING";
    case TurnState::interrupted: return "INTERRUPTED";
  }
  return "?";
}

std::string_view to_string(TurnEventKind k) {
  switch (k) {
    case TurnEventKind::speech_started: return "SPEECH_STARTED";
    case TurnEventKind::utterance_ended: return "UTTERANCE_ENDED";
    case TurnEventKind::interruption: return "INTERRUPTION";
    case TurnEventKind::agent_done_ack: return "AGENT_DONE_ACK";
  }
  return "?";
}

std::string_view to_string(AgentSignal s) {
  return s == AgentSignal::agent_audio_started ? "AGENT_AUDIO_STARTED" : "AGENT_DONE";
}

void VadConfig::validate() const {
  if (frame_ms <= 0) throw Error(Errc::invalid_argument, "frame_ms must be positive");
  if (!(speech_threshold > 0.0 && speech_threshold < 1.0)) {
    throw Error(Errc::invalid_argument, "speech_threshold must be in (0, 1)");
  }
  if (silence_ms_to_end_turn <= 0) {
    throw Error(Errc::invalid_argument, "silence_ms_to_end_turn must be positive");
  }
  if (min_speech_ms < 0) throw Error(Errc::invalid_argument, "min_speech_ms must be >= 0");
}

std::size_t VadConfig::frame_samples() const {
  return samples_per_chunk(sample_rate_hz, frame_ms);
}

double frame_rms(std::span<const int16_t> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (int16_t s : samples) acc += static_cast<double>(s) * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

EnergyDetector::EnergyDetector(VadConfig config, double calibration_rms)
    : config_(config), calibration_rms_(calibration_rms) {
  config_.validate();
  if (!(calibration_rms_ > 0)) throw Error(Errc::invalid_argument, "calibration_rms must be positive");
}

double EnergyDetector::speech_probability(const AudioFrame& frame) const {
  if (frame.sample_rate_hz != config_.sample_rate_hz || frame.channels != 1) {
    throw Error(Errc::invalid_argument,
                "VAD expects " + std::to_string(config_.sample_rate_hz) + " Hz mono, got " +
                    std::to_string(frame.sample_rate_hz) + " Hz");
  }
  if (frame.samples.size() != config_.frame_samples()) {
    throw Error(Errc::invalid_argument,
                "VAD frame must hold " + std::to_string(config_.frame_samples()) + " samples, got " +
                    std::to_string(frame.samples.size()));
  }
  return std::clamp(frame_rms(frame.samples) / calibration_rms_, 0.0, 1.0);
}

VadMachine::VadMachine(VadConfig config) : config_(config) { config_.validate(); }

void VadMachine::reset() {
  state_ = TurnState::idle;
  speech_run_ms_ = 0;
  silence_run_ms_ = 0;
}

VadStep VadMachine::settle(std::optional<TurnEventKind> kind) {
  VadStep out{state_, std::nullopt};
  if (kind) out.event = TurnEvent{*kind, stream_ms_};
  return out;
}

VadStep VadMachine::on_frame(double speech_prob) {
  stream_ms_ += config_.frame_ms;
  const bool speech = speech_prob >= config_.speech_threshold;
  // Zero min_speech_ms still needs one speech frame.
  const int needed_speech = std::max(config_.min_speech_ms, 1);

  switch (state_) {
    case TurnState::idle:
      speech_run_ms_ = speech ? speech_run_ms_ + config_.frame_ms : 0;
      if (speech_run_ms_ >= needed_speech) {
        state_ = TurnState::listening;
        speech_run_ms_ = 0;
        silence_run_ms_ = 0;
        return settle(TurnEventKind::speech_started);
      }
      return settle(std::nullopt);

    case TurnState::listening:
      silence_run_ms_ = speech ? 0 : silence_run_ms_ + config_.frame_ms;
      if (silence_run_ms_ >= config_.silence_ms_to_end_turn) {
        state_ = TurnState::processing;
        silence_run_ms_ = 0;
        return settle(TurnEventKind::utterance_ended);
      }
      return settle(std::nullopt);

    case TurnState::processing:
      return settle(std::nullopt);

    case TurnState::speaking:
      speech_run_ms_ = speech ? speech_run_ms_ + config_.frame_ms : 0;
      if (speech_run_ms_ >= needed_speech) {
        state_ = TurnState::interrupted;
        speech_run_ms_ = 0;
        return settle(TurnEventKind::interruption);
      }
      return settle(std::nullopt);

    case TurnState::interrupted:
      state_ = TurnState::listening;
      silence_run_ms_ = speech ? 0 : config_.frame_ms;
      return settle(std::nullopt);
  }
  return settle(std::nullopt);
}

VadStep VadMachine::on_signal(AgentSignal signal) {
  switch (state_) {
    case TurnState::processing:
      if (signal == AgentSignal::agent_audio_started) {
        state_ = TurnState::speaking;
        speech_run_ms_ = 0;
        return settle(std::nullopt);
      }
      break;
    case TurnState::speaking:
      if (signal == AgentSignal::agent_done) {
        state_ = TurnState::idle;
        speech_run_ms_ = 0;
        return settle(TurnEventKind::agent_done_ack);
      }
      break;
    case TurnState::interrupted:
      // The transient state yields to LISTENING on any step; a late agent
      // signal from the cancelled turn is absorbed here.
      state_ = TurnState::listening;
      silence_run_ms_ = 0;
      return settle(std::nullopt);
    default:
      break;
  }
  throw Error(Errc::protocol_error, std::string(to_string(signal)) + " is undefined in state " +
                                        std::string(to_string(state_)));
}

VadStep VadMachine::step(double frame_prob, std::optional<AgentSignal> signal) {
  return signal ? on_signal(*signal) : on_frame(frame_prob);
}

}  // namespace voice
