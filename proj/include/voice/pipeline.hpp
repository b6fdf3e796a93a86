#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "voice/agent.hpp"
#include "voice/audio.hpp"
#include "voice/control.hpp"
#include "voice/hospital.hpp"
#include "voice/sentence_buffer.hpp"
#include "voice/stt_client.hpp"
#include "voice/tts_client.hpp"
#include "voice/vad.hpp"

namespace voice {

// Per-turn timestamps (process steady-clock ms). The first six are the
// ordered milestones; the rest support component breakdowns.
struct TurnTimeline {
  std::optional<double> utterance_end_ms;
  std::optional<double> stt_final_ms;
  std::optional<double> llm_first_delta_ms;
  std::optional<double> first_sentence_ms;
  std::optional<double> tts_first_byte_ms;
  std::optional<double> first_audio_to_client_ms;

  std::optional<double> llm_done_ms;
  std::optional<double> last_audio_to_client_ms;
  double tts_synthesis_total_ms = 0.0;  // summed request-to-end wall time
  double tts_first_ttfb_ms = 0.0;       // request-to-first-byte of sentence one
  std::vector<double> tts_request_ms;   // per synthesized sentence
  std::vector<double> tts_end_ms;
  std::vector<double> sentence_audio_ms;
  std::vector<double> sentence_first_audio_ms;
  int sentences = 0;
  std::size_t audio_frames = 0;
  bool interrupted = false;

  // stt_final -> first audio to client; nullopt until both are set.
  std::optional<double> ttfa_ms() const;
  // Each populated milestone is >= every populated earlier one.
  bool monotone() const;

  nlohmann::json to_json() const;
  static TurnTimeline from_json(const nlohmann::json& j);
};

struct PipelineConfig {
  SttSessionConfig stt;
  AgentConfig agent;
  TtsConfig tts;
  VadConfig vad;
  SentenceBufferConfig sentence;
  double vad_calibration_rms = 8000.0;
  double echo_gate_attenuation = 0.0;
  std::size_t token_queue_capacity = 64;
  std::size_t sentence_queue_capacity = 64;
  std::size_t audio_queue_capacity = 64;
  std::uint64_t store_seed = 42;

  void validate() const;
  static PipelineConfig from_env();
};

// While the agent speaks every sample is scaled by attenuation and truncated
// toward zero; otherwise the frame passes through unchanged.
AudioFrame gate_mic(const AudioFrame& frame, bool agent_speaking, double attenuation);

// Where a session's output goes (a WebSocket in the gateway, a recorder in
// tests). Calls come from the session's emit stage, one at a time.
class ClientSink {
 public:
  virtual ~ClientSink() = default;
  virtual void send_audio(const AudioFrame& frame) = 0;
  virtual void send_control(const ControlMessage& message) = 0;
  // Discard audio accepted but not yet written to the wire.
  virtual void drop_pending_audio() {}
};

enum class SessionState { idle, processing, speaking };
enum class TurnOutcome { completed, interrupted, failed };

std::string_view to_string(TurnOutcome o);

struct TurnResult {
  TurnOutcome outcome = TurnOutcome::completed;
  TurnTimeline timeline;
  std::string spoken_text;
  std::string error;
  AgentTurn agent;
};

// One conversation: history, datastore and the staged turn runner.
//
// A turn runs four stages joined by bounded queues: agent tokens -> sentence
// buffer -> TTS -> client. Sentence k+1 is generated while sentence k is
// synthesized; sentences are synthesized one at a time in order.
class PipelineSession {
 public:
  struct Callbacks {
    std::function<void()> on_audio_started;
    std::function<void(const TurnResult&)> on_turn_done;
  };

  PipelineSession(PipelineConfig config, ClientSink& sink, Callbacks callbacks = {});
  ~PipelineSession();
  PipelineSession(const PipelineSession&) = delete;
  PipelineSession& operator=(const PipelineSession&) = delete;

  // Starts a turn in the background after any previous turn has finished.
  // Throws invalid-argument unless the transcript is final and non-empty.
  void start_turn(const TranscriptEvent& final_transcript,
                  std::optional<double> utterance_end_ms = std::nullopt);
  // Blocks until the current turn (if any) finishes.
  std::optional<TurnResult> wait();
  TurnResult run_turn(const TranscriptEvent& final_transcript,
                      std::optional<double> utterance_end_ms = std::nullopt);

  // Barge-in: cancels generation and synthesis and clears queued audio. A
  // no-op unless the session is speaking. Returns true when it cancelled.
  bool interrupt();
  // Cancels whatever is running, in any state, and waits for it.
  void shutdown();

  SessionState state() const { return state_.load(); }
  double last_interrupt_ms() const { return last_interrupt_ms_.load(); }
  // Safe only between turns.
  const std::vector<Message>& history() const { return history_; }
  HospitalStore& store() { return store_; }
  const PipelineConfig& config() const { return config_; }

 private:
  struct Turn;
  TurnResult execute(Turn& turn);
  void finish_history(const TurnResult& result);

  PipelineConfig config_;
  ClientSink& sink_;
  Callbacks callbacks_;
  HospitalStore store_;
  ToolRegistry tools_;
  std::vector<Message> history_;

  std::mutex turn_mutex_;  // guards current_/runner_
  std::shared_ptr<Turn> current_;
  std::thread runner_;
  std::optional<TurnResult> last_result_;

  std::mutex emit_mutex_;
  std::atomic<SessionState> state_{SessionState::idle};
  std::atomic<double> last_interrupt_ms_{-1.0};
};

}  // namespace voice
