#include "voice/pipeline.hpp"

#include <cmath>

#include "voice/bounded_queue.hpp"
#include "voice/clock.hpp"
#include "voice/error.hpp"

namespace voice {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

struct Token {
  std::string text;
  double at_ms;
};

struct Sentence {
  std::string text;
  int index;
};

struct AudioItem {
  AudioFrame frame;
  int sentence;
  std::string text;  // set on the first frame of a sentence
};

}  // namespace

std::optional<double> TurnTimeline::ttfa_ms() const {
  if (!stt_final_ms || !first_audio_to_client_ms) return std::nullopt;
  return *first_audio_to_client_ms - *stt_final_ms;
}

bool TurnTimeline::monotone() const {
  const std::optional<double> order[] = {utterance_end_ms,   stt_final_ms,     llm_first_delta_ms,
                                         first_sentence_ms, tts_first_byte_ms, first_audio_to_client_ms};
  double last = -INFINITY;
  for (const auto& v : order) {
    if (!v) continue;
    if (*v < last) return false;
    last = *v;
  }
  return true;
}

json TurnTimeline::to_json() const {
  json j{{"utterance_end_ms", opt(utterance_end_ms)},
         {"stt_final_ms", opt(stt_final_ms)},
         {"llm_first_delta_ms", opt(llm_first_delta_ms)},
         {"first_sentence_ms", opt(first_sentence_ms)},
         {"tts_first_byte_ms", opt(tts_first_byte_ms)},
         {"first_audio_to_client_ms", opt(first_audio_to_client_ms)},
         {"llm_done_ms", opt(llm_done_ms)},
         {"last_audio_to_client_ms", opt(last_audio_to_client_ms)},
         {"tts_synthesis_total_ms", tts_synthesis_total_ms},
         {"tts_first_ttfb_ms", tts_first_ttfb_ms},
         {"tts_request_ms", tts_request_ms},
         {"tts_end_ms", tts_end_ms},
         {"sentence_audio_ms", sentence_audio_ms},
         {"sentence_first_audio_ms", sentence_first_audio_ms},
         {"sentences", sentences},
         {"audio_frames", audio_frames},
         {"interrupted", interrupted}};
  j["ttfa_ms"] = opt(ttfa_ms());
  return j;
}

TurnTimeline TurnTimeline::from_json(const json& j) {
  TurnTimeline t;
  t.utterance_end_ms = opt_from(j, "utterance_end_ms");
  t.stt_final_ms = opt_from(j, "stt_final_ms");
  t.llm_first_delta_ms = opt_from(j, "llm_first_delta_ms");
  t.first_sentence_ms = opt_from(j, "first_sentence_ms");
  t.tts_first_byte_ms = opt_from(j, "tts_first_byte_ms");
  t.first_audio_to_client_ms = opt_from(j, "first_audio_to_client_ms");
  t.llm_done_ms = opt_from(j, "llm_done_ms");
  t.last_audio_to_client_ms = opt_from(j, "last_audio_to_client_ms");
  t.tts_synthesis_total_ms = j.value("tts_synthesis_total_ms", 0.0);
  t.tts_first_ttfb_ms = j.value("tts_first_ttfb_ms", 0.0);
  t.tts_request_ms = j.value("tts_request_ms", std::vector<double>{});
  t.tts_end_ms = j.value("tts_end_ms", std::vector<double>{});
  t.sentence_audio_ms = j.value("sentence_audio_ms", std::vector<double>{});
  t.sentence_first_audio_ms = j.value("sentence_first_audio_ms", std::vector<double>{});
  t.sentences = j.value("sentences", 0);
  t.audio_frames = j.value("audio_frames", std::size_t{0});
  t.interrupted = j.value("interrupted", false);
  return t;
}

void PipelineConfig::validate() const {
  vad.validate();
  sentence.validate();
  agent.validate();
  if (!(echo_gate_attenuation >= 0.0 && echo_gate_attenuation <= 1.0))
    throw Error(Errc::invalid_argument, "echo_gate_attenuation must be in [0, 1]");
  if (vad_calibration_rms <= 0.0) throw Error(Errc::invalid_argument, "vad_calibration_rms must be > 0");
  if (tts.frame_ms <= 0) throw Error(Errc::invalid_argument, "tts frame_ms must be > 0");
  if (token_queue_capacity == 0 || sentence_queue_capacity == 0 || audio_queue_capacity == 0)
    throw Error(Errc::invalid_argument, "queue capacities must be > 0");
}

PipelineConfig PipelineConfig::from_env() {
  PipelineConfig c;
  c.stt = SttSessionConfig::from_env();
  c.agent.llm = LlmConfig::from_env();
  c.tts = TtsConfig::from_env();
  return c;
}

AudioFrame gate_mic(const AudioFrame& frame, bool agent_speaking, double attenuation) {
  if (!agent_speaking) return frame;
  AudioFrame out = frame;
  for (auto& s : out.samples) s = static_cast<int16_t>(static_cast<double>(s) * attenuation);
  return out;
}

std::string_view to_string(TurnOutcome o) {
  switch (o) {
    case TurnOutcome::completed: return "completed";
    case TurnOutcome::interrupted: return "interrupted";
    case TurnOutcome::failed: return "error";
  }
  return "unknown";
}

struct PipelineSession::Turn {
  Turn(const PipelineConfig& c)
      : tokens(c.token_queue_capacity), sentences(c.sentence_queue_capacity), audio(c.audio_queue_capacity) {}

  TranscriptEvent transcript;
  std::optional<double> utterance_end_ms;
  CancelToken cancel;
  BoundedQueue<Token> tokens;
  BoundedQueue<Sentence> sentences;
  BoundedQueue<AudioItem> audio;
  bool stop_emit = false;  // guarded by emit_mutex_
  bool interrupted = false;

  std::mutex error_mutex;
  std::string error;

  void fail(std::string message) {
    {
      std::lock_guard lock(error_mutex);
      if (error.empty()) error = std::move(message);
    }
    abort();
  }

  void abort() {
    cancel.cancel();
    tokens.close();
    sentences.close();
    audio.close();
  }
};

PipelineSession::PipelineSession(PipelineConfig config, ClientSink& sink, Callbacks callbacks)
    : config_(std::move(config)),
      sink_(sink),
      callbacks_(std::move(callbacks)),
      store_(seed_store(config_.store_seed)),
      tools_(make_hospital_tools(store_)) {
  config_.validate();
}

PipelineSession::~PipelineSession() { shutdown(); }

void PipelineSession::start_turn(const TranscriptEvent& final_transcript, std::optional<double> utterance_end_ms) {
  if (!final_transcript.is_final) throw Error(Errc::invalid_argument, "transcript is not final");
  if (trim(final_transcript.text).empty()) throw Error(Errc::invalid_argument, "transcript is empty");
  wait();

  auto turn = std::make_shared<Turn>(config_);
  turn->transcript = final_transcript;
  turn->utterance_end_ms = utterance_end_ms;
  std::lock_guard lock(turn_mutex_);
  current_ = turn;
  state_ = SessionState::processing;
  runner_ = std::thread([this, turn] {
    TurnResult result = execute(*turn);
    finish_history(result);
    {
      std::lock_guard lock(turn_mutex_);
      last_result_ = result;
    }
    state_ = SessionState::idle;
    if (callbacks_.on_turn_done) callbacks_.on_turn_done(result);
  });
}

std::optional<TurnResult> PipelineSession::wait() {
  std::thread runner;
  {
    std::lock_guard lock(turn_mutex_);
    runner = std::move(runner_);
  }
  if (runner.joinable()) runner.join();
  std::lock_guard lock(turn_mutex_);
  current_.reset();
  return last_result_;
}

TurnResult PipelineSession::run_turn(const TranscriptEvent& final_transcript, std::optional<double> utterance_end_ms) {
  start_turn(final_transcript, utterance_end_ms);
  auto result = wait();
  if (!result) throw Error(Errc::session_error, "turn produced no result");
  return *result;
}

bool PipelineSession::interrupt() {
  std::shared_ptr<Turn> turn;
  {
    std::lock_guard lock(turn_mutex_);
    turn = current_;
  }
  if (!turn) return false;
  {
    std::lock_guard lock(emit_mutex_);
    if (state_ != SessionState::speaking || turn->stop_emit) return false;
    turn->stop_emit = true;
    turn->interrupted = true;
    state_ = SessionState::processing;
  }
  last_interrupt_ms_ = now_ms();
  turn->abort();
  turn->audio.clear();
  turn->sentences.clear();
  turn->tokens.clear();
  sink_.drop_pending_audio();
  return true;
}

void PipelineSession::shutdown() {
  std::shared_ptr<Turn> turn;
  {
    std::lock_guard lock(turn_mutex_);
    turn = current_;
  }
  if (turn) {
    {
      std::lock_guard lock(emit_mutex_);
      turn->stop_emit = true;
    }
    turn->abort();
    turn->audio.clear();
  }
  wait();
}

TurnResult PipelineSession::execute(Turn& turn) {
  TurnResult result;
  TurnTimeline& tl = result.timeline;
  tl.utterance_end_ms = turn.utterance_end_ms;
  tl.stt_final_ms = turn.transcript.received_at_ms;

  Agent agent(config_.agent, tools_);

  std::thread agent_thread([&] {
    try {
      result.agent = agent.handle_utterance(
          history_, trim(turn.transcript.text),
          [&](std::string_view token, double at_ms) {
            if (!tl.llm_first_delta_ms) tl.llm_first_delta_ms = at_ms;
            turn.tokens.push(Token{std::string(token), at_ms});
          },
          &turn.cancel);
      tl.llm_done_ms = result.agent.finished_ms;
    } catch (const Error& e) {
      tl.llm_done_ms = now_ms();
      turn.fail(std::string(to_string(e.code())) + ": " + e.what());
    } catch (const std::exception& e) {
      tl.llm_done_ms = now_ms();
      turn.fail(e.what());
    }
    turn.tokens.close();
  });

  std::thread sentence_thread([&] {
    SentenceBuffer buffer(config_.sentence);
    int index = 0;
    auto forward = [&](SentenceChunk&& chunk) {
      if (trim(chunk.text).empty()) return;
      if (!tl.first_sentence_ms) tl.first_sentence_ms = now_ms();
      ++tl.sentences;
      turn.sentences.push(Sentence{std::move(chunk.text), index++});
    };
    while (auto token = turn.tokens.pop()) {
      for (auto& chunk : buffer.push(token->text)) forward(std::move(chunk));
    }
    if (!turn.cancel.cancelled()) {
      if (auto rest = buffer.flush()) forward(std::move(*rest));
    }
    turn.sentences.close();
  });

  std::thread tts_thread([&] {
    while (auto sentence = turn.sentences.pop()) {
      if (turn.cancel.cancelled()) break;
      TtsRequest request{sentence->text, config_.tts.voice_id, config_.tts.model_id};
      bool first = true;
      double request_ms = now_ms();
      tl.tts_request_ms.push_back(request_ms);
      try {
        auto stats = synthesize_stream(
            config_.tts, request,
            [&](AudioFrame&& frame) {
              if (first && !tl.tts_first_byte_ms) tl.tts_first_byte_ms = now_ms();
              AudioItem item{std::move(frame), sentence->index, first ? sentence->text : std::string()};
              first = false;
              turn.audio.push(std::move(item));
            },
            &turn.cancel);
        if (sentence->index == 0) tl.tts_first_ttfb_ms = stats.ttfb_ms;
        tl.tts_end_ms.push_back(stats.finished_ms);
        tl.sentence_audio_ms.push_back(stats.total_audio_ms);
        tl.tts_synthesis_total_ms += stats.finished_ms - stats.request_sent_ms;
        if (stats.cancelled) break;
      } catch (const Error& e) {
        tl.tts_end_ms.push_back(now_ms());
        tl.sentence_audio_ms.push_back(0.0);
        if (turn.cancel.cancelled()) break;
        turn.fail(std::string(to_string(e.code())) + ": " + e.what());
        break;
      }
    }
    turn.audio.close();
  });

  // Emit stage runs here, one frame at a time under the emit lock so an
  // interrupt cannot race a frame onto the wire.
  int current_sentence = -1;
  while (auto item = turn.audio.pop()) {
    std::lock_guard lock(emit_mutex_);
    if (turn.stop_emit) continue;
    bool started = false;
    if (state_ != SessionState::speaking) {
      state_ = SessionState::speaking;
      sink_.send_control(ControlMessage::agent_speaking());
      started = true;
    }
    sink_.send_audio(item->frame);
    const double sent = now_ms();
    if (!tl.first_audio_to_client_ms) tl.first_audio_to_client_ms = sent;
    tl.last_audio_to_client_ms = sent;
    ++tl.audio_frames;
    if (item->sentence != current_sentence) {
      current_sentence = item->sentence;
      tl.sentence_first_audio_ms.push_back(sent);
      result.spoken_text += item->text;
    }
    if (started && callbacks_.on_audio_started) callbacks_.on_audio_started();
  }

  agent_thread.join();
  sentence_thread.join();
  tts_thread.join();

  tl.interrupted = turn.interrupted;
  result.spoken_text = trim(result.spoken_text);
  {
    std::lock_guard lock(turn.error_mutex);
    result.error = turn.error;
  }
  if (turn.interrupted) {
    result.outcome = TurnOutcome::interrupted;
  } else if (!result.error.empty()) {
    result.outcome = TurnOutcome::failed;
  } else {
    result.outcome = TurnOutcome::completed;
  }

  std::lock_guard lock(emit_mutex_);
  state_ = SessionState::processing;
  auto done = ControlMessage::agent_done(std::string(to_string(result.outcome)), tl.to_json());
  sink_.send_control(done);
  return result;
}

void PipelineSession::finish_history(const TurnResult& result) {
  if (result.outcome != TurnOutcome::interrupted) return;
  // The model's text was cut short; keep only what the caller heard.
  if (!history_.empty() && history_.back().role == Role::assistant && history_.back().tool_calls.empty())
    history_.pop_back();
  if (!result.spoken_text.empty()) {
    Message m = Message::assistant(result.spoken_text);
    m.truncated = true;
    history_.push_back(std::move(m));
  }
}

}  // namespace voice
