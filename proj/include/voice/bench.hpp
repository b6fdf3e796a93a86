#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "voice/llm_client.hpp"
#include "voice/pipeline.hpp"
#include "voice/scenario.hpp"
#include "voice/stt_client.hpp"
#include "voice/tts_client.hpp"

namespace voice {

// Nearest-rank percentile: the ceil(q * n)-th smallest sample (1-based).
double nearest_rank(std::span<const double> samples, double q);

struct LatencyReport {
  std::string component;
  std::vector<double> samples_ms;         // measured, warmup excluded
  std::vector<double> warmup_samples_ms;  // measured and reported, not in stats
  double p50_ms = 0.0;
  double mean_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  int iterations = 0;
  int warmup_excluded = 0;
  nlohmann::json extras = nlohmann::json::object();

  // The first `warmup` samples are set aside. Throws invalid-argument when
  // nothing is left to summarize.
  static LatencyReport from_samples(std::string component, std::span<const double> all, int warmup = 0);
  // Stats recomputed from samples_ms equal the stored ones exactly.
  bool consistent() const;

  nlohmann::json to_json() const;
  static LatencyReport from_json(const nlohmann::json& j);
};

enum class EstimateMode { turn_based, streaming };

EstimateMode parse_estimate_mode(const std::string& s);

struct LatencyModel {
  double t_stt_ms = 0.0;
  double t_llm_ms = 0.0;
  double t_tts_ms = 0.0;
  double t_llm_first_sentence_ms = 0.0;
  double t_tts_ttfb_ms = 0.0;
};

// turn_based: stt + llm + tts. streaming: stt + llm_first_sentence +
// tts_ttfb. Throws invalid-argument for negative terms of the chosen mode.
double estimate_ttfa(const LatencyModel& model, EstimateMode mode);

enum class BenchTarget { stt, llm_ttft, llm_throughput, tts_ttfb };

BenchTarget parse_bench_target(const std::string& s);
std::string_view to_string(BenchTarget t);

struct ComponentBenchConfig {
  BenchTarget target = BenchTarget::llm_ttft;
  int iterations = 10;
  int warmup = 1;
  int retries = 2;
  int retry_backoff_ms = 200;
  SttSessionConfig stt;
  LlmConfig llm;
  TtsConfig tts;
  std::string prompt = "Hello, I'd like to book an appointment.";
  std::string tts_text = "Hello there, thanks for calling the clinic today.";
  int stt_speech_ms = 1000;
};

// Sequential iterations. stt: last audio frame sent to final transcript.
// llm_ttft: request sent to first content delta. llm_throughput: mean
// inter-token gap per request, with tokens_per_second in extras. tts_ttfb:
// request sent to first audio byte, with mean rtf in extras. Throws
// bench-error once an iteration fails after `retries` retries.
LatencyReport bench_component(const ComponentBenchConfig& config);

struct PipelineBenchConfig {
  Scenario scenario;
  int iterations = 10;
  int warmup = 1;
  bool realtime = false;   // pace client audio at 20 ms per frame
  int speech_frames = 15;  // 300 ms of tone
  int silence_frames = 40;
  double echo_gate_attenuation = 0.0;
  int turn_timeout_ms = 30000;
  int inter_turn_pause_ms = 50;
  // Endpoints of already-running services; in-process mocks are started for
  // any left empty.
  std::optional<std::string> stt_url;
  std::optional<std::string> llm_url;
  std::optional<std::string> tts_url;
};

struct PipelineTurnRow {
  TurnTimeline timeline;
  double ttfa_ms = 0.0;          // stt_final -> first audio to client
  double end_to_end_ms = 0.0;    // utterance end -> first audio to client
  double stt_ms = 0.0;           // utterance end -> stt final
  double llm_ttft_ms = 0.0;      // stt final -> first token
  double sentence_ms = 0.0;      // first token -> first sentence
  double tts_ttfb_ms = 0.0;      // first TTS request -> first byte
  double llm_total_ms = 0.0;     // stt final -> generation done
  double tts_total_ms = 0.0;     // summed per-sentence synthesis time
  double turn_based_ms = 0.0;    // stt + llm total + tts total
  bool overlapped = false;       // a later TTS request began before earlier audio ended

  static PipelineTurnRow from_timeline(const TurnTimeline& t);
  nlohmann::json to_json() const;
};

struct PipelineBenchResult {
  LatencyReport ttfa;
  std::vector<LatencyReport> components;  // stt, llm_ttft, sentence, tts_ttfb, turn_based
  std::vector<PipelineTurnRow> turns;     // measured turns
  std::vector<PipelineTurnRow> warmup_turns;
  double sequential_estimate_ms = 0.0;    // p50 stt + llm ttft + tts ttfb
  double wall_ms = 0.0;

  nlohmann::json to_json() const;
};

// Drives the gateway over a real WebSocket with synthetic speech and reads
// each turn's timeline from agent_done. Throws bench-error.
PipelineBenchResult bench_pipeline(const PipelineBenchConfig& config);

// Aligned text renderings.
std::string format_report_table(std::span<const LatencyReport> reports);
std::string format_pipeline_result(const PipelineBenchResult& result);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace voice
