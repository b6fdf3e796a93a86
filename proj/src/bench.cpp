#include "voice/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "voice/clock.hpp"
#include "voice/control.hpp"
#include "voice/error.hpp"
#include "voice/gateway.hpp"
#include "voice/mock.hpp"
#include "voice/net/ws.hpp"

namespace voice {

using nlohmann::json;

double nearest_rank(std::span<const double> samples, double q) {
  if (samples.empty()) throw Error(Errc::invalid_argument, "no samples");
  if (!(q > 0.0 && q <= 1.0)) throw Error(Errc::invalid_argument, "quantile must be in (0, 1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::max<std::size_t>(rank, 1) - 1];
}

LatencyReport LatencyReport::from_samples(std::string component, std::span<const double> all, int warmup) {
  if (warmup < 0) throw Error(Errc::invalid_argument, "warmup must be >= 0");
  const auto skip = std::min<std::size_t>(static_cast<std::size_t>(warmup), all.size());
  LatencyReport r;
  r.component = std::move(component);
  r.warmup_samples_ms.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(skip));
  r.samples_ms.assign(all.begin() + static_cast<std::ptrdiff_t>(skip), all.end());
  if (r.samples_ms.empty()) throw Error(Errc::invalid_argument, r.component + ": no samples after warmup");
  r.iterations = static_cast<int>(r.samples_ms.size());
  r.warmup_excluded = static_cast<int>(skip);
  r.p50_ms = nearest_rank(r.samples_ms, 0.5);
  r.mean_ms = std::accumulate(r.samples_ms.begin(), r.samples_ms.end(), 0.0) / static_cast<double>(r.samples_ms.size());
  auto [mn, mx] = std::minmax_element(r.samples_ms.begin(), r.samples_ms.end());
  r.min_ms = *mn;
  r.max_ms = *mx;
  return r;
}

bool LatencyReport::consistent() const {
  if (samples_ms.empty()) return false;
  auto again = from_samples(component, samples_ms, 0);
  return again.p50_ms == p50_ms && again.mean_ms == mean_ms && again.min_ms == min_ms &&
         again.max_ms == max_ms && again.iterations == iterations;
}

json LatencyReport::to_json() const {
  return {{"component", component},         {"samples_ms", samples_ms}, {"warmup_samples_ms", warmup_samples_ms},
          {"p50_ms", p50_ms},               {"mean_ms", mean_ms},       {"min_ms", min_ms},
          {"max_ms", max_ms},               {"iterations", iterations}, {"warmup_excluded", warmup_excluded},
          {"extras", extras}};
}

LatencyReport LatencyReport::from_json(const json& j) {
  LatencyReport r;
  r.component = j.at("component").get<std::string>();
  r.samples_ms = j.at("samples_ms").get<std::vector<double>>();
  r.warmup_samples_ms = j.value("warmup_samples_ms", std::vector<double>{});
  r.p50_ms = j.at("p50_ms").get<double>();
  r.mean_ms = j.at("mean_ms").get<double>();
  r.min_ms = j.at("min_ms").get<double>();
  r.max_ms = j.at("max_ms").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.warmup_excluded = j.value("warmup_excluded", 0);
  r.extras = j.value("extras", json::object());
  return r;
}

EstimateMode parse_estimate_mode(const std::string& s) {
  if (s == "turn_based" || s == "turn-based") return EstimateMode::turn_based;
  if (s == "streaming") return EstimateMode::streaming;
  throw Error(Errc::invalid_argument, "unknown estimate mode: " + s);
}

double estimate_ttfa(const LatencyModel& m, EstimateMode mode) {
  auto check = [](double v, const char* name) {
    if (v < 0 || std::isnan(v)) throw Error(Errc::invalid_argument, std::string(name) + " must be non-negative");
    return v;
  };
  if (mode == EstimateMode::turn_based) {
    return check(m.t_stt_ms, "t_stt_ms") + check(m.t_llm_ms, "t_llm_ms") + check(m.t_tts_ms, "t_tts_ms");
  }
  return check(m.t_stt_ms, "t_stt_ms") + check(m.t_llm_first_sentence_ms, "t_llm_first_sentence_ms") +
         check(m.t_tts_ttfb_ms, "t_tts_ttfb_ms");
}

BenchTarget parse_bench_target(const std::string& s) {
  if (s == "stt") return BenchTarget::stt;
  if (s == "llm" || s == "llm_ttft") return BenchTarget::llm_ttft;
  if (s == "llm_throughput") return BenchTarget::llm_throughput;
  if (s == "tts" || s == "tts_ttfb") return BenchTarget::tts_ttfb;
  throw Error(Errc::invalid_argument, "unknown bench target: " + s);
}

std::string_view to_string(BenchTarget t) {
  switch (t) {
    case BenchTarget::stt: return "stt";
    case BenchTarget::llm_ttft: return "llm_ttft";
    case BenchTarget::llm_throughput: return "llm_throughput";
    case BenchTarget::tts_ttfb: return "tts_ttfb";
  }
  return "unknown";
}

namespace {

AudioFrame speech_frame(std::size_t index) {
  AudioFrame f;
  f.sample_rate_hz = kMicSampleRate;
  f.samples = make_tone(320, kMicSampleRate, 440.0, 12000, index * 320);
  return f;
}

AudioFrame silence_frame() {
  AudioFrame f;
  f.sample_rate_hz = kMicSampleRate;
  f.samples.assign(320, 0);
  return f;
}

struct Measurement {
  double value = 0.0;
  double aux = 0.0;  // tokens/s or rtf
  std::size_t count = 0;
};

Measurement measure_stt(const ComponentBenchConfig& c) {
  auto session = SttSession::open(c.stt);
  const int frames = std::max(1, c.stt_speech_ms / 20);
  double last_sent = 0.0;
  for (int i = 0; i < frames; ++i) {
    session->send_audio(speech_frame(static_cast<std::size_t>(i)));
    last_sent = now_ms();
  }
  while (auto ev = session->next_event(std::chrono::milliseconds(30000))) {
    if (ev->is_final && !ev->text.empty()) {
      session->close();
      return {ev->received_at_ms - last_sent, 0.0, 1};
    }
  }
  throw Error(Errc::session_error, "stream ended without a final transcript");
}

Measurement measure_llm(const ComponentBenchConfig& c, bool throughput) {
  std::vector<Message> messages{Message::user(c.prompt)};
  std::vector<double> token_times;
  auto stats = chat_stream(c.llm, messages, json::array(), [&](const StreamDelta& d) {
    if (d.kind == DeltaKind::text) token_times.push_back(d.at_ms);
  });
  if (!throughput) {
    if (stats.first_delta_ms < 0) throw Error(Errc::request_error, "response carried no content");
    return {stats.ttft_ms(), 0.0, token_times.size()};
  }
  if (token_times.size() < 2) throw Error(Errc::request_error, "throughput needs at least two tokens");
  const double span = token_times.back() - token_times.front();
  const double gap = span / static_cast<double>(token_times.size() - 1);
  const double tps = span > 0 ? 1000.0 * static_cast<double>(token_times.size() - 1) / span : 0.0;
  return {gap, tps, token_times.size()};
}

Measurement measure_tts(const ComponentBenchConfig& c) {
  TtsRequest req{c.tts_text, c.tts.voice_id, c.tts.model_id};
  auto stats = synthesize_stream(c.tts, req, [](AudioFrame&&) {});
  if (stats.first_byte_ms < 0) throw Error(Errc::synthesis_error, "no audio returned");
  return {stats.ttfb_ms, stats.rtf, stats.frames};
}

}  // namespace

LatencyReport bench_component(const ComponentBenchConfig& c) {
  if (c.iterations < 1) throw Error(Errc::invalid_argument, "iterations must be >= 1");
  if (c.warmup < 0) throw Error(Errc::invalid_argument, "warmup must be >= 0");
  std::vector<double> samples;
  std::vector<double> aux;
  std::size_t count = 0;
  const int total = c.iterations + c.warmup;
  for (int i = 0; i < total; ++i) {
    for (int attempt = 0;; ++attempt) {
      try {
        Measurement m;
        switch (c.target) {
          case BenchTarget::stt: m = measure_stt(c); break;
          case BenchTarget::llm_ttft: m = measure_llm(c, false); break;
          case BenchTarget::llm_throughput: m = measure_llm(c, true); break;
          case BenchTarget::tts_ttfb: m = measure_tts(c); break;
        }
        samples.push_back(m.value);
        if (i >= c.warmup) {
          aux.push_back(m.aux);
          count += m.count;
        }
        break;
      } catch (const Error& e) {
        if (attempt >= c.retries) {
          throw Error(Errc::bench_error,
                      std::string(to_string(c.target)) + " failed after " + std::to_string(attempt + 1) +
                          " attempts: " + e.what(),
                      e.detail());
        }
        sleep_for_ms(c.retry_backoff_ms);
      }
    }
  }
  auto report = LatencyReport::from_samples(std::string(to_string(c.target)), samples, c.warmup);
  const double aux_mean = std::accumulate(aux.begin(), aux.end(), 0.0) / static_cast<double>(aux.size());
  if (c.target == BenchTarget::llm_throughput) {
    report.extras["mean_gap_ms"] = report.mean_ms;
    report.extras["tokens_per_second"] = report.mean_ms > 0 ? 1000.0 / report.mean_ms : 0.0;
    report.extras["tokens_per_second_per_request"] = aux_mean;
    report.extras["tokens"] = count;
  } else if (c.target == BenchTarget::tts_ttfb) {
    report.extras["mean_rtf"] = aux_mean;
    report.extras["frames"] = count;
  }
  return report;
}

PipelineTurnRow PipelineTurnRow::from_timeline(const TurnTimeline& t) {
  PipelineTurnRow r;
  r.timeline = t;
  auto diff = [](const std::optional<double>& a, const std::optional<double>& b) {
    return a && b ? *b - *a : 0.0;
  };
  r.ttfa_ms = diff(t.stt_final_ms, t.first_audio_to_client_ms);
  r.end_to_end_ms = diff(t.utterance_end_ms, t.first_audio_to_client_ms);
  r.stt_ms = diff(t.utterance_end_ms, t.stt_final_ms);
  r.llm_ttft_ms = diff(t.stt_final_ms, t.llm_first_delta_ms);
  r.sentence_ms = diff(t.llm_first_delta_ms, t.first_sentence_ms);
  r.tts_ttfb_ms = t.tts_first_ttfb_ms;
  r.llm_total_ms = diff(t.stt_final_ms, t.llm_done_ms);
  r.tts_total_ms = t.tts_synthesis_total_ms;
  r.turn_based_ms = r.stt_ms + r.llm_total_ms + r.tts_total_ms;
  const std::size_t n = std::min(t.tts_request_ms.size(), t.sentence_first_audio_ms.size());
  for (std::size_t k = 0; k + 1 < t.tts_request_ms.size() && k < n; ++k) {
    const double audio_end = t.sentence_first_audio_ms[k] + t.sentence_audio_ms[k];
    if (t.tts_request_ms[k + 1] < audio_end) r.overlapped = true;
  }
  return r;
}

json PipelineTurnRow::to_json() const {
  return {{"ttfa_ms", ttfa_ms},         {"end_to_end_ms", end_to_end_ms}, {"stt_ms", stt_ms},
          {"llm_ttft_ms", llm_ttft_ms}, {"sentence_ms", sentence_ms},     {"tts_ttfb_ms", tts_ttfb_ms},
          {"llm_total_ms", llm_total_ms}, {"tts_total_ms", tts_total_ms}, {"turn_based_ms", turn_based_ms},
          {"overlapped", overlapped},   {"timeline", timeline.to_json()}};
}

json PipelineBenchResult::to_json() const {
  json comps = json::array();
  for (const auto& c : components) comps.push_back(c.to_json());
  json rows = json::array();
  for (const auto& r : turns) rows.push_back(r.to_json());
  json warm = json::array();
  for (const auto& r : warmup_turns) warm.push_back(r.to_json());
  return {{"ttfa", ttfa.to_json()},
          {"components", comps},
          {"turns", rows},
          {"warmup_turns", warm},
          {"sequential_estimate_ms", sequential_estimate_ms},
          {"wall_ms", wall_ms}};
}

namespace {

std::string frame_bytes(const AudioFrame& f) {
  auto b = to_le_bytes(f.samples);
  return std::string(b.begin(), b.end());
}

TurnTimeline run_bench_turn(net::WsClient& client, const PipelineBenchConfig& c, std::size_t turn_index) {
  const std::string silence = frame_bytes(silence_frame());
  double next = now_ms();
  auto pace = [&] {
    if (!c.realtime) return;
    next += 20.0;
    sleep_until_ms(next);
  };
  for (int i = 0; i < c.speech_frames; ++i) {
    client.send_binary(frame_bytes(speech_frame(static_cast<std::size_t>(i))));
    pace();
  }
  for (int i = 0; i < c.silence_frames; ++i) {
    client.send_binary(silence);
    pace();
  }
  const double deadline = now_ms() + c.turn_timeout_ms;
  while (true) {
    const double left = deadline - now_ms();
    if (left <= 0) throw Error(Errc::bench_error, "turn " + std::to_string(turn_index) + " timed out");
    std::optional<net::WsMessage> msg;
    try {
      msg = client.receive(std::chrono::milliseconds(static_cast<long>(left)));
    } catch (const Error&) {
      throw Error(Errc::bench_error, "turn " + std::to_string(turn_index) + " timed out");
    }
    if (!msg) throw Error(Errc::bench_error, "gateway closed the connection");
    if (msg->binary) continue;
    auto control = parse_control(msg->data);
    if (control.type == ControlType::error) {
      throw Error(Errc::bench_error, "gateway reported: " + control.text.value_or(""));
    }
    if (control.type != ControlType::agent_done) continue;
    if (control.reason.value_or("completed") != "completed") {
      throw Error(Errc::bench_error, "turn " + std::to_string(turn_index) + " ended with " + *control.reason);
    }
    return TurnTimeline::from_json(control.timeline);
  }
}

}  // namespace

PipelineBenchResult bench_pipeline(const PipelineBenchConfig& c) {
  if (c.iterations < 1) throw Error(Errc::invalid_argument, "iterations must be >= 1");
  if (c.scenario.turns.empty()) throw Error(Errc::invalid_argument, "scenario has no turns");
  const double started = now_ms();

  std::unique_ptr<MockStt> stt;
  std::unique_ptr<MockLlm> llm;
  std::unique_ptr<MockTts> tts;
  GatewayConfig gc;
  gc.host = "127.0.0.1";
  gc.port = 0;
  gc.pipeline.echo_gate_attenuation = c.echo_gate_attenuation;
  if (c.stt_url) {
    gc.pipeline.stt.endpoint_url = *c.stt_url;
  } else {
    stt = std::make_unique<MockStt>(c.scenario);
    gc.pipeline.stt.endpoint_url = stt->url();
  }
  if (c.llm_url) {
    gc.pipeline.agent.llm.base_url = *c.llm_url;
  } else {
    llm = std::make_unique<MockLlm>(c.scenario);
    gc.pipeline.agent.llm.base_url = llm->base_url();
  }
  if (c.tts_url) {
    gc.pipeline.tts.base_url = *c.tts_url;
  } else {
    tts = std::make_unique<MockTts>(c.scenario);
    gc.pipeline.tts.base_url = tts->base_url();
  }

  GatewayServer gateway(gc);
  std::unique_ptr<net::WsClient> client;
  try {
    gateway.start();
    client = net::WsClient::connect(gateway.ws_url());
  } catch (const Error& e) {
    throw Error(Errc::bench_error, std::string("cannot start pipeline: ") + e.what());
  }

  PipelineBenchResult result;
  std::vector<TurnTimeline> timelines;
  const int total = c.warmup + c.iterations;
  for (int i = 0; i < total; ++i) {
    timelines.push_back(run_bench_turn(*client, c, static_cast<std::size_t>(i)));
    sleep_for_ms(c.inter_turn_pause_ms);
  }
  client->close();
  gateway.stop();

  std::vector<double> ttfa, stt_ms, ttft, sentence, ttfb, turn_based;
  for (int i = 0; i < total; ++i) {
    auto row = PipelineTurnRow::from_timeline(timelines[static_cast<std::size_t>(i)]);
    if (!timelines[static_cast<std::size_t>(i)].ttfa_ms())
      throw Error(Errc::bench_error, "turn " + std::to_string(i) + " produced no audio");
    ttfa.push_back(row.ttfa_ms);
    stt_ms.push_back(row.stt_ms);
    ttft.push_back(row.llm_ttft_ms);
    sentence.push_back(row.sentence_ms);
    ttfb.push_back(row.tts_ttfb_ms);
    turn_based.push_back(row.turn_based_ms);
    (i < c.warmup ? result.warmup_turns : result.turns).push_back(row);
  }
  result.ttfa = LatencyReport::from_samples("measured_ttfa", ttfa, c.warmup);
  result.components.push_back(LatencyReport::from_samples("stt_final", stt_ms, c.warmup));
  result.components.push_back(LatencyReport::from_samples("llm_ttft", ttft, c.warmup));
  result.components.push_back(LatencyReport::from_samples("sentence_detection", sentence, c.warmup));
  result.components.push_back(LatencyReport::from_samples("tts_ttfb", ttfb, c.warmup));
  result.components.push_back(LatencyReport::from_samples("turn_based_sum", turn_based, c.warmup));
  result.sequential_estimate_ms =
      result.components[0].p50_ms + result.components[1].p50_ms + result.components[3].p50_ms;
  result.wall_ms = now_ms() - started;
  return result;
}

std::string format_report_table(std::span<const LatencyReport> reports) {
  std::ostringstream out;
  out << std::left << std::setw(22) << "component" << std::right << std::setw(10) << "p50" << std::setw(10)
      << "mean" << std::setw(10) << "min" << std::setw(10) << "max" << std::setw(6) << "n" << std::setw(8)
      << "warmup" << "\n";
  out << std::fixed << std::setprecision(1);
  for (const auto& r : reports) {
    out << std::left << std::setw(22) << r.component << std::right << std::setw(10) << r.p50_ms << std::setw(10)
        << r.mean_ms << std::setw(10) << r.min_ms << std::setw(10) << r.max_ms << std::setw(6) << r.iterations
        << std::setw(8) << r.warmup_excluded << "\n";
  }
  return out.str();
}

std::string format_pipeline_result(const PipelineBenchResult& r) {
  std::vector<LatencyReport> all = r.components;
  all.push_back(r.ttfa);
  std::ostringstream out;
  out << format_report_table(all);
  out << std::fixed << std::setprecision(1);
  out << "sequential estimate (stt + llm ttft + tts ttfb, analytic): " << r.sequential_estimate_ms << " ms\n";
  out << "measured ttfa p50: " << r.ttfa.p50_ms << " ms\n\n";
  out << std::right << std::setw(5) << "turn" << std::setw(10) << "ttfa" << std::setw(10) << "stt" << std::setw(10)
      << "ttft" << std::setw(10) << "sentence" << std::setw(10) << "ttfb" << std::setw(12) << "turn_based"
      << std::setw(9) << "overlap" << "\n";
  for (std::size_t i = 0; i < r.turns.size(); ++i) {
    const auto& t = r.turns[i];
    out << std::setw(5) << i << std::setw(10) << t.ttfa_ms << std::setw(10) << t.stt_ms << std::setw(10)
        << t.llm_ttft_ms << std::setw(10) << t.sentence_ms << std::setw(10) << t.tts_ttfb_ms << std::setw(12)
        << t.turn_based_ms << std::setw(9) << (t.overlapped ? "yes" : "no") << "\n";
  }
  out << "wall time: " << r.wall_ms << " ms\n";
  return out.str();
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::bench_error, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace voice
