#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "voice/bench.hpp"
#include "voice/error.hpp"
#include "voice/gateway.hpp"
#include "voice/mock.hpp"
#include "voice/url.hpp"

using namespace voice;

namespace {

// Blocks SIGINT/SIGTERM in every thread started afterwards; wait_for_signal()
// then picks them up synchronously.
sigset_t block_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

void wait_for_signal(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
  spdlog::info("shutting down");
}

struct Endpoints {
  std::string stt_url;
  std::string llm_url;
  std::string llm_model;
  std::string llm_key;
  std::string tts_url;
  std::string voice_id;

  void add_to(CLI::App* app) {
    app->add_option("--stt-url", stt_url, "streaming STT WebSocket URL (env STT_URL)");
    app->add_option("--llm-url", llm_url, "OpenAI-compatible base URL (env OPENAI_BASE_URL)");
    app->add_option("--llm-model", llm_model, "model name (env LLM_MODEL)");
    app->add_option("--llm-api-key", llm_key, "LLM API key (env OPENAI_API_KEY)");
    app->add_option("--tts-url", tts_url, "TTS base URL (env TTS_URL)");
    app->add_option("--voice-id", voice_id, "TTS voice (env TTS_VOICE_ID)");
  }

  void apply(PipelineConfig& p) const {
    if (!stt_url.empty()) p.stt.endpoint_url = stt_url;
    if (!llm_url.empty()) p.agent.llm.base_url = llm_url;
    if (!llm_model.empty()) p.agent.llm.model = llm_model;
    if (!llm_key.empty()) p.agent.llm.api_key = llm_key;
    if (!tts_url.empty()) p.tts.base_url = tts_url;
    if (!voice_id.empty()) p.tts.voice_id = voice_id;
  }
};

void print_report(const LatencyReport& r, const std::string& out) {
  std::vector<LatencyReport> one{r};
  std::cout << format_report_table(one);
  if (!r.extras.empty()) std::cout << r.extras.dump() << "\n";
  if (!out.empty()) write_json_file(out, r.to_json());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-hosted realtime voice agent: gateway, mock services and latency bench"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  // serve
  auto* serve = app.add_subcommand("serve", "run the WebSocket gateway");
  std::string bind = env_or("BIND_ADDR", "0.0.0.0:8080");
  std::string static_dir;
  double attenuation = 0.0;
  Endpoints serve_ep;
  serve->add_option("--bind", bind, "host:port (env BIND_ADDR)");
  serve->add_option("--static-dir", static_dir, "directory served at /");
  serve->add_option("--echo-gate", attenuation, "mic attenuation while the agent speaks, 0..1")
      ->check(CLI::Range(0.0, 1.0));
  serve_ep.add_to(serve);

  // mock
  auto* mock = app.add_subcommand("mock", "run scripted stand-ins for STT, LLM and TTS");
  std::string which = "all";
  std::string mock_scenario;
  std::string mock_host = "127.0.0.1";
  uint16_t stt_port = 8081, llm_port = 8082, tts_port = 8083;
  mock->add_option("service", which, "stt|llm|tts|all")->check(CLI::IsMember({"stt", "llm", "tts", "all"}));
  mock->add_option("--scenario", mock_scenario, "scenario file")->required()->check(CLI::ExistingFile);
  mock->add_option("--host", mock_host, "bind host");
  mock->add_option("--stt-port", stt_port);
  mock->add_option("--llm-port", llm_port);
  mock->add_option("--tts-port", tts_port);

  // bench
  auto* bench = app.add_subcommand("bench", "latency measurements");
  bench->require_subcommand(1);
  bench->fallthrough();
  int iterations = 10, warmup = 1;
  std::string scenario_path, out_path;
  Endpoints bench_ep;
  bool throughput = false, realtime = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--iterations", iterations, "measured iterations")->check(CLI::PositiveNumber);
    sub->add_option("--warmup", warmup, "leading iterations excluded from stats")->check(CLI::NonNegativeNumber);
    sub->add_option("--scenario", scenario_path, "start in-process mocks from this scenario")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "write the report as JSON");
    bench_ep.add_to(sub);
  };
  auto* b_stt = bench->add_subcommand("stt", "last audio to final transcript");
  auto* b_llm = bench->add_subcommand("llm", "time to first token");
  auto* b_tts = bench->add_subcommand("tts", "time to first audio byte");
  auto* b_pipe = bench->add_subcommand("pipeline", "end-to-end TTFA through the gateway");
  for (auto* sub : {b_stt, b_llm, b_tts, b_pipe}) add_common(sub);
  b_llm->add_flag("--throughput", throughput, "report inter-token gap and tokens/s instead of TTFT");
  b_pipe->add_flag("--realtime", realtime, "pace client audio at 20 ms per frame");

  auto* b_est = bench->add_subcommand("estimate", "analytic TTFA from component latencies");
  std::string mode = "turn_based";
  LatencyModel model;
  b_est->add_option("--mode", mode, "turn_based|streaming")->check(CLI::IsMember({"turn_based", "streaming"}));
  b_est->add_option("--stt", model.t_stt_ms, "STT latency, ms");
  b_est->add_option("--llm", model.t_llm_ms, "full LLM generation, ms (turn_based)");
  b_est->add_option("--tts", model.t_tts_ms, "full synthesis, ms (turn_based)");
  b_est->add_option("--llm-first-sentence", model.t_llm_first_sentence_ms, "LLM first sentence, ms (streaming)");
  b_est->add_option("--tts-ttfb", model.t_tts_ttfb_ms, "TTS time to first byte, ms (streaming)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*serve) {
      auto signals = block_signals();
      GatewayConfig gc = GatewayConfig::from_env();
      std::tie(gc.host, gc.port) = parse_host_port(bind);
      gc.static_dir = static_dir;
      gc.pipeline.echo_gate_attenuation = attenuation;
      serve_ep.apply(gc.pipeline);
      GatewayServer server(gc);
      server.start();
      wait_for_signal(signals);
      server.stop();
      return 0;
    }

    if (*mock) {
      auto signals = block_signals();
      Scenario sc = load_scenario(mock_scenario);
      std::unique_ptr<MockStt> stt;
      std::unique_ptr<MockLlm> llm;
      std::unique_ptr<MockTts> tts;
      if (which == "stt" || which == "all") {
        stt = std::make_unique<MockStt>(sc, mock_host, stt_port);
        std::cout << "mock stt: " << stt->url() << std::endl;
      }
      if (which == "llm" || which == "all") {
        llm = std::make_unique<MockLlm>(sc, mock_host, llm_port);
        std::cout << "mock llm: " << llm->base_url() << std::endl;
      }
      if (which == "tts" || which == "all") {
        tts = std::make_unique<MockTts>(sc, mock_host, tts_port);
        std::cout << "mock tts: " << tts->base_url() << std::endl;
      }
      wait_for_signal(signals);
      return 0;
    }

    if (*b_est) {
      const auto m = parse_estimate_mode(mode);
      const double ms = estimate_ttfa(model, m);
      std::cout << mode << " TTFA estimate (analytic, not measured): " << ms << " ms" << std::endl;
      if (!out_path.empty()) {
        write_json_file(out_path, {{"mode", mode},
                                   {"analytic", true},
                                   {"ttfa_ms", ms},
                                   {"model",
                                    {{"t_stt_ms", model.t_stt_ms},
                                     {"t_llm_ms", model.t_llm_ms},
                                     {"t_tts_ms", model.t_tts_ms},
                                     {"t_llm_first_sentence_ms", model.t_llm_first_sentence_ms},
                                     {"t_tts_ttfb_ms", model.t_tts_ttfb_ms}}}});
      }
      return 0;
    }

    if (*b_pipe) {
      if (scenario_path.empty()) throw Error(Errc::invalid_argument, "bench pipeline needs --scenario");
      PipelineBenchConfig pc;
      pc.scenario = load_scenario(scenario_path);
      pc.iterations = iterations;
      pc.warmup = warmup;
      pc.realtime = realtime;
      if (!bench_ep.stt_url.empty()) pc.stt_url = bench_ep.stt_url;
      if (!bench_ep.llm_url.empty()) pc.llm_url = bench_ep.llm_url;
      if (!bench_ep.tts_url.empty()) pc.tts_url = bench_ep.tts_url;
      auto result = bench_pipeline(pc);
      std::cout << format_pipeline_result(result);
      if (!out_path.empty()) write_json_file(out_path, result.to_json());
      return 0;
    }

    // Component benches against real endpoints, or in-process mocks.
    ComponentBenchConfig cc;
    cc.iterations = iterations;
    cc.warmup = warmup;
    cc.stt = SttSessionConfig::from_env();
    cc.llm = LlmConfig::from_env();
    cc.tts = TtsConfig::from_env();
    PipelineConfig tmp;
    tmp.stt = cc.stt;
    tmp.agent.llm = cc.llm;
    tmp.tts = cc.tts;
    bench_ep.apply(tmp);
    cc.stt = tmp.stt;
    cc.llm = tmp.agent.llm;
    cc.tts = tmp.tts;
    std::unique_ptr<MockSuite> mocks;
    if (!scenario_path.empty()) {
      mocks = std::make_unique<MockSuite>(load_scenario(scenario_path));
      cc.stt.endpoint_url = mocks->stt.url();
      cc.llm.base_url = mocks->llm.base_url();
      cc.tts.base_url = mocks->tts.base_url();
    }
    if (*b_stt) cc.target = BenchTarget::stt;
    if (*b_llm) cc.target = throughput ? BenchTarget::llm_throughput : BenchTarget::llm_ttft;
    if (*b_tts) cc.target = BenchTarget::tts_ttfb;
    print_report(bench_component(cc), out_path);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << std::endl;
    if (!e.detail().empty()) std::cerr << "  " << e.detail() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
