#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "support.hpp"
#include "voice/bench.hpp"
#include "voice/error.hpp"

using namespace voice;

TEST_CASE("nearest rank") {
  const std::vector<double> xs{15, 20, 35, 40, 50};
  CHECK(nearest_rank(xs, 0.05) == 15);
  CHECK(nearest_rank(xs, 0.30) == 20);
  CHECK(nearest_rank(xs, 0.40) == 20);
  CHECK(nearest_rank(xs, 0.50) == 35);
  CHECK(nearest_rank(xs, 1.00) == 50);
  const std::vector<double> shuffled{50, 15, 40, 20, 35};
  CHECK(nearest_rank(shuffled, 0.5) == 35);
  const std::vector<double> even{1, 2, 3, 4};
  CHECK(nearest_rank(even, 0.5) == 2);
  const std::vector<double> one{7};
  CHECK(nearest_rank(one, 0.5) == 7);
  CHECK_THROWS_AS(nearest_rank(std::vector<double>{}, 0.5), Error);
}

TEST_CASE("reports summarize measured samples only") {
  const std::vector<double> all{4000, 10, 30, 20};
  auto r = LatencyReport::from_samples("llm_ttft", all, 1);
  CHECK(r.iterations == 3);
  CHECK(r.warmup_excluded == 1);
  CHECK(r.warmup_samples_ms == std::vector<double>{4000});
  CHECK(r.samples_ms == std::vector<double>{10, 30, 20});
  CHECK(r.p50_ms == 20);
  CHECK(r.mean_ms == 20);
  CHECK(r.min_ms == 10);
  CHECK(r.max_ms == 30);
  CHECK(r.consistent());
  CHECK_THROWS_AS(LatencyReport::from_samples("x", all, 4), Error);

  auto n1 = LatencyReport::from_samples("x", std::vector<double>{12.5});
  CHECK(n1.p50_ms == 12.5);
  CHECK(n1.mean_ms == 12.5);
  CHECK(n1.min_ms == n1.max_ms);
}

TEST_CASE("stats recompute exactly from exported samples") {
  std::vector<double> xs;
  for (int i = 0; i < 37; ++i) xs.push_back(100.0 + (i * 7919 % 113) * 0.37);
  auto r = LatencyReport::from_samples("tts_ttfb", xs, 2);
  const auto path = std::filesystem::temp_directory_path() / "voice_bench_report.json";
  write_json_file(path, r.to_json());
  std::ifstream in(path);
  auto j = nlohmann::json::parse(in);
  std::vector<double> s = j["samples_ms"].get<std::vector<double>>();
  CHECK(s.size() == 35);
  CHECK(nearest_rank(s, 0.5) == j["p50_ms"].get<double>());
  CHECK(*std::min_element(s.begin(), s.end()) == j["min_ms"].get<double>());
  CHECK(*std::max_element(s.begin(), s.end()) == j["max_ms"].get<double>());
  CHECK(std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size()) == j["mean_ms"].get<double>());
  auto back = LatencyReport::from_json(j);
  CHECK(back.consistent());
  CHECK(back.to_json() == j);
  back.p50_ms += 1;
  CHECK_FALSE(back.consistent());
  std::filesystem::remove(path);
}

TEST_CASE("analytic estimates") {
  CHECK(estimate_ttfa({400, 800, 400, 0, 0}, EstimateMode::turn_based) == 1600);
  CHECK(estimate_ttfa({400, 0, 0, 300, 200}, EstimateMode::streaming) == 900);
  CHECK(estimate_ttfa({337, 0, 0, 439, 316}, EstimateMode::streaming) == 1092);
  CHECK_THROWS_AS(estimate_ttfa({-1, 0, 0, 0, 0}, EstimateMode::turn_based), Error);
  CHECK_THROWS_AS(estimate_ttfa({1, 1, 1, -5, 1}, EstimateMode::streaming), Error);
  CHECK_NOTHROW(estimate_ttfa({1, 1, 1, -5, 1}, EstimateMode::turn_based));
  CHECK(parse_estimate_mode("streaming") == EstimateMode::streaming);
  CHECK_THROWS_AS(parse_estimate_mode("fast"), Error);
}

TEST_CASE("turn rows") {
  TurnTimeline t;
  t.utterance_end_ms = 0;
  t.stt_final_ms = 300;
  t.llm_first_delta_ms = 600;
  t.first_sentence_ms = 700;
  t.tts_first_byte_ms = 1000;
  t.first_audio_to_client_ms = 1001;
  t.llm_done_ms = 1200;
  t.tts_first_ttfb_ms = 300;
  t.tts_synthesis_total_ms = 900;
  t.tts_request_ms = {700, 1100};
  t.tts_end_ms = {1050, 1600};
  t.sentence_first_audio_ms = {1001, 1400};
  t.sentence_audio_ms = {800, 500};
  auto row = PipelineTurnRow::from_timeline(t);
  CHECK(row.ttfa_ms == 701);
  CHECK(row.end_to_end_ms == 1001);
  CHECK(row.stt_ms == 300);
  CHECK(row.llm_ttft_ms == 300);
  CHECK(row.sentence_ms == 100);
  CHECK(row.tts_ttfb_ms == 300);
  CHECK(row.llm_total_ms == 900);
  CHECK(row.tts_total_ms == 900);
  CHECK(row.turn_based_ms == 2100);
  CHECK(row.overlapped);
}

TEST_CASE("component bench against mocks") {
  nlohmann::json turn{{"user_transcript", "x"},
                      {"llm_script", {"a", " b", " c", " d", " e"}},
                      {"llm_ttft_ms", 40},
                      {"llm_inter_token_ms", 20},
                      {"tts_ttfb_ms", 30},
                      {"tts_rtf", 0.1},
                      {"stt_final_delay_ms", 25}};
  MockSuite mocks(testing::scenario_from({{"schema_version", 1}, {"turns", {turn}}}));
  ComponentBenchConfig c;
  c.iterations = 3;
  c.warmup = 1;
  c.stt.endpoint_url = mocks.stt.url();
  c.llm.base_url = mocks.llm.base_url();
  c.tts.base_url = mocks.tts.base_url();
  c.stt_speech_ms = 200;

  c.target = BenchTarget::llm_ttft;
  auto ttft = bench_component(c);
  CHECK(ttft.samples_ms.size() == 3);
  CHECK(ttft.p50_ms == doctest::Approx(40).epsilon(0.25));
  CHECK(ttft.consistent());

  c.target = BenchTarget::llm_throughput;
  auto tput = bench_component(c);
  CHECK(tput.p50_ms == doctest::Approx(20).epsilon(0.25));
  CHECK(tput.extras["tokens_per_second"].get<double>() == doctest::Approx(1000.0 / tput.mean_ms));

  c.target = BenchTarget::tts_ttfb;
  auto ttfb = bench_component(c);
  CHECK(ttfb.p50_ms == doctest::Approx(30).epsilon(0.33));
  CHECK(ttfb.extras.contains("mean_rtf"));

  c.target = BenchTarget::stt;
  auto stt = bench_component(c);
  CHECK(stt.p50_ms == doctest::Approx(25).epsilon(0.4));
}

TEST_CASE("warmup excludes a 4 s cold start") {
  nlohmann::json turn{{"user_transcript", "x"}, {"llm_script", {"hi"}}, {"llm_ttft_ms", 20}};
  auto sc = testing::scenario_from({{"schema_version", 1}, {"turns", {turn}}});
  sc.llm.cold_start_ms = 4000;
  MockLlm llm(sc);
  ComponentBenchConfig c;
  c.target = BenchTarget::llm_ttft;
  c.iterations = 3;
  c.warmup = 1;
  c.llm.base_url = llm.base_url();
  auto r = bench_component(c);
  REQUIRE(r.warmup_samples_ms.size() == 1);
  CHECK(r.warmup_samples_ms[0] >= 4000);
  CHECK(r.max_ms < 200);
  CHECK(r.consistent());
}

TEST_CASE("an unreachable service is a bench error") {
  ComponentBenchConfig c;
  c.target = BenchTarget::llm_ttft;
  c.iterations = 1;
  c.warmup = 0;
  c.retries = 1;
  c.retry_backoff_ms = 10;
  c.llm.base_url = "http://127.0.0.1:1";
  c.llm.connect_timeout_ms = 200;
  try {
    bench_component(c);
    FAIL("expected bench-error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bench_error);
  }
}

TEST_CASE("short pipeline bench") {
  PipelineBenchConfig c;
  c.scenario = testing::quick_scenario();
  c.iterations = 2;
  c.warmup = 1;
  auto r = bench_pipeline(c);
  CHECK(r.turns.size() == 2);
  CHECK(r.warmup_turns.size() == 1);
  CHECK(r.ttfa.samples_ms.size() == 2);
  CHECK(r.ttfa.consistent());
  for (const auto& comp : r.components) CHECK(comp.consistent());
  auto j = r.to_json();
  CHECK(j["turns"].size() == 2);
  CHECK_FALSE(format_pipeline_result(r).empty());
}
