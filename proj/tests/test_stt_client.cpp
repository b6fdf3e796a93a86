#include <doctest.h>

#include <thread>

#include "support.hpp"
#include "voice/error.hpp"
#include "voice/stt_client.hpp"

using namespace voice;
using namespace std::chrono_literals;

namespace {

voice::Scenario stt_scenario(double final_delay_ms = 50) {
  nlohmann::json turn{{"user_transcript", "book an appointment"},
                      {"stt_partials", {"book an"}},
                      {"stt_final_delay_ms", final_delay_ms},
                      {"llm_script", {"ok"}}};
  return testing::scenario_from({{"schema_version", 1}, {"turns", {turn}}});
}

SttSessionConfig config_for(const MockStt& stt) {
  SttSessionConfig c;
  c.endpoint_url = stt.url();
  return c;
}

}  // namespace

TEST_CASE("parse_transcript_message") {
  auto ev = parse_transcript_message(SttProvider::minimal,
                                     R"({"text":"hi","is_final":true,"speech_final":false,"audio_start_ms":120})", 5);
  REQUIRE(ev);
  CHECK(ev->text == "hi");
  CHECK(ev->is_final);
  CHECK_FALSE(ev->speech_final);
  CHECK(ev->audio_start_ms == 120);
  CHECK(ev->received_at_ms == 5);

  auto dg = parse_transcript_message(
      SttProvider::deepgram,
      R"({"type":"Results","start":1.5,"is_final":true,"speech_final":true,"channel":{"alternatives":[{"transcript":"yes"}]}})",
      0);
  REQUIRE(dg);
  CHECK(dg->text == "yes");
  CHECK(dg->audio_start_ms == doctest::Approx(1500));
  CHECK_FALSE(parse_transcript_message(SttProvider::deepgram, R"({"type":"Metadata"})", 0));

  try {
    parse_transcript_message(SttProvider::minimal, R"({"text":"hi"})", 0);
    FAIL("expected protocol-error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::protocol_error);
    CHECK(e.detail() == R"({"text":"hi"})");
  }
}

TEST_CASE("streams audio and receives partial then final") {
  MockStt stt(stt_scenario());
  auto session = SttSession::open(config_for(stt));
  for (int i = 0; i < 50; ++i) session->send_audio(testing::tone_frame(320, 8000, i * 320));
  const double last_sent = now_ms();

  std::vector<TranscriptEvent> events;
  while (true) {
    auto ev = session->next_event(3000ms);
    REQUIRE(ev);
    events.push_back(*ev);
    if (ev->speech_final) break;
  }
  REQUIRE(events.size() >= 2);
  CHECK_FALSE(events.front().is_final);
  CHECK(events.front().text == "book an");
  CHECK(events.back().is_final);
  CHECK(events.back().text == "book an appointment");
  CHECK(events.back().received_at_ms - last_sent >= 40);
  session->close();
  std::this_thread::sleep_for(100ms);
  auto s = stt.stats();
  CHECK(s.frames_received == 50);
  CHECK(s.bytes_received == 32000);
  REQUIRE(s.audio_by_connection.size() == 1);
  CHECK(s.audio_by_connection[0].size() == 32000);
  CHECK(s.closed_streams == 1);
}

TEST_CASE("finalize ends the utterance on demand") {
  MockStt stt(stt_scenario(20));
  auto session = SttSession::open(config_for(stt));
  for (int i = 0; i < 5; ++i) session->send_audio(testing::tone_frame());
  session->finalize();
  TranscriptEvent last;
  while (!last.speech_final) {
    auto ev = session->next_event(3000ms);
    REQUIRE(ev);
    last = *ev;
  }
  CHECK(last.text == "book an appointment");
  CHECK(stt.stats().finalizes == 1);
}

TEST_CASE("auth") {
  auto sc = stt_scenario();
  sc.stt.required_token = "good";
  MockStt stt(sc);
  auto c = config_for(stt);
  c.auth_token = "bad";
  try {
    SttSession::open(c);
    FAIL("expected connect-error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::connect_error);
    CHECK(e.status() == 401);
  }
  CHECK(stt.stats().rejected >= 1);
  c.auth_token = "good";
  CHECK(SttSession::open(c)->is_open());
  c.auth_in_query = true;
  CHECK(SttSession::open(c)->is_open());
}

TEST_CASE("keepalive during silence") {
  MockStt stt(stt_scenario());
  auto c = config_for(stt);
  c.keepalive_interval_ms = 100;
  auto session = SttSession::open(c);
  std::this_thread::sleep_for(450ms);
  CHECK(session->keepalives_sent() >= 2);
  session->close();
  std::this_thread::sleep_for(100ms);
  CHECK(stt.stats().keepalives >= 2);
}

TEST_CASE("misuse") {
  MockStt stt(stt_scenario());
  auto session = SttSession::open(config_for(stt));
  AudioFrame wrong = testing::tone_frame();
  wrong.sample_rate_hz = 8000;
  CHECK_THROWS_AS(session->send_audio(wrong), Error);
  session->close();
  session->close();
  try {
    session->send_audio(testing::tone_frame());
    FAIL("expected session-closed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::session_closed);
  }
  SttSessionConfig nowhere;
  nowhere.endpoint_url = "ws://127.0.0.1:1/v1/listen";
  nowhere.connect_timeout_ms = 500;
  CHECK_THROWS_AS(SttSession::open(nowhere), Error);
}

TEST_CASE("a malformed result surfaces as protocol-error") {
  auto sc = stt_scenario(10);
  sc.stt.omit_is_final = true;
  MockStt stt(sc);
  auto session = SttSession::open(config_for(stt));
  for (int i = 0; i < 5; ++i) session->send_audio(testing::tone_frame());
  try {
    for (int i = 0; i < 10; ++i) session->next_event(3000ms);
    FAIL("expected protocol-error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::protocol_error);
    CHECK_FALSE(e.detail().empty());
  }
}
