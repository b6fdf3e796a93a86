#include <doctest.h>

#include <map>
#include <set>

#include "support.hpp"
#include "voice/error.hpp"
#include "voice/vad.hpp"

using namespace voice;

namespace {

enum class Input { speech, silence, audio_started, done };
const Input kInputs[] = {Input::speech, Input::silence, Input::audio_started, Input::done};
const TurnState kStates[] = {TurnState::idle, TurnState::listening, TurnState::processing, TurnState::speaking,
                             TurnState::interrupted};

VadStep apply(VadMachine& m, Input in) {
  switch (in) {
    case Input::speech: return m.step(0.9);
    case Input::silence: return m.step(0.1);
    case Input::audio_started: return m.step(0.0, AgentSignal::agent_audio_started);
    case Input::done: return m.step(0.0, AgentSignal::agent_done);
  }
  return m.step(0.0);
}

// One speech frame starts speech and one silence frame ends the turn.
VadConfig single_frame_config() {
  VadConfig c;
  c.min_speech_ms = c.frame_ms;
  c.silence_ms_to_end_turn = c.frame_ms;
  return c;
}

VadMachine machine_in(TurnState target, VadConfig c = single_frame_config()) {
  VadMachine m(c);
  const std::map<TurnState, std::vector<Input>> paths = {
      {TurnState::idle, {}},
      {TurnState::listening, {Input::speech}},
      {TurnState::processing, {Input::speech, Input::silence}},
      {TurnState::speaking, {Input::speech, Input::silence, Input::audio_started}},
      {TurnState::interrupted, {Input::speech, Input::silence, Input::audio_started, Input::speech}},
  };
  for (auto in : paths.at(target)) apply(m, in);
  REQUIRE(m.state() == target);
  return m;
}

struct Expect {
  bool error = false;
  TurnState next = TurnState::idle;
  std::optional<TurnEventKind> event;
};

Expect ok(TurnState s, std::optional<TurnEventKind> e = std::nullopt) { return {false, s, e}; }
Expect err() { return {true, TurnState::idle, std::nullopt}; }

const std::map<std::pair<TurnState, Input>, Expect>& table() {
  using S = TurnState;
  using E = TurnEventKind;
  static const std::map<std::pair<S, Input>, Expect> t = {
      {{S::idle, Input::speech}, ok(S::listening, E::speech_started)},
      {{S::idle, Input::silence}, ok(S::idle)},
      {{S::idle, Input::audio_started}, err()},
      {{S::idle, Input::done}, err()},
      {{S::listening, Input::speech}, ok(S::listening)},
      {{S::listening, Input::silence}, ok(S::processing, E::utterance_ended)},
      {{S::listening, Input::audio_started}, err()},
      {{S::listening, Input::done}, err()},
      {{S::processing, Input::speech}, ok(S::processing)},
      {{S::processing, Input::silence}, ok(S::processing)},
      {{S::processing, Input::audio_started}, ok(S::speaking)},
      {{S::processing, Input::done}, err()},
      {{S::speaking, Input::speech}, ok(S::interrupted, E::interruption)},
      {{S::speaking, Input::silence}, ok(S::speaking)},
      {{S::speaking, Input::audio_started}, err()},
      {{S::speaking, Input::done}, ok(S::idle, E::agent_done_ack)},
      {{S::interrupted, Input::speech}, ok(S::listening)},
      {{S::interrupted, Input::silence}, ok(S::listening)},
      {{S::interrupted, Input::audio_started}, ok(S::listening)},
      {{S::interrupted, Input::done}, ok(S::listening)},
  };
  return t;
}

}  // namespace

TEST_CASE("exhaustive transition table") {
  for (auto s : kStates) {
    for (auto in : kInputs) {
      const auto& want = table().at({s, in});
      auto m = machine_in(s);
      CAPTURE(to_string(s));
      CAPTURE(static_cast<int>(in));
      if (want.error) {
        try {
          apply(m, in);
          FAIL("expected protocol-error");
        } catch (const Error& e) {
          CHECK(e.code() == Errc::protocol_error);
        }
        CHECK(m.state() == s);
        continue;
      }
      auto step = apply(m, in);
      CHECK(step.state == want.next);
      CHECK(m.state() == want.next);
      CHECK(step.event.has_value() == want.event.has_value());
      if (step.event && want.event) CHECK(step.event->kind == *want.event);
    }
  }
}

TEST_CASE("every state reaches every other and IDLE is reachable from all") {
  std::map<TurnState, std::set<TurnState>> edges;
  for (const auto& [key, e] : table()) {
    if (!e.error) edges[key.first].insert(e.next);
  }
  auto reach = [&](TurnState from) {
    std::set<TurnState> seen{from};
    std::vector<TurnState> todo{from};
    while (!todo.empty()) {
      auto s = todo.back();
      todo.pop_back();
      for (auto n : edges[s]) {
        if (seen.insert(n).second) todo.push_back(n);
      }
    }
    return seen;
  };
  CHECK(reach(TurnState::idle).size() == 5);
  for (auto s : kStates) CHECK(reach(s).contains(TurnState::idle));
}

TEST_CASE("speech start needs min_speech_ms") {
  VadMachine m;
  CHECK_FALSE(m.on_frame(0.9).event);
  CHECK_FALSE(m.on_frame(0.9).event);
  auto third = m.on_frame(0.9);
  REQUIRE(third.event);
  CHECK(third.event->kind == TurnEventKind::speech_started);
  CHECK(third.event->at_ms == doctest::Approx(96.0));
  CHECK(m.state() == TurnState::listening);
}

TEST_CASE("a single click does not leave IDLE") {
  VadMachine m;
  m.on_frame(1.0);
  for (int i = 0; i < 50; ++i) m.on_frame(0.0);
  CHECK(m.state() == TurnState::idle);
  m.on_frame(1.0);
  m.on_frame(1.0);
  m.on_frame(0.0);
  m.on_frame(1.0);
  CHECK(m.state() == TurnState::idle);
}

TEST_CASE("700 ms of silence ends the turn, not one frame earlier") {
  for (int frame_ms : {32, 20, 10}) {
    VadConfig c;
    c.frame_ms = frame_ms;
    c.min_speech_ms = frame_ms;
    VadMachine m(c);
    m.on_frame(1.0);
    REQUIRE(m.state() == TurnState::listening);
    const int needed = (700 + frame_ms - 1) / frame_ms;  // ceil
    for (int i = 1; i < needed; ++i) {
      CHECK_FALSE(m.on_frame(0.0).event);
    }
    CHECK(m.silence_run_ms() == (needed - 1) * frame_ms);
    CHECK(m.silence_run_ms() < 700);
    auto last = m.on_frame(0.0);
    REQUIRE(last.event);
    CHECK(last.event->kind == TurnEventKind::utterance_ended);
    CHECK(needed * frame_ms >= 700);
    CHECK(m.state() == TurnState::processing);
  }
}

TEST_CASE("default config: 22 silent frames end the utterance") {
  VadMachine m;
  for (int i = 0; i < 3; ++i) m.on_frame(0.9);
  for (int i = 0; i < 21; ++i) CHECK_FALSE(m.on_frame(0.1).event);
  auto step = m.on_frame(0.1);
  REQUIRE(step.event);
  CHECK(step.event->kind == TurnEventKind::utterance_ended);
}

TEST_CASE("speech resets the silence counter") {
  VadMachine m;
  for (int i = 0; i < 3; ++i) m.on_frame(0.9);
  for (int round = 0; round < 5; ++round) {
    for (int i = 0; i < 21; ++i) m.on_frame(0.1);
    m.on_frame(0.9);
  }
  CHECK(m.state() == TurnState::listening);
}

TEST_CASE("barge-in needs min_speech_ms while speaking, then returns to LISTENING") {
  VadMachine m;
  for (int i = 0; i < 3; ++i) m.on_frame(0.9);
  for (int i = 0; i < 22; ++i) m.on_frame(0.1);
  m.on_signal(AgentSignal::agent_audio_started);
  REQUIRE(m.state() == TurnState::speaking);
  m.on_frame(0.9);
  m.on_frame(0.9);
  CHECK(m.state() == TurnState::speaking);
  auto s = m.on_frame(0.9);
  REQUIRE(s.event);
  CHECK(s.event->kind == TurnEventKind::interruption);
  CHECK(m.state() == TurnState::interrupted);
  m.on_frame(0.9);
  CHECK(m.state() == TurnState::listening);
  for (int i = 0; i < 22; ++i) m.on_frame(0.0);
  CHECK(m.state() == TurnState::processing);
}

TEST_CASE("speech during PROCESSING is ignored") {
  VadMachine m;
  for (int i = 0; i < 3; ++i) m.on_frame(0.9);
  for (int i = 0; i < 22; ++i) m.on_frame(0.1);
  REQUIRE(m.state() == TurnState::processing);
  for (int i = 0; i < 20; ++i) CHECK_FALSE(m.on_frame(1.0).event);
  CHECK(m.state() == TurnState::processing);
}

TEST_CASE("energy detector") {
  EnergyDetector d;
  auto zero = testing::silent_frame(512);
  CHECK(d.speech_probability(zero) == 0.0);

  AudioFrame square = testing::silent_frame(512);
  for (std::size_t i = 0; i < square.samples.size(); ++i) square.samples[i] = (i % 2) ? 32767 : -32767;
  CHECK(d.speech_probability(square) == 1.0);

  AudioFrame half = testing::silent_frame(512);
  for (std::size_t i = 0; i < half.samples.size(); ++i) half.samples[i] = (i % 2) ? 4000 : -4000;
  const double p = d.speech_probability(half);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  CHECK(p == doctest::Approx(0.5));
  CHECK(d.speech_probability(half) == p);

  CHECK_THROWS_AS(d.speech_probability(testing::silent_frame(320)), Error);
  AudioFrame wrong_rate = testing::silent_frame(512);
  wrong_rate.sample_rate_hz = 8000;
  CHECK_THROWS_AS(d.speech_probability(wrong_rate), Error);
}

TEST_CASE("config validation") {
  VadConfig c;
  c.speech_threshold = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.silence_ms_to_end_turn = 0;
  CHECK_THROWS_AS(VadMachine{c}, Error);
  c = {};
  c.frame_ms = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(VadConfig{}.frame_samples() == 512);
}
