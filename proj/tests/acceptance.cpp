// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "corpus.hpp"
#include "voice/agent.hpp"
#include "voice/bench.hpp"
#include "voice/hospital.hpp"
#include "voice/sentence_buffer.hpp"
#include "voice/vad.hpp"
#include "wire.hpp"

using namespace voice;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

struct Check {
  std::ostringstream notes;
  bool ok = true;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes << " [" << what << "]";
    }
  }
};

std::filesystem::path source_path(const std::string& rel) { return std::filesystem::path(VOICE_SOURCE_DIR) / rel; }

double p50(std::vector<double> xs) { return nearest_rank(xs, 0.5); }

// 1 -------------------------------------------------------------------------
void reference_ttfa(Check& c) {
  PipelineBenchConfig cfg;
  cfg.scenario = load_scenario(source_path("scenarios/reference.json"));
  cfg.iterations = 10;
  cfg.warmup = 1;
  const double t0 = now_ms();
  auto r = bench_pipeline(cfg);
  const double wall = now_ms() - t0;
  c.notes << "ttfa p50=" << r.ttfa.p50_ms << " ms over " << r.turns.size() << " turns, wall=" << wall / 1000 << " s";
  c.require(r.turns.size() >= 10, "fewer than 10 measured turns");
  c.require(std::abs(r.ttfa.p50_ms - 755.0) <= 30.0, "p50 outside 755 +/- 30");
  c.require(wall < 60000.0, "runtime over 60 s");
  for (const auto& comp : r.components) {
    if (comp.component == "sentence_detection") c.notes << ", sentence=" << comp.p50_ms;
  }
}

// 2 -------------------------------------------------------------------------
void estimates(Check& c) {
  const double tb = estimate_ttfa({400, 800, 400, 0, 0}, EstimateMode::turn_based);
  const double st = estimate_ttfa({400, 0, 0, 300, 200}, EstimateMode::streaming);
  c.notes << "turn_based=" << tb << " streaming=" << st;
  c.require(tb == 1600.0, "turn_based != 1600");
  c.require(st == 900.0, "streaming != 900");
}

// 3 -------------------------------------------------------------------------
void overlap(Check& c) {
  for (const char* name : {"overlap_clinic_hours", "overlap_slow_model", "overlap_with_tool"}) {
    PipelineBenchConfig cfg;
    cfg.scenario = load_scenario(source_path(std::string("scenarios/") + name + ".json"));
    cfg.iterations = 3;
    cfg.warmup = 1;
    auto r = bench_pipeline(cfg);
    std::vector<double> e2e, turn_based, gen, ttfb;
    for (const auto& row : r.turns) {
      e2e.push_back(row.end_to_end_ms);
      turn_based.push_back(row.turn_based_ms);
      gen.push_back(row.llm_total_ms);
      ttfb.push_back(row.tts_ttfb_ms);
      c.require(row.end_to_end_ms < row.turn_based_ms, std::string(name) + ": a turn was not faster than turn-based");
    }
    c.notes << name << " gen=" << p50(gen) << " ttfb=" << p50(ttfb) << " measured=" << p50(e2e)
            << " turn_based=" << p50(turn_based) << "; ";
    c.require(p50(gen) > 2 * p50(ttfb), std::string(name) + ": precondition gen > 2x ttfb");
    c.require(p50(e2e) < p50(turn_based), std::string(name) + ": p50 not below turn-based sum");
  }
}

// 4 -------------------------------------------------------------------------
std::vector<std::string> segment(const std::vector<std::string>& tokens) {
  SentenceBuffer buf;
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    for (auto& ch : buf.push(t)) out.push_back(ch.text);
  }
  if (auto rest = buf.flush()) out.push_back(rest->text);
  return out;
}

void sentence_buffer(Check& c) {
  using V = std::vector<std::string>;
  c.require(segment({"Hello there.", " How", " are you?"}) == V{"Hello there.", " How are you?"}, "basic split");
  c.require(segment({"Dr", ". Smith is available.", " "}) == V{"Dr. Smith is available.", " "}, "abbreviation");
  c.require(segment({"Pi is 3.14159 exactly.", " Yes"}) == V{"Pi is 3.14159 exactly.", " Yes"}, "decimal");
  c.require(segment({"Hi.", " OK."}) == V{"Hi. OK."}, "short merge");

  const std::string text = testing::corpus_text();
  const auto reference = segment({text});
  std::mt19937 rng(7);
  int trials = 0;
  for (; trials < 1000; ++trials) {
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < text.size();) {
      const std::size_t n = rng() % 7;
      tokens.push_back(text.substr(i, n));
      i += n;
    }
    const auto chunks = segment(tokens);
    if (std::accumulate(chunks.begin(), chunks.end(), std::string()) != text) {
      c.require(false, "lossless");
      break;
    }
    if (chunks != reference) {
      c.require(false, "split independence");
      break;
    }
    for (std::size_t i = 0; i + 1 < chunks.size(); ++i) {
      const auto& ch = chunks[i];
      const auto first = ch.find_first_not_of(" \t\r\n");
      c.require(first != std::string::npos && ch.size() - first >= 10, "min length");
      c.require(std::string(".!?").find(ch.back()) != std::string::npos, "ends at terminator");
      for (const auto& abbr : SentenceBufferConfig{}.abbreviations) {
        c.require(!(ch.size() >= abbr.size() && ch.ends_with(abbr)), "abbreviation " + abbr);
      }
      const char next = chunks[i + 1].empty() ? ' ' : chunks[i + 1][0];
      c.require(!(ch.back() == '.' && ch.size() >= 2 && std::isdigit(static_cast<unsigned char>(ch[ch.size() - 2])) &&
                  std::isdigit(static_cast<unsigned char>(next))),
                "decimal split");
    }
    if (!c.ok) break;
  }
  c.notes << trials << " random tokenizations, " << reference.size() << " sentences";
}

// 5 -------------------------------------------------------------------------
enum class In { speech, silence, started, done };

std::optional<TurnState> apply(VadMachine& m, In in) {
  try {
    switch (in) {
      case In::speech: return m.step(0.9).state;
      case In::silence: return m.step(0.1).state;
      case In::started: return m.step(0, AgentSignal::agent_audio_started).state;
      case In::done: return m.step(0, AgentSignal::agent_done).state;
    }
  } catch (const Error&) {
  }
  return std::nullopt;
}

void vad(Check& c) {
  using S = TurnState;
  VadConfig one;
  one.min_speech_ms = one.frame_ms;
  one.silence_ms_to_end_turn = one.frame_ms;
  const std::map<S, std::vector<In>> path{{S::idle, {}},
                                          {S::listening, {In::speech}},
                                          {S::processing, {In::speech, In::silence}},
                                          {S::speaking, {In::speech, In::silence, In::started}},
                                          {S::interrupted, {In::speech, In::silence, In::started, In::speech}}};
  const std::nullopt_t E = std::nullopt;
  const std::map<S, std::vector<std::optional<S>>> want{
      {S::idle, {S::listening, S::idle, E, E}},
      {S::listening, {S::listening, S::processing, E, E}},
      {S::processing, {S::processing, S::processing, S::speaking, E}},
      {S::speaking, {S::interrupted, S::speaking, E, S::idle}},
      {S::interrupted, {S::listening, S::listening, S::listening, S::listening}}};
  int cells = 0;
  for (const auto& [state, row] : want) {
    for (int i = 0; i < 4; ++i) {
      VadMachine m(one);
      for (auto in : path.at(state)) apply(m, in);
      c.require(m.state() == state, "setup");
      c.require(apply(m, static_cast<In>(i)) == row[i], "cell " + std::string(to_string(state)) + "/" + std::to_string(i));
      ++cells;
    }
  }
  c.notes << cells << " transitions; ";

  for (int frame_ms : {32, 20}) {
    VadConfig cfg;
    cfg.frame_ms = frame_ms;
    cfg.min_speech_ms = frame_ms;
    VadMachine m(cfg);
    m.on_frame(1.0);
    bool early = false;
    int frames = 0;
    while (m.state() == S::listening) {
      const bool fired = m.on_frame(0.0).event.has_value();
      ++frames;
      if (fired && frames * frame_ms < 700) early = true;
      if (!fired && frames * frame_ms >= 700) early = true;
    }
    c.require(!early, "700 ms rule at frame_ms=" + std::to_string(frame_ms));
    c.require((frames - 1) * frame_ms < 700 && frames * frame_ms >= 700, "fires on the first frame reaching 700 ms");
  }

  // Instrumented run: real detector and pipeline, barge-in while speaking.
  nlohmann::json turn{{"user_transcript", "hello"},
                      {"llm_script", {"The clinic opens at eight.", " Doctors see patients until five."}},
                      {"tts_rtf", 1.0}};
  MockSuite mocks(testing::scenario_from({{"schema_version", 1}, {"turns", {turn}}}));
  testing::RecordingSink sink;
  std::atomic<bool> audio_started{false};
  PipelineSession session(testing::pipeline_config_for(mocks), sink, {[&] { audio_started = true; }, nullptr});
  VadMachine m;
  EnergyDetector detector;
  std::vector<S> trace{m.state()};
  auto feed = [&](bool speech, std::optional<AgentSignal> sig = std::nullopt) {
    AudioFrame f = speech ? testing::tone_frame(512, 12000) : testing::silent_frame(512);
    auto step = m.step(detector.speech_probability(f), sig);
    if (step.state != trace.back()) trace.push_back(step.state);
    if (step.event && step.event->kind == TurnEventKind::utterance_ended)
      session.start_turn(testing::final_transcript("hello"));
    if (step.event && step.event->kind == TurnEventKind::interruption) session.interrupt();
  };
  for (int i = 0; i < 5; ++i) feed(true);
  for (int i = 0; i < 25; ++i) feed(false);
  const double deadline = now_ms() + 10000;
  while (!audio_started && now_ms() < deadline) std::this_thread::sleep_for(2ms);
  feed(false, AgentSignal::agent_audio_started);
  std::this_thread::sleep_for(100ms);
  for (int i = 0; i < 5; ++i) feed(true);
  auto result = session.wait();
  std::string path_text;
  for (auto s : trace) path_text += std::string(path_text.empty() ? "" : ">") + std::string(to_string(s));
  c.notes << "trace " << path_text;
  const S barge_in[] = {S::speaking, S::interrupted, S::listening};
  auto it = std::search(trace.begin(), trace.end(), std::begin(barge_in), std::end(barge_in));
  c.require(it != trace.end(), "SPEAKING>INTERRUPTED>LISTENING not observed");
  c.require(result && result->outcome == TurnOutcome::interrupted, "pipeline turn not interrupted");
}

// 6 -------------------------------------------------------------------------
json call(const std::string& name, const json& args) { return {{"tool_call", {{"name", name}, {"arguments", args}}}}; }

struct AgentRun {
  AgentRun(const std::vector<json>& scripts, int depth = 5) : store(seed_store(42)) {
    json turns = json::array();
    for (const auto& s : scripts) turns.push_back({{"user_transcript", "x"}, {"llm_script", s}});
    llm = std::make_unique<MockLlm>(testing::scenario_from({{"schema_version", 1}, {"turns", turns}}));
    tools = std::make_unique<ToolRegistry>(make_hospital_tools(store));
    AgentConfig cfg;
    cfg.llm.base_url = llm->base_url();
    cfg.max_tool_depth = depth;
    agent = std::make_unique<Agent>(cfg, *tools);
  }
  AgentTurn say(const std::string& text) { return agent->handle_utterance(history, text, nullptr); }

  HospitalStore store;
  std::unique_ptr<MockLlm> llm;
  std::unique_ptr<ToolRegistry> tools;
  std::unique_ptr<Agent> agent;
  std::vector<Message> history;
};

void tool_loop(Check& c) {
  const auto base = seed_store(42);
  const std::string patient = "P002";
  const std::string doctor = base.patients.at(patient).primary_doctor;
  std::string date, time;
  for (const auto& [d, slots] : base.doctors.at(doctor).schedule) {
    auto open = base.open_slots(doctor, d);
    if (!open.empty()) {
      date = d;
      time = open.front();
      break;
    }
  }
  const json slot{{"patient_id", patient}, {"doctor", doctor}, {"date", date}, {"time", time}};
  {
    AgentRun run(std::vector<json>{json{call("get_patient_info", {{"patient_id", patient}}), call("schedule_appointment", slot),
                       "You're all set."}});
    auto t = run.say("book me with my doctor");
    c.require(run.store.is_booked(doctor, date, time), "booking missing");
    c.require(history_well_formed(run.history), "history malformed");
    c.require(t.llm_rounds == 3 && !t.depth_exceeded, "chain did not terminate normally");
    c.notes << "chain rounds=" << t.llm_rounds << "; ";
  }
  {
    const std::string id = "A" + std::to_string(base.next_appointment);
    AgentRun run(std::vector<json>{json{call("schedule_appointment", slot), "Booked."},
                  json{call("cancel_appointment", {{"appointment_id", id}}), "Cancelled."}});
    const auto before = run.store.open_slots(doctor, date);
    run.say("book it");
    const bool took = run.store.open_slots(doctor, date).size() + 1 == before.size();
    run.say("cancel it");
    c.require(took, "schedule did not take the slot");
    c.require(run.store.open_slots(doctor, date) == before, "cancel did not restore the slot");
    c.require(history_well_formed(run.history), "history malformed after cancel");
  }
  {
    AgentRun run(std::vector<json>{json{call("get_doctor_info", {{"doctor", "Smith"}})}}, 5);
    auto t = run.say("loop");
    c.require(t.depth_exceeded && t.llm_rounds == 5 && run.llm->stats().requests == 5, "depth bound");
    c.require(history_well_formed(run.history), "history malformed at depth bound");
    c.notes << "always-tools requests=" << run.llm->stats().requests;
  }
}

// 7 -------------------------------------------------------------------------
void golden(Check& c) {
  nlohmann::json turn{{"user_transcript", "Is Dr. Smith available?"},
                      {"stt_partials", {"Is Dr."}},
                      {"stt_final_delay_ms", 20},
                      {"llm_script", {"Yes.", " He", " has", " openings", " today."}},
                      {"tts_rtf", 0.1}};
  MockSuite mocks(testing::scenario_from({{"schema_version", 1}, {"turns", {turn}}}));
  GatewayServer gw(testing::gateway_config_for(mocks));
  gw.start();
  auto ws = net::WsClient::connect(gw.ws_url());
  testing::send_utterance(*ws);
  auto events = testing::receive_turn(*ws);
  std::size_t i = 0;
  while (i < events.size() && !events[i].binary && events[i].control.type == ControlType::transcript &&
         !events[i].control.is_final.value_or(false))
    ++i;
  std::string seq;
  bool ok = i < events.size() && !events[i].binary && events[i].control.type == ControlType::transcript;
  seq += "transcript(final)";
  ok = ok && ++i < events.size() && !events[i].binary && events[i].control.type == ControlType::agent_speaking;
  seq += " agent_speaking";
  std::size_t frames = 0, samples = 0;
  bool even = true;
  while (ok && ++i < events.size() && events[i].binary) {
    ++frames;
    samples += events[i].data.size() / 2;
    even = even && events[i].data.size() % 2 == 0;
  }
  seq += " " + std::to_string(frames) + " frames";
  ok = ok && i == events.size() - 1 && events[i].control.type == ControlType::agent_done;
  seq += " agent_done";
  c.notes << seq << ", " << samples << " samples";
  c.require(ok, "sequence order");
  c.require(frames > 0 && even, "binary frames");
  c.require(samples == 5 * 60 * 24, "audio length at 24 kHz");
}

// 8 -------------------------------------------------------------------------
void cancellation(Check& c) {
  nlohmann::json turn{{"user_transcript", "hello"},
                      {"llm_script",
                       {"The clinic opens at eight.", " Doctors see patients until five.", " Parking is free."}},
                      {"llm_inter_token_ms", 10},
                      {"tts_ttfb_ms", 30},
                      {"tts_rtf", 1.0}};
  MockSuite mocks(testing::scenario_from({{"schema_version", 1}, {"turns", {turn}}}));
  std::size_t worst = 0;
  int trials = 0;
  for (; trials < 20; ++trials) {
    testing::RecordingSink sink;
    PipelineSession session(testing::pipeline_config_for(mocks), sink);
    session.start_turn(testing::final_transcript("hello"));
    const std::size_t wait_frames = 1 + static_cast<std::size_t>(trials);  // the reply is 39 frames
    const double deadline = now_ms() + 10000;
    while (sink.audio_frames() < wait_frames && now_ms() < deadline) std::this_thread::sleep_for(1ms);
    const double t = now_ms();
    const bool cut = session.interrupt();
    auto result = session.wait();
    c.require(cut && result && result->outcome == TurnOutcome::interrupted, "trial " + std::to_string(trials));
    worst = std::max(worst, sink.audio_frames_after(t));
  }
  c.notes << trials << " trials, worst extra frames=" << worst;
  c.require(worst <= 1, "more than one frame after interrupt");
}

// 9 -------------------------------------------------------------------------
bool recomputes(const json& report) {
  auto s = report["samples_ms"].get<std::vector<double>>();
  if (s.empty()) return false;
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  return nearest_rank(s, 0.5) == report["p50_ms"].get<double>() && mean == report["mean_ms"].get<double>() &&
         *std::min_element(s.begin(), s.end()) == report["min_ms"].get<double>() &&
         *std::max_element(s.begin(), s.end()) == report["max_ms"].get<double>() &&
         report["iterations"].get<int>() == static_cast<int>(s.size());
}

void bench_stats(Check& c) {
  PipelineBenchConfig cfg;
  cfg.scenario = load_scenario(source_path("scenarios/reference.json"));
  cfg.scenario.llm.cold_start_ms = 4000;
  cfg.iterations = 3;
  cfg.warmup = 1;
  auto r = bench_pipeline(cfg);
  const auto path = std::filesystem::temp_directory_path() / "voice_acceptance_bench.json";
  write_json_file(path, r.to_json());
  std::ifstream in(path);
  const json j = json::parse(in);
  std::filesystem::remove(path);

  c.require(recomputes(j["ttfa"]), "ttfa stats");
  for (const auto& comp : j["components"]) c.require(recomputes(comp), "component " + comp["component"].get<std::string>());
  const auto warm = j["ttfa"]["warmup_samples_ms"].get<std::vector<double>>();
  const auto measured = j["ttfa"]["samples_ms"].get<std::vector<double>>();
  c.require(warm.size() == 1 && warm[0] >= 4000, "cold start not in the warmup sample");
  c.require(std::all_of(measured.begin(), measured.end(), [](double v) { return v < 4000; }),
            "cold start leaked into measured samples");
  c.notes << "warmup=" << (warm.empty() ? -1 : warm[0]) << " ms excluded, measured p50=" << j["ttfa"]["p50_ms"];
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"reference-ttfa", reference_ttfa},           {"estimate-exact", estimates}, {"overlap-beats-turn-based", overlap},
      {"sentence-buffer", sentence_buffer}, {"vad-state-machine", vad}, {"tool-loop", tool_loop},
      {"wire-golden-sequence", golden},  {"cancellation-bound", cancellation}, {"bench-stats", bench_stats},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.ok = false;
      c.notes << " exception: " << e.what();
    }
    failures += !c.ok;
    std::cout << (c.ok ? "PASS" : "FAIL") << " " << ++n << " " << name << ": " << c.notes.str() << std::endl;
  }
  return failures;
}
