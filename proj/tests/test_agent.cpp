#include <doctest.h>

#include "support.hpp"
#include "voice/agent.hpp"
#include "voice/error.hpp"
#include "voice/hospital.hpp"

using namespace voice;
using nlohmann::json;

namespace {

json tool_call(const std::string& name, const json& args) {
  return {{"tool_call", {{"name", name}, {"arguments", args}}}};
}

voice::Scenario llm_scenario(std::vector<json> turns) {
  json ts = json::array();
  for (auto& script : turns) ts.push_back({{"user_transcript", "x"}, {"llm_script", script}});
  return testing::scenario_from({{"schema_version", 1}, {"turns", ts}});
}

struct Harness {
  explicit Harness(const voice::Scenario& sc, int depth = 5) : llm(sc), store(seed_store(42)) {
    tools = std::make_unique<ToolRegistry>(make_hospital_tools(store));
    AgentConfig c;
    c.llm.base_url = llm.base_url();
    c.max_tool_depth = depth;
    agent = std::make_unique<Agent>(c, *tools);
  }
  AgentTurn say(const std::string& text) {
    return agent->handle_utterance(history, text, [this](std::string_view t, double) { streamed += t; });
  }

  MockLlm llm;
  HospitalStore store;
  std::unique_ptr<ToolRegistry> tools;
  std::unique_ptr<Agent> agent;
  std::vector<Message> history;
  std::string streamed;
};

// First (doctor, date, time) that is open for the patient's primary doctor.
std::tuple<std::string, std::string, std::string> open_slot(const HospitalStore& s, const std::string& patient) {
  const auto& doctor = s.patients.at(patient).primary_doctor;
  for (const auto& [date, slots] : s.doctors.at(doctor).schedule) {
    auto open = s.open_slots(doctor, date);
    if (!open.empty()) return {doctor, date, open.front()};
  }
  FAIL("no open slot");
  return {};
}

}  // namespace

TEST_CASE("direct answer") {
  Harness h(llm_scenario({json{"Hello", " there."}}));
  auto turn = h.say("hi");
  CHECK(turn.text == "Hello there.");
  CHECK(h.streamed == "Hello there.");
  CHECK(turn.llm_rounds == 1);
  REQUIRE(h.history.size() == 2);
  CHECK(h.history[0].role == Role::user);
  CHECK(h.history[1].role == Role::assistant);
  CHECK(h.history[1].content == "Hello there.");
  auto body = h.llm.stats().request_bodies.at(0);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["tools"].size() == 5);
}

TEST_CASE("one tool round") {
  const auto store = seed_store(42);
  const auto& [doctor, doc] = *store.doctors.begin();
  const std::string date = doc.schedule.begin()->first;
  Harness h(llm_scenario({json{tool_call("check_availability", {{"doctor", doctor}, {"date", date}}), "Yes,",
                               " there are openings."}}));
  auto turn = h.say("Is the doctor free?");
  CHECK(turn.llm_rounds == 2);
  CHECK(turn.text == "Yes, there are openings.");
  REQUIRE(h.history.size() == 4);
  CHECK(h.history[1].tool_calls.size() == 1);
  CHECK(h.history[2].role == Role::tool);
  CHECK(h.history[2].tool_call_id == h.history[1].tool_calls[0].id);
  CHECK(json::parse(*h.history[2].content)["slots"] == json(store.open_slots(doctor, date)));
  CHECK(history_well_formed(h.history));
  auto second = h.llm.stats().request_bodies.at(1);
  CHECK(second["messages"].back()["role"] == "tool");
}

TEST_CASE("patient lookup then booking") {
  const auto store = seed_store(42);
  const std::string patient = "P002";
  const auto [doctor, date, time] = open_slot(store, patient);
  Harness h(llm_scenario(
      {json{tool_call("get_patient_info", {{"patient_id", patient}}),
            tool_call("schedule_appointment", {{"patient_id", patient}, {"doctor", doctor}, {"date", date}, {"time", time}}),
            "You're booked."}}));
  REQUIRE_FALSE(h.store.is_booked(doctor, date, time));
  auto turn = h.say("Book me with my doctor");
  CHECK(turn.llm_rounds == 3);
  CHECK_FALSE(turn.depth_exceeded);
  CHECK(turn.text == "You're booked.");
  CHECK(h.store.is_booked(doctor, date, time));
  CHECK(history_well_formed(h.history));
  CHECK(h.history.back().role == Role::assistant);
  CHECK(h.history.back().tool_calls.empty());
}

TEST_CASE("schedule then cancel restores availability") {
  const auto store = seed_store(42);
  const auto [doctor, date, time] = open_slot(store, "P001");
  const auto before = store.open_slots(doctor, date);
  const std::string next_id = "A" + std::to_string(store.next_appointment);
  Harness h(llm_scenario(
      {json{tool_call("schedule_appointment", {{"patient_id", "P001"}, {"doctor", doctor}, {"date", date}, {"time", time}}),
            "Booked."},
       json{tool_call("cancel_appointment", {{"appointment_id", next_id}}), "Cancelled."}}));
  h.say("book it");
  CHECK(h.store.open_slots(doctor, date).size() == before.size() - 1);
  auto turn = h.say("actually cancel");
  CHECK(turn.text == "Cancelled.");
  CHECK(h.store.open_slots(doctor, date) == before);
  CHECK(history_well_formed(h.history));
}

TEST_CASE("parallel tool calls answer every id") {
  Harness h(llm_scenario({json{tool_call("get_doctor_info", {{"doctor", "Smith"}}),
                               {{"tool_call", {{"name", "get_doctor_info"}, {"arguments", {{"doctor", "Patel"}}}}},
                                {"parallel", true}},
                               "Both found."}}));
  auto turn = h.say("who are they");
  CHECK(turn.llm_rounds == 2);
  CHECK(turn.tool_calls.size() == 2);
  CHECK(history_well_formed(h.history));
}

TEST_CASE("unknown tools and bad arguments are reported to the model") {
  Harness h(llm_scenario({json{{{"tool_call", {{"name", "teleport"}, {"arguments", "{}"}}}},
                               {{"tool_call", {{"name", "check_availability"}, {"arguments", "{oops"}}}},
                               "Sorry."}}));
  auto turn = h.say("do it");
  CHECK(turn.text == "Sorry.");
  CHECK(json::parse(*h.history[2].content).contains("error"));
  CHECK(json::parse(*h.history[4].content).contains("error"));
  CHECK(history_well_formed(h.history));
}

TEST_CASE("depth bound against a model that always calls tools") {
  Harness h(llm_scenario({json{tool_call("get_doctor_info", {{"doctor", "Smith"}})}}), 5);
  auto turn = h.say("loop forever");
  CHECK(turn.depth_exceeded);
  CHECK(turn.llm_rounds == 5);
  CHECK(h.llm.stats().requests == 5);
  CHECK(turn.diagnostic.find("depth-exceeded") != std::string::npos);
  CHECK(h.history.back().role == Role::assistant);
  CHECK(h.history.back().content == h.agent->config().depth_fallback_text);
  CHECK(h.streamed == h.agent->config().depth_fallback_text);
  CHECK(history_well_formed(h.history));
}

TEST_CASE("history well-formedness") {
  std::vector<Message> ok{Message::user("a"), Message::assistant(std::nullopt, {ToolCall{"1", "f", "{}"}}),
                          Message::tool("1", "{}"), Message::assistant("done")};
  CHECK(history_well_formed(ok));
  std::vector<Message> missing{Message::user("a"), Message::assistant(std::nullopt, {ToolCall{"1", "f", "{}"}}),
                               Message::assistant("done")};
  CHECK_FALSE(history_well_formed(missing));
  std::vector<Message> stray{Message::user("a"), Message::tool("9", "{}")};
  CHECK_FALSE(history_well_formed(stray));
}

TEST_CASE("config validation") {
  AgentConfig c;
  c.max_tool_depth = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  MockLlm llm(testing::quick_scenario());
  HospitalStore store = seed_store(1);
  auto tools = make_hospital_tools(store);
  AgentConfig ok;
  ok.llm.base_url = llm.base_url();
  Agent agent(ok, tools);
  std::vector<Message> history;
  CHECK_THROWS_AS(agent.handle_utterance(history, "", nullptr), Error);
}
