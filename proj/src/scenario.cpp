#include "voice/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "voice/error.hpp"

namespace voice {

using nlohmann::json;

namespace {

[[noreturn]] void fail_at(const std::string& path, const std::string& message) {
  throw Error(Errc::load_error, "scenario " + path + ": " + message, path);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) fail_at(path + "/" + key, "unknown field");
  }
}

double get_delay(const json& obj, const std::string& path, const char* key, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) fail_at(path + "/" + key, "expected a number");
  double v = it->get<double>();
  if (v < 0) fail_at(path + "/" + key, "must be non-negative");
  return v;
}

std::string get_string(const json& obj, const std::string& path, const char* key, std::string fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) fail_at(path + "/" + key, "expected a string");
  return it->get<std::string>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) fail_at(path + "/" + key, "expected a boolean");
  return it->get<bool>();
}

int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) fail_at(path + "/" + key, "expected an integer");
  return it->get<int>();
}

const std::set<std::string> kTurnKeys = {"user_transcript", "stt_partials",    "stt_final_delay_ms",
                                         "llm_ttft_ms",     "llm_inter_token_ms", "llm_script",
                                         "tts_ttfb_ms",     "tts_ms_per_word", "tts_rtf"};

ScriptItem parse_item(const json& item, const std::string& path) {
  if (item.is_string()) return item.get<std::string>();
  if (!item.is_object()) fail_at(path, "expected a text token or a tool_call directive");
  check_keys(item, path, {"tool_call", "parallel"});
  auto it = item.find("tool_call");
  if (it == item.end() || !it->is_object()) fail_at(path + "/tool_call", "expected an object");
  const std::string call_path = path + "/tool_call";
  check_keys(*it, call_path, {"name", "arguments", "id"});
  ToolCallDirective d;
  d.name = get_string(*it, call_path, "name", "");
  if (d.name.empty()) fail_at(call_path + "/name", "required");
  auto args = it->find("arguments");
  if (args == it->end()) {
    d.arguments = "{}";
  } else if (args->is_string()) {
    d.arguments = args->get<std::string>();
  } else if (args->is_object()) {
    d.arguments = args->dump();
  } else {
    fail_at(call_path + "/arguments", "expected an object or a raw string");
  }
  d.id = get_string(*it, call_path, "id", "");
  d.parallel = get_bool(item, path, "parallel", false);
  return d;
}

ScenarioTurn parse_turn(const json& t, const std::string& path) {
  if (!t.is_object()) fail_at(path, "expected an object");
  check_keys(t, path, kTurnKeys);
  ScenarioTurn turn;
  turn.user_transcript = get_string(t, path, "user_transcript", "");
  if (turn.user_transcript.empty()) fail_at(path + "/user_transcript", "required");
  if (auto it = t.find("stt_partials"); it != t.end()) {
    if (!it->is_array()) fail_at(path + "/stt_partials", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_string()) fail_at(path + "/stt_partials/" + std::to_string(i), "expected a string");
      turn.stt_partials.push_back((*it)[i].get<std::string>());
    }
  }
  turn.stt_final_delay_ms = get_delay(t, path, "stt_final_delay_ms", 0.0);
  turn.llm_ttft_ms = get_delay(t, path, "llm_ttft_ms", 0.0);
  turn.llm_inter_token_ms = get_delay(t, path, "llm_inter_token_ms", 0.0);
  turn.tts_ttfb_ms = get_delay(t, path, "tts_ttfb_ms", 0.0);
  turn.tts_ms_per_word = get_delay(t, path, "tts_ms_per_word", 60.0);
  turn.tts_rtf = get_delay(t, path, "tts_rtf", 0.0);

  auto script = t.find("llm_script");
  if (script == t.end() || !script->is_array() || script->empty())
    fail_at(path + "/llm_script", "must be a non-empty array");
  for (std::size_t i = 0; i < script->size(); ++i) {
    turn.llm_script.push_back(parse_item((*script)[i], path + "/llm_script/" + std::to_string(i)));
  }
  if (auto* first = std::get_if<ToolCallDirective>(&turn.llm_script.front()); first && first->parallel)
    fail_at(path + "/llm_script/0/parallel", "first directive cannot be parallel");
  return turn;
}

json item_to_json(const ScriptItem& item) {
  if (auto* s = std::get_if<std::string>(&item)) return *s;
  const auto& d = std::get<ToolCallDirective>(item);
  json call{{"name", d.name}, {"arguments", d.arguments}};
  if (!d.id.empty()) call["id"] = d.id;
  json j{{"tool_call", call}};
  if (d.parallel) j["parallel"] = true;
  return j;
}

}  // namespace

std::string ScenarioTurn::script_text() const {
  std::string out;
  for (const auto& item : llm_script) {
    if (auto* s = std::get_if<std::string>(&item)) out += *s;
  }
  return out;
}

std::vector<ScriptRound> script_rounds(const ScenarioTurn& turn) {
  std::vector<ScriptRound> rounds(1);
  for (const auto& item : turn.llm_script) {
    if (auto* s = std::get_if<std::string>(&item)) {
      if (!rounds.back().tool_calls.empty()) rounds.emplace_back();
      rounds.back().tokens.push_back(*s);
      continue;
    }
    const auto& d = std::get<ToolCallDirective>(item);
    if (!rounds.back().tool_calls.empty() && !d.parallel) rounds.emplace_back();
    rounds.back().tool_calls.push_back(d);
  }
  return rounds;
}

Scenario parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(Errc::load_error,
                "scenario syntax error at line " + std::to_string(line) + ", column " + std::to_string(col),
                e.what());
  }
  if (!root.is_object()) fail_at("/", "expected an object");
  check_keys(root, "", {"schema_version", "name", "defaults", "turns", "stt", "llm", "tts"});

  Scenario sc;
  auto version = root.find("schema_version");
  if (version == root.end()) fail_at("/schema_version", "required");
  if (!version->is_number_integer() || version->get<int>() != kScenarioSchemaVersion)
    fail_at("/schema_version", "unsupported version (expected " + std::to_string(kScenarioSchemaVersion) + ")");
  sc.name = get_string(root, "", "name", "");

  json defaults = json::object();
  if (auto it = root.find("defaults"); it != root.end()) {
    if (!it->is_object()) fail_at("/defaults", "expected an object");
    check_keys(*it, "/defaults", kTurnKeys);
    defaults = *it;
  }
  auto turns = root.find("turns");
  if (turns == root.end() || !turns->is_array() || turns->empty()) fail_at("/turns", "must be a non-empty array");
  for (std::size_t i = 0; i < turns->size(); ++i) {
    const std::string path = "/turns/" + std::to_string(i);
    json merged = defaults;
    if (!(*turns)[i].is_object()) fail_at(path, "expected an object");
    for (const auto& [k, v] : (*turns)[i].items()) merged[k] = v;
    sc.turns.push_back(parse_turn(merged, path));
  }

  if (auto it = root.find("stt"); it != root.end()) {
    if (!it->is_object()) fail_at("/stt", "expected an object");
    check_keys(*it, "/stt", {"partial_every_frames", "required_token", "cold_start_ms", "omit_is_final"});
    sc.stt.partial_every_frames = get_int(*it, "/stt", "partial_every_frames", sc.stt.partial_every_frames);
    if (sc.stt.partial_every_frames < 1) fail_at("/stt/partial_every_frames", "must be >= 1");
    if (it->contains("required_token")) sc.stt.required_token = get_string(*it, "/stt", "required_token", "");
    sc.stt.cold_start_ms = get_delay(*it, "/stt", "cold_start_ms", 0.0);
    sc.stt.omit_is_final = get_bool(*it, "/stt", "omit_is_final", false);
  }
  if (auto it = root.find("llm"); it != root.end()) {
    if (!it->is_object()) fail_at("/llm", "expected an object");
    check_keys(*it, "/llm",
               {"model", "cold_start_ms", "inject_empty_choices_chunk", "fail_status", "truncate_after_chunks",
                "required_api_key"});
    sc.llm.model = get_string(*it, "/llm", "model", sc.llm.model);
    sc.llm.cold_start_ms = get_delay(*it, "/llm", "cold_start_ms", 0.0);
    sc.llm.inject_empty_choices_chunk = get_bool(*it, "/llm", "inject_empty_choices_chunk", false);
    sc.llm.fail_status = get_int(*it, "/llm", "fail_status", 0);
    sc.llm.truncate_after_chunks = get_int(*it, "/llm", "truncate_after_chunks", -1);
    if (it->contains("required_api_key")) sc.llm.required_api_key = get_string(*it, "/llm", "required_api_key", "");
  }
  if (auto it = root.find("tts"); it != root.end()) {
    if (!it->is_object()) fail_at("/tts", "expected an object");
    check_keys(*it, "/tts", {"cold_start_ms", "fail_status", "drop_after_chunks", "chunk_ms", "tone_hz"});
    sc.tts.cold_start_ms = get_delay(*it, "/tts", "cold_start_ms", 0.0);
    sc.tts.fail_status = get_int(*it, "/tts", "fail_status", 0);
    sc.tts.drop_after_chunks = get_int(*it, "/tts", "drop_after_chunks", -1);
    sc.tts.chunk_ms = get_delay(*it, "/tts", "chunk_ms", 20.0);
    if (sc.tts.chunk_ms <= 0) fail_at("/tts/chunk_ms", "must be > 0");
    sc.tts.tone_hz = get_delay(*it, "/tts", "tone_hz", 440.0);
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::load_error, "cannot open scenario file", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const Error& e) {
    throw Error(Errc::load_error, path.string() + ": " + e.what(), e.detail());
  }
}

json to_json(const Scenario& sc) {
  json turns = json::array();
  for (const auto& t : sc.turns) {
    json script = json::array();
    for (const auto& item : t.llm_script) script.push_back(item_to_json(item));
    turns.push_back({{"user_transcript", t.user_transcript},
                     {"stt_partials", t.stt_partials},
                     {"stt_final_delay_ms", t.stt_final_delay_ms},
                     {"llm_ttft_ms", t.llm_ttft_ms},
                     {"llm_inter_token_ms", t.llm_inter_token_ms},
                     {"llm_script", script},
                     {"tts_ttfb_ms", t.tts_ttfb_ms},
                     {"tts_ms_per_word", t.tts_ms_per_word},
                     {"tts_rtf", t.tts_rtf}});
  }
  json stt{{"partial_every_frames", sc.stt.partial_every_frames},
           {"cold_start_ms", sc.stt.cold_start_ms},
           {"omit_is_final", sc.stt.omit_is_final}};
  if (sc.stt.required_token) stt["required_token"] = *sc.stt.required_token;
  json llm{{"model", sc.llm.model},
           {"cold_start_ms", sc.llm.cold_start_ms},
           {"inject_empty_choices_chunk", sc.llm.inject_empty_choices_chunk},
           {"fail_status", sc.llm.fail_status},
           {"truncate_after_chunks", sc.llm.truncate_after_chunks}};
  if (sc.llm.required_api_key) llm["required_api_key"] = *sc.llm.required_api_key;
  json tts{{"cold_start_ms", sc.tts.cold_start_ms},
           {"fail_status", sc.tts.fail_status},
           {"drop_after_chunks", sc.tts.drop_after_chunks},
           {"chunk_ms", sc.tts.chunk_ms},
           {"tone_hz", sc.tts.tone_hz}};
  json j{{"schema_version", sc.schema_version}, {"turns", turns}, {"stt", stt}, {"llm", llm}, {"tts", tts}};
  if (!sc.name.empty()) j["name"] = sc.name;
  return j;
}

}  // namespace voice
