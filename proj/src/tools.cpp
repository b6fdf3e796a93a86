#include "voice/agent.hpp"

#include <regex>

#include "voice/error.hpp"

namespace voice {

using nlohmann::json;

void ToolRegistry::add(ToolSpec spec) {
  if (find(spec.name)) throw Error(Errc::invalid_argument, "duplicate tool '" + spec.name + "'");
  specs_.push_back(std::move(spec));
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
  for (const auto& s : specs_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

json ToolRegistry::openai_tools() const {
  json tools = json::array();
  for (const auto& s : specs_) {
    tools.push_back({{"type", "function"},
                     {"function", {{"name", s.name}, {"description", s.description}, {"parameters", s.parameters}}}});
  }
  return tools;
}

std::string validate_arguments(const json& schema, const json& args) {
  if (!args.is_object()) return "arguments must be a JSON object";
  if (auto req = schema.find("required"); req != schema.end()) {
    for (const auto& name : *req) {
      if (!args.contains(name.get<std::string>())) {
        return "missing required field '" + name.get<std::string>() + "'";
      }
    }
  }
  const auto props = schema.find("properties");
  if (props == schema.end()) return {};
  for (const auto& [key, value] : args.items()) {
    auto prop = props->find(key);
    if (prop == props->end()) continue;
    const std::string type = prop->value("type", "");
    const bool ok = (type == "string" && value.is_string()) ||
                    (type == "integer" && value.is_number_integer()) ||
                    (type == "number" && value.is_number()) || (type == "boolean" && value.is_boolean()) ||
                    type.empty();
    if (!ok) return "field '" + key + "' must be of type " + type;
    if (type == "string" && prop->contains("pattern")) {
      const std::regex re((*prop)["pattern"].get<std::string>());
      if (!std::regex_match(value.get<std::string>(), re)) {
        return "field '" + key + "' does not match " + (*prop)["pattern"].get<std::string>();
      }
    }
  }
  return {};
}

json execute_tool(const ToolRegistry& registry, const ToolCall& call) {
  const ToolSpec* spec = registry.find(call.name);
  if (!spec) return {{"error", "unknown tool: " + call.name}};
  json args;
  try {
    args = json::parse(call.arguments_json.empty() ? "{}" : call.arguments_json);
  } catch (const json::parse_error&) {
    return {{"error", "validation error: arguments are not valid JSON"}};
  }
  if (auto problem = validate_arguments(spec->parameters, args); !problem.empty()) {
    return {{"error", "validation error: " + problem}};
  }
  return spec->handler(args);
}

namespace {

const char* const kDatePattern = R"(\d{4}-\d{2}-\d{2})";
const char* const kTimePattern = R"(([01]\d|2[0-3]):[0-5]\d)";

json string_prop(const std::string& description, const char* pattern = nullptr) {
  json p{{"type", "string"}, {"description", description}};
  if (pattern) p["pattern"] = pattern;
  return p;
}

json object_schema(json properties, std::vector<std::string> required) {
  return {{"type", "object"}, {"properties", std::move(properties)}, {"required", std::move(required)}};
}

json not_found(const std::string& what) { return {{"error", "not found"}, {"detail", what}}; }

json appointment_json(const std::string& id, const Appointment& a) {
  return {{"appointment_id", id},
          {"patient_id", a.patient_id},
          {"doctor", a.doctor},
          {"date", a.date},
          {"time", a.time},
          {"status", a.status == AppointmentStatus::booked ? "booked" : "cancelled"}};
}

}  // namespace

ToolRegistry make_hospital_tools(HospitalStore& store) {
  ToolRegistry reg;
  HospitalStore* s = &store;

  reg.add({"check_availability", "List a doctor's open appointment slots on a date.",
           object_schema({{"doctor", string_prop("Doctor's last name, e.g. Smith")},
                          {"date", string_prop("Date as YYYY-MM-DD", kDatePattern)}},
                         {"doctor", "date"}),
           [s](const json& a) -> json {
             const auto doctor = a["doctor"].get<std::string>();
             const auto date = a["date"].get<std::string>();
             if (!s->doctors.contains(doctor)) return not_found("doctor " + doctor);
             return {{"doctor", doctor}, {"date", date}, {"slots", s->open_slots(doctor, date)}};
           }});

  reg.add({"schedule_appointment", "Book an open slot for a patient.",
           object_schema({{"patient_id", string_prop("Patient id, e.g. P001")},
                          {"doctor", string_prop("Doctor's last name")},
                          {"date", string_prop("Date as YYYY-MM-DD", kDatePattern)},
                          {"time", string_prop("Time as HH:MM", kTimePattern)}},
                         {"patient_id", "doctor", "date", "time"}),
           [s](const json& a) -> json {
             const auto patient = a["patient_id"].get<std::string>();
             const auto doctor = a["doctor"].get<std::string>();
             const auto date = a["date"].get<std::string>();
             const auto time = a["time"].get<std::string>();
             if (!s->patients.contains(patient)) return not_found("patient " + patient);
             if (!s->doctors.contains(doctor)) return not_found("doctor " + doctor);
             const auto open = s->open_slots(doctor, date);
             if (std::find(open.begin(), open.end(), time) == open.end()) {
               return {{"error", "slot unavailable"}};
             }
             const std::string id = "A" + std::to_string(s->next_appointment++);
             const Appointment appt{patient, doctor, date, time, AppointmentStatus::booked};
             s->appointments.emplace(id, appt);
             return appointment_json(id, appt);
           }});

  reg.add({"cancel_appointment", "Cancel a booked appointment by id.",
           object_schema({{"appointment_id", string_prop("Appointment id, e.g. A1001")}}, {"appointment_id"}),
           [s](const json& a) -> json {
             const auto id = a["appointment_id"].get<std::string>();
             auto it = s->appointments.find(id);
             if (it == s->appointments.end()) return {{"error", "not found"}};
             if (it->second.status == AppointmentStatus::cancelled) return {{"error", "already cancelled"}};
             it->second.status = AppointmentStatus::cancelled;
             return appointment_json(id, it->second);
           }});

  reg.add({"get_patient_info", "Look up a patient record and their appointments.",
           object_schema({{"patient_id", string_prop("Patient id, e.g. P001")}}, {"patient_id"}),
           [s](const json& a) -> json {
             const auto id = a["patient_id"].get<std::string>();
             auto it = s->patients.find(id);
             if (it == s->patients.end()) return not_found("patient " + id);
             json appts = json::array();
             for (const auto& [aid, appt] : s->appointments) {
               if (appt.patient_id == id) appts.push_back(appointment_json(aid, appt));
             }
             return {{"patient_id", id},
                     {"name", it->second.name},
                     {"date_of_birth", it->second.date_of_birth},
                     {"primary_doctor", it->second.primary_doctor},
                     {"appointments", std::move(appts)}};
           }});

  reg.add({"get_doctor_info", "Describe a doctor's specialty and working days.",
           object_schema({{"doctor", string_prop("Doctor's last name")}}, {"doctor"}),
           [s](const json& a) -> json {
             const auto name = a["doctor"].get<std::string>();
             auto it = s->doctors.find(name);
             if (it == s->doctors.end()) return not_found("doctor " + name);
             json days = json::array();
             for (const auto& [date, slots] : it->second.schedule) days.push_back(date);
             return {{"doctor", name}, {"specialty", it->second.specialty}, {"working_days", std::move(days)}};
           }});
  return reg;
}

}  // namespace voice
