#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace voice {

struct Doctor {
  std::string specialty;
  // date (YYYY-MM-DD) -> slot times (HH:MM), sorted
  std::map<std::string, std::vector<std::string>> schedule;

  friend bool operator==(const Doctor&, const Doctor&) = default;
};

struct Patient {
  std::string name;
  std::string date_of_birth;
  std::string primary_doctor;

  friend bool operator==(const Patient&, const Patient&) = default;
};

enum class AppointmentStatus { booked, cancelled };

struct Appointment {
  std::string patient_id;
  std::string doctor;
  std::string date;
  std::string time;
  AppointmentStatus status = AppointmentStatus::booked;

  friend bool operator==(const Appointment&, const Appointment&) = default;
};

// In-memory receptionist datastore. A doctor's open slots are the schedule
// minus booked appointments, so cancelling frees a slot without touching the
// schedule.
struct HospitalStore {
  std::map<std::string, Doctor> doctors;
  std::map<std::string, Patient> patients;
  std::map<std::string, Appointment> appointments;
  std::uint64_t next_appointment = 1000;

  std::vector<std::string> open_slots(const std::string& doctor, const std::string& date) const;
  bool is_booked(const std::string& doctor, const std::string& date, const std::string& time) const;

  friend bool operator==(const HospitalStore&, const HospitalStore&) = default;
};

// Deterministic fixture: same seed, same store. At least 3 doctors,
// 5 patients and 10 open slots.
HospitalStore seed_store(std::uint64_t seed);

nlohmann::json to_json(const HospitalStore& store);
// Throws load-error on a document that does not match the schema.
HospitalStore store_from_json(const nlohmann::json& j);

}  // namespace voice
