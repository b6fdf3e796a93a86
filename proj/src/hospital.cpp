#include "voice/hospital.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include "voice/error.hpp"

namespace voice {

using nlohmann::json;

std::vector<std::string> HospitalStore::open_slots(const std::string& doctor, const std::string& date) const {
  std::vector<std::string> out;
  auto d = doctors.find(doctor);
  if (d == doctors.end()) return out;
  auto day = d->second.schedule.find(date);
  if (day == d->second.schedule.end()) return out;
  for (const auto& time : day->second) {
    if (!is_booked(doctor, date, time)) out.push_back(time);
  }
  return out;
}

bool HospitalStore::is_booked(const std::string& doctor, const std::string& date,
                              const std::string& time) const {
  return std::any_of(appointments.begin(), appointments.end(), [&](const auto& kv) {
    const Appointment& a = kv.second;
    return a.status == AppointmentStatus::booked && a.doctor == doctor && a.date == date && a.time == time;
  });
}

HospitalStore seed_store(std::uint64_t seed) {
  // Raw mt19937_64 output is fully specified by the standard; the
  // std::*_distribution adaptors are not, so draws use plain modulo.
  std::mt19937_64 rng(seed);
  auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  static constexpr std::array<std::pair<const char*, const char*>, 4> kDoctors{{
      {"Smith", "Family Medicine"},
      {"Johnson", "Cardiology"},
      {"Patel", "Pediatrics"},
      {"Garcia", "Dermatology"},
  }};
  static constexpr std::array<const char*, 5> kDates{"2025-03-10", "2025-03-11", "2025-03-12", "2025-03-13",
                                                     "2025-03-14"};
  static constexpr std::array<const char*, 14> kTimes{"09:00", "09:30", "10:00", "10:30", "11:00",
                                                      "11:30", "13:00", "13:30", "14:00", "14:30",
                                                      "15:00", "15:30", "16:00", "16:30"};
  static constexpr std::array<const char*, 8> kFirst{"Alice", "Ben", "Carla", "David",
                                                     "Elena", "Farid", "Grace", "Hiro"};
  static constexpr std::array<const char*, 8> kLast{"Nguyen", "Okafor", "Rossi", "Kim",
                                                    "Schmidt", "Haddad", "Lopez", "Tanaka"};

  HospitalStore store;
  for (const auto& [name, specialty] : kDoctors) {
    Doctor doc;
    doc.specialty = specialty;
    for (const char* date : kDates) {
      std::vector<std::string> slots;
      const std::size_t n = 2 + pick(3);  // 2..4 slots per day
      while (slots.size() < n) {
        std::string t = kTimes[pick(kTimes.size())];
        if (std::find(slots.begin(), slots.end(), t) == slots.end()) slots.push_back(std::move(t));
      }
      std::sort(slots.begin(), slots.end());
      doc.schedule.emplace(date, std::move(slots));
    }
    store.doctors.emplace(name, std::move(doc));
  }

  for (int i = 1; i <= 5; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "P%03d", i);
    char dob[11];
    std::snprintf(dob, sizeof dob, "%04d-%02d-%02d", 1950 + static_cast<int>(pick(50)),
                  1 + static_cast<int>(pick(12)), 1 + static_cast<int>(pick(28)));
    Patient p;
    p.name = std::string(kFirst[pick(kFirst.size())]) + " " + kLast[pick(kLast.size())];
    p.date_of_birth = dob;
    p.primary_doctor = kDoctors[pick(kDoctors.size())].first;
    store.patients.emplace(id, std::move(p));
  }

  // One existing booking so availability is exercised from the start.
  const auto& [first_patient, patient] = *store.patients.begin();
  const auto& sched = store.doctors.at(patient.primary_doctor).schedule;
  const auto& [date, slots] = *sched.rbegin();
  store.appointments.emplace("A" + std::to_string(store.next_appointment++),
                             Appointment{first_patient, patient.primary_doctor, date, slots.front(),
                                         AppointmentStatus::booked});
  return store;
}

json to_json(const HospitalStore& store) {
  json doctors = json::object();
  for (const auto& [name, d] : store.doctors) {
    doctors[name] = {{"specialty", d.specialty}, {"schedule", d.schedule}};
  }
  json patients = json::object();
  for (const auto& [id, p] : store.patients) {
    patients[id] = {{"name", p.name}, {"date_of_birth", p.date_of_birth}, {"primary_doctor", p.primary_doctor}};
  }
  json appts = json::object();
  for (const auto& [id, a] : store.appointments) {
    appts[id] = {{"patient_id", a.patient_id},
                 {"doctor", a.doctor},
                 {"date", a.date},
                 {"time", a.time},
                 {"status", a.status == AppointmentStatus::booked ? "booked" : "cancelled"}};
  }
  return {{"schema_version", 1},
          {"doctors", std::move(doctors)},
          {"patients", std::move(patients)},
          {"appointments", std::move(appts)},
          {"next_appointment", store.next_appointment}};
}

HospitalStore store_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != 1) throw Error(Errc::load_error, "unsupported store schema_version");
    HospitalStore store;
    for (const auto& [name, d] : j.at("doctors").items()) {
      Doctor doc;
      doc.specialty = d.at("specialty").get<std::string>();
      doc.schedule = d.at("schedule").get<std::map<std::string, std::vector<std::string>>>();
      store.doctors.emplace(name, std::move(doc));
    }
    for (const auto& [id, p] : j.at("patients").items()) {
      store.patients.emplace(id, Patient{p.at("name").get<std::string>(), p.at("date_of_birth").get<std::string>(),
                                         p.at("primary_doctor").get<std::string>()});
    }
    for (const auto& [id, a] : j.at("appointments").items()) {
      const auto status = a.at("status").get<std::string>();
      if (status != "booked" && status != "cancelled") throw Error(Errc::load_error, "bad status for " + id);
      store.appointments.emplace(
          id, Appointment{a.at("patient_id").get<std::string>(), a.at("doctor").get<std::string>(),
                          a.at("date").get<std::string>(), a.at("time").get<std::string>(),
                          status == "booked" ? AppointmentStatus::booked : AppointmentStatus::cancelled});
    }
    store.next_appointment = j.at("next_appointment").get<std::uint64_t>();
    return store;
  } catch (const json::exception& e) {
    throw Error(Errc::load_error, std::string("hospital store: ") + e.what());
  }
}

}  // namespace voice
