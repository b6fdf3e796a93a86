#pragma once

#include <chrono>
#include <thread>

namespace voice {

using SteadyClock = std::chrono::steady_clock;

// Milliseconds on the process-wide steady clock. Every timestamp in the
// library (frame capture, transcript arrival, timelines) uses this base so
// values from different threads and components are directly comparable.
inline double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(SteadyClock::now().time_since_epoch())
      .count();
}

inline SteadyClock::time_point to_time_point(double ms) {
  using namespace std::chrono;
  return SteadyClock::time_point(
      duration_cast<SteadyClock::duration>(duration<double, std::milli>(ms)));
}

inline void sleep_until_ms(double ms) {
  std::this_thread::sleep_until(to_time_point(ms));
}

inline void sleep_for_ms(double ms) {
  if (ms > 0) sleep_until_ms(now_ms() + ms);
}

}  // namespace voice
