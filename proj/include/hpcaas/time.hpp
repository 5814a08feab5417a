#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>

namespace hpcaas {

using TimePoint = std::chrono::system_clock::time_point;

// Injectable wall clock; tests substitute a manually advanced one.
using Clock = std::function<TimePoint()>;

inline Clock system_clock() {
  return [] { return std::chrono::system_clock::now(); };
}

// Millisecond-precision UTC timestamps, e.g. "2024-03-01T12:00:00.250Z".
std::string format_utc(TimePoint t);
TimePoint parse_utc(const std::string& text);

inline std::int64_t to_unix_ms(TimePoint t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

inline TimePoint from_unix_ms(std::int64_t ms) {
  return TimePoint(std::chrono::milliseconds(ms));
}

}  // namespace hpcaas
