#include "hpcaas/time.hpp"

#include <cstdio>
#include <ctime>

#include "hpcaas/error.hpp"

namespace hpcaas {

std::string format_utc(TimePoint t) {
  const auto ms = to_unix_ms(t);
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  int frac = static_cast<int>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    secs -= 1;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
  return buf;
}

TimePoint parse_utc(const std::string& text) {
  std::tm tm{};
  int ms = 0;
  int consumed = 0;
  const int fields = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ%n", &tm.tm_year,
                                 &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec,
                                 &ms, &consumed);
  if (fields != 7 || static_cast<std::size_t>(consumed) != text.size()) {
    fail(ErrorCode::Integrity, "malformed timestamp '" + text + "'");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::time_t secs = timegm(&tm);
  return from_unix_ms(static_cast<std::int64_t>(secs) * 1000 + ms);
}

}  // namespace hpcaas
