#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fieldlog {

/// UTC instant with millisecond resolution.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Millis = std::chrono::milliseconds;

/// Parses RFC 3339 UTC ("2024-04-01T02:15:30Z", optional fraction, "Z" or
/// "+00:00"). Returns nullopt on anything else.
std::optional<Timestamp> parse_rfc3339(std::string_view text);

/// Canonical form: "YYYY-MM-DDTHH:MM:SSZ", with ".mmm" only when the
/// millisecond part is non-zero.
std::string format_rfc3339(Timestamp t);

/// Calendar date (UTC) as days since epoch.
std::chrono::sys_days utc_day(Timestamp t);

/// ISO 8601 calendar date "YYYY-MM-DD".
std::string format_date(std::chrono::sys_days d);
std::optional<std::chrono::sys_days> parse_date(std::string_view text);

inline double seconds_between(Timestamp from, Timestamp to) {
  return std::chrono::duration<double>(to - from).count();
}

inline Timestamp from_unix_ms(std::int64_t ms) { return Timestamp{Millis{ms}}; }
inline std::int64_t to_unix_ms(Timestamp t) { return t.time_since_epoch().count(); }

}  // namespace fieldlog
