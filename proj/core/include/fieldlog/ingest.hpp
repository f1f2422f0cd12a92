#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fieldlog/model.hpp"

namespace fieldlog::ingest {

inline constexpr std::size_t kMaxLineBytes = 4096;
inline constexpr double kKnotsToMps = 0.514444;

struct RawLine {
  std::string source_machine_id;
  std::string payload;  // one line, no trailing newline
};

/// XOR of every byte between '$' and '*'.
std::uint8_t nmea_checksum(std::string_view payload) noexcept;

/// Parses one RMC sentence (any talker id). The returned fix has an empty
/// machine_id. Trailing CR/LF is tolerated.
///
/// Throws Error with checksum_mismatch, malformed_field, void_fix,
/// unsupported_sentence_type or speed_out_of_range.
Fix parse_nmea_rmc(std::string_view sentence);

struct NmeaStreamResult {
  std::vector<Fix> fixes;
  std::size_t skipped = 0;                       // non-RMC sentences
  std::map<std::string, std::size_t> rejected;  // reason -> count
};

/// Splits CRLF/LF text into sentences and parses RMC ones for one machine.
NmeaStreamResult parse_nmea_stream(std::string_view machine_id, std::string_view text);

/// Parses one gateway wire-format line (line-delimited JSON, v = 1).
/// Duplicate beacon UIDs collapse to the strongest RSSI. Throws Error with
/// schema_violation, rssi_out_of_range, coordinate_out_of_range,
/// speed_out_of_range or line_too_long.
GatewayReport parse_gateway_report(std::string_view line);

/// Canonical single-line encoding; parse(serialize(r)) == r.
std::string serialize_gateway_report(const GatewayReport& report);

struct DropCounters {
  std::size_t non_monotone = 0;
  std::size_t hdop = 0;
  std::size_t implied_speed = 0;

  [[nodiscard]] std::size_t total() const noexcept { return non_monotone + hdop + implied_speed; }
  DropCounters& operator+=(const DropCounters& o) {
    non_monotone += o.non_monotone;
    hdop += o.hdop;
    implied_speed += o.implied_speed;
    return *this;
  }
  friend bool operator==(const DropCounters&, const DropCounters&) = default;
};

/// Per-machine stateful filter. One instance per stream; not thread safe.
class StreamValidator {
 public:
  static constexpr double kMaxHdop = 5.0;

  /// Returns true when the fix is kept.
  bool accept(const Fix& fix);

  [[nodiscard]] const DropCounters& drops() const noexcept { return drops_; }

 private:
  std::optional<Fix> last_;
  DropCounters drops_;
};

/// Drops non-monotone timestamps, hdop > 5 and implied speed > 30 m/s.
std::vector<Fix> validate_stream(std::span<const Fix> fixes, DropCounters* drops = nullptr);

}  // namespace fieldlog::ingest
