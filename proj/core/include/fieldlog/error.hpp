#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fieldlog {

enum class ErrorCode {
  // registry
  duplicate_id,
  duplicate_beacon,
  missing_work_type,
  invalid_polygon,
  overlapping_fields,
  invalid_params,
  unknown_reference,
  // ingest
  checksum_mismatch,
  malformed_field,
  void_fix,
  unsupported_sentence_type,
  schema_violation,
  rssi_out_of_range,
  coordinate_out_of_range,
  speed_out_of_range,
  line_too_long,
  unknown_machine,
  // geometry
  too_few_fixes,
  // simulator
  field_not_rectangular,
  schedule_overlap,
  // service
  payload_too_large,
  not_found,
  // generic
  io_error,
  invalid_argument,
};

/// Stable snake_case name used in API responses and reject reasons.
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace fieldlog
