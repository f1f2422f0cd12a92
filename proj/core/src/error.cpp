#include "fieldlog/error.hpp"

namespace fieldlog {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::duplicate_beacon: return "duplicate_beacon";
    case ErrorCode::missing_work_type: return "missing_work_type";
    case ErrorCode::invalid_polygon: return "invalid_polygon";
    case ErrorCode::overlapping_fields: return "overlapping_fields";
    case ErrorCode::invalid_params: return "invalid_params";
    case ErrorCode::unknown_reference: return "unknown_reference";
    case ErrorCode::checksum_mismatch: return "checksum_mismatch";
    case ErrorCode::malformed_field: return "malformed_field";
    case ErrorCode::void_fix: return "void_fix";
    case ErrorCode::unsupported_sentence_type: return "unsupported_sentence_type";
    case ErrorCode::schema_violation: return "schema_violation";
    case ErrorCode::rssi_out_of_range: return "rssi_out_of_range";
    case ErrorCode::coordinate_out_of_range: return "coordinate_out_of_range";
    case ErrorCode::speed_out_of_range: return "speed_out_of_range";
    case ErrorCode::line_too_long: return "line_too_long";
    case ErrorCode::unknown_machine: return "unknown_machine";
    case ErrorCode::too_few_fixes: return "too_few_fixes";
    case ErrorCode::field_not_rectangular: return "field_not_rectangular";
    case ErrorCode::schedule_overlap: return "schedule_overlap";
    case ErrorCode::payload_too_large: return "payload_too_large";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

}  // namespace fieldlog
