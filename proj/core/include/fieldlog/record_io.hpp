#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fieldlog/model.hpp"
#include "fieldlog/segmentation.hpp"

namespace fieldlog::io {

/// Column order shared by record export and simulator truth files.
inline constexpr const char* kRecordColumns[] = {"id",    "machine", "field",      "work_type",  "implement",
                                                 "start", "end",     "duration_s", "distance_m", "flags"};

/// Minimal RFC 4180 reader/writer.
std::string csv_escape(std::string_view cell);
std::string csv_line(std::span<const std::string> cells);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string records_to_csv(std::span<const WorkRecord> records);

/// Reads a record CSV back (trajectories are not part of the format).
std::vector<WorkRecord> records_from_csv(std::string_view text);

/// FeatureCollection with one LineString per record.
nlohmann::json records_to_geojson(std::span<const WorkRecord> records, const Registry* registry = nullptr);

/// Array of record objects without trajectories; machine_class is added when
/// a registry is supplied.
nlohmann::json records_to_json(std::span<const WorkRecord> records, const Registry* registry = nullptr);

/// Header `field_id,work_type,date`.
std::vector<segmentation::ManualEntry> manual_from_csv(std::string_view text);

std::string discrepancies_to_csv(const segmentation::DiscrepancyReport& report);
nlohmann::json to_json(const segmentation::DiscrepancyReport& report);
nlohmann::json to_json(const segmentation::Summary& summary);
nlohmann::json to_json(std::span<const segmentation::TransitLeg> legs);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace fieldlog::io
