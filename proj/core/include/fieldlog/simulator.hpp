#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fieldlog/attachment.hpp"
#include "fieldlog/geo.hpp"
#include "fieldlog/model.hpp"
#include "fieldlog/segmentation.hpp"

namespace fieldlog::sim {

/// Beacon signal model. Attached implements sit near `attached_dbm`, nearby
/// unattached ones near `stray_dbm`.
struct RssiModel {
  double attached_dbm = -60.0;
  double stray_dbm = -92.0;
  double sigma_db = 4.0;
  double dropout = 0.05;
  double cadence_s = 5.0;
};

struct ParkBreak {
  double after_s = 0.0;  // seconds of work-path travel before the stop
  double duration_s = 0.0;
};

/// Leave the field mid-work: drive to `exit`, wait, drive back, resume.
struct Disruption {
  double after_s = 0.0;
  GeoPoint exit;
  double wait_s = 0.0;
};

enum class EntryKind { work, park };

struct ScheduleEntry {
  EntryKind kind = EntryKind::work;
  std::string machine_id;
  std::string field_id;                     // work entries; park entries may leave it empty
  std::optional<std::string> implement_id;  // hitched for the whole outing (MPV)
  Timestamp start{};                        // arrival at the first work point / park spot
  double speed = 1.2;                       // work speed, m/s
  std::optional<double> swath_m;            // defaults to Params::swath_m
  std::vector<ParkBreak> parks;
  std::vector<Disruption> disruptions;
  std::vector<GeoPoint> route_in;   // waypoints from the start of the outing
  std::vector<GeoPoint> route_out;  // defaults to route_in reversed
  double linger_s = 0.0;            // stand still at the last work point before leaving
  GeoPoint park_at;                 // park entries
  double park_s = 0.0;              // park entries
};

/// Unattached implement within radio range of a machine during [from, to].
struct StraySighting {
  std::string machine_id;
  std::string implement_id;
  Timestamp from{};
  Timestamp to{};
};

struct SimulationSettings {
  double transit_speed = 4.0;  // m/s
  double spv_cadence_s = 1.0;
  double mpv_cadence_s = 5.0;
  double warmup_s = 120.0;    // idle at the route start before leaving
  double cooldown_s = 30.0;   // idle at the route end before power-off
  double hdop = 0.9;
  RssiModel rssi;
};

struct Scenario {
  std::uint64_t seed = 1;
  GeoPoint origin;  // tangent-plane reference
  std::vector<Machine> machines;
  std::vector<Implement> implements;
  std::vector<FieldPolygon> fields;
  Params params;
  std::map<std::string, GeoPoint> homes;  // per machine; origin when absent
  SimulationSettings settings;
  std::vector<ScheduleEntry> schedule;
  std::vector<StraySighting> strays;

  /// Validated registry view of the scenario's static configuration.
  [[nodiscard]] Registry registry() const;
};

struct TruthRecord {
  std::string machine_id;
  std::string field_id;
  WorkType work_type = WorkType::unknown;
  std::optional<std::string> implement_id;
  Timestamp start{};
  Timestamp end{};
  double duration_s = 0.0;  // excludes park breaks and time out of the field
  double distance_m = 0.0;  // planned work path
};

enum class Phase { idle, transit, work, park, disruption, linger };

struct SampleTag {
  Phase phase = Phase::idle;
  std::size_t entry = 0;  // schedule index
};

/// Time spent inside a field that is not the outing's work field, while in transit.
struct Crossing {
  std::string machine_id;
  std::string field_id;
  double duration_s = 0.0;
};

struct EmitResult {
  std::vector<std::string> lines;       // wire format, ordered by (t, machine)
  std::vector<GatewayReport> reports;   // same order as lines
  std::vector<SampleTag> tags;          // same order as lines
  std::vector<TruthRecord> truth;       // ordered by (start, machine)
  std::vector<Crossing> crossings;
};

/// Boustrophedon waypoints for a rectangular field: passes parallel to the
/// longest side, swath_m apart, joined by headland turns at the short sides.
/// The first pass starts at the first vertex of the longest edge.
std::vector<GeoPoint> boustrophedon_waypoints(const FieldPolygon& field, double swath_m);

/// Fixes every sample_s along the waypoints at constant speed, starting at `start`.
std::vector<Fix> boustrophedon_path(const FieldPolygon& field, double swath_m, double speed, double sample_s,
                                    Timestamp start = Timestamp{}, const std::string& machine_id = {});

/// Seeded RSSI samples at the model cadence over `duration_s`.
std::vector<attachment::RssiSample> rssi_trace(bool attached, double duration_s, std::uint64_t seed,
                                            const RssiModel& model = {}, Timestamp start = Timestamp{});

EmitResult emit_scenario(const Scenario& scenario);

/// Throws Error(schema_violation) on malformed input.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario_file(const std::filesystem::path& path);
nlohmann::json to_json(const Scenario& scenario);

/// Truth as CSV with the record export columns.
std::string truth_to_csv(std::span<const TruthRecord> truth);

struct TruthComparison {
  bool ok = false;
  std::size_t matched = 0;
  std::vector<std::string> problems;
};

/// Pairs records with truth on (machine, field, work_type) with start and end
/// within `tolerance_s`; every record and every truth entry must pair up.
TruthComparison compare_to_truth(std::span<const WorkRecord> records, std::span<const TruthRecord> truth,
                                 double tolerance_s);

// --- presets ---------------------------------------------------------------

/// 3 machines (1 SPV planter, 2 MPV tractors), 5 rectangular fields,
/// 17 implements, 12 work entries with parks, disruptions, crossings and
/// nearby unattached implements.
Scenario acceptance_scenario(std::uint64_t seed = 2024);

enum class Correction { parked_machinery, disrupted_work, field_transitions, stray_implements };
std::string_view to_string(Correction c) noexcept;

/// Small scenario whose output depends on one correction being enabled.
Scenario correction_scenario(Correction which, std::uint64_t seed = 7);

/// Single 100 m x 50 m field worked by one planter.
Scenario single_field_scenario(std::uint64_t seed = 11);

}  // namespace fieldlog::sim
