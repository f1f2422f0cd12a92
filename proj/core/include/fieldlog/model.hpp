#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fieldlog/time.hpp"

namespace fieldlog {

struct GeoPoint {
  double lat = 0.0;  // decimal degrees, WGS84
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool is_valid(const GeoPoint& p) noexcept;

struct Fix {
  std::string machine_id;
  Timestamp t{};
  GeoPoint pos;
  std::optional<double> speed;    // m/s
  std::optional<double> heading;  // degrees from north, [0, 360)
  std::optional<double> hdop;

  friend bool operator==(const Fix&, const Fix&) = default;
};

/// Upper bound on plausible farm machinery speed, m/s.
inline constexpr double kMaxMachineSpeed = 30.0;

struct BleObservation {
  std::string beacon_uid;
  int rssi = 0;  // dBm, [-120, 0]

  friend bool operator==(const BleObservation&, const BleObservation&) = default;
};

inline constexpr int kMinRssi = -120;
inline constexpr int kMaxRssi = 0;

struct GatewayReport {
  Fix fix;
  std::vector<BleObservation> observations;  // at most one per beacon_uid

  friend bool operator==(const GatewayReport&, const GatewayReport&) = default;
};

enum class WorkType {
  planting,
  harvesting,
  spraying,
  grass_cutting,
  harrowing,
  seeding,
  plowing,
  rotary_tilling,
  unknown,
};

inline constexpr WorkType kAllWorkTypes[] = {
    WorkType::planting, WorkType::harvesting, WorkType::spraying,      WorkType::grass_cutting, WorkType::harrowing,
    WorkType::seeding,  WorkType::plowing,    WorkType::rotary_tilling, WorkType::unknown,
};

std::string_view to_string(WorkType w) noexcept;
std::optional<WorkType> parse_work_type(std::string_view s) noexcept;

enum class MachineClass { spv, mpv };

std::string_view to_string(MachineClass c) noexcept;
std::optional<MachineClass> parse_machine_class(std::string_view s) noexcept;

struct Machine {
  std::string id;
  std::string name;
  MachineClass cls = MachineClass::spv;
  std::optional<WorkType> spv_work_type;  // present iff cls == spv

  friend bool operator==(const Machine&, const Machine&) = default;
};

struct Implement {
  std::string id;
  std::string name;
  std::string beacon_uid;
  WorkType work_type = WorkType::unknown;

  friend bool operator==(const Implement&, const Implement&) = default;
};

struct FieldPolygon {
  std::string id;
  std::string name;
  std::vector<GeoPoint> ring;  // implicitly closed, >= 3 vertices
  double area_ha = 0.0;

  friend bool operator==(const FieldPolygon&, const FieldPolygon&) = default;
};

/// Half-open attachment span [start, end).
struct AttachmentInterval {
  std::string machine_id;
  std::string implement_id;
  Timestamp start{};
  Timestamp end{};

  friend bool operator==(const AttachmentInterval&, const AttachmentInterval&) = default;
};

struct RecordFlags {
  bool merged = false;
  bool had_stop = false;
  bool worktype_unknown = false;

  RecordFlags& operator|=(const RecordFlags& o) {
    merged |= o.merged;
    had_stop |= o.had_stop;
    worktype_unknown |= o.worktype_unknown;
    return *this;
  }
  friend bool operator==(const RecordFlags&, const RecordFlags&) = default;
};

/// "merged;had_stop;worktype_unknown" subset in that fixed order.
std::string to_string(const RecordFlags& f);
RecordFlags parse_record_flags(std::string_view s);

struct WorkRecord {
  std::string id;  // machine_id + "@" + RFC 3339 start
  std::string machine_id;
  std::string field_id;
  WorkType work_type = WorkType::unknown;
  std::optional<std::string> implement_id;
  Timestamp start{};
  Timestamp end{};
  std::size_t fix_count = 0;
  double distance_m = 0.0;
  Millis active{0};  // worked time; excludes merge gaps and excised stops
  std::vector<Fix> trajectory;
  RecordFlags flags;

  friend bool operator==(const WorkRecord&, const WorkRecord&) = default;
};

struct Params {
  double v_park = 0.2;          // m/s
  double t_park = 180.0;        // s
  double t_min_segment = 120.0; // s
  std::size_t min_fixes = 20;
  double t_gap_merge = 900.0;   // s
  int rssi_attach = -80;        // dBm
  int rssi_detach = -90;        // dBm
  double w_on = 60.0;           // s
  double w_off = 120.0;         // s
  double swath_m = 5.0;

  friend bool operator==(const Params&, const Params&) = default;
};

/// Throws Error(invalid_params) when an invariant does not hold.
void validate(const Params& p);

/// Immutable after construction; safe to share between threads.
class Registry {
 public:
  Registry() = default;

  /// Validates cross references and geometry; throws Error on violations.
  Registry(std::vector<Machine> machines, std::vector<Implement> implements, std::vector<FieldPolygon> fields,
           Params params);

  [[nodiscard]] const std::vector<Machine>& machines() const noexcept { return machines_; }
  [[nodiscard]] const std::vector<Implement>& implements() const noexcept { return implements_; }
  [[nodiscard]] const std::vector<FieldPolygon>& fields() const noexcept { return fields_; }
  [[nodiscard]] const Params& params() const noexcept { return params_; }

  [[nodiscard]] const Machine* machine(std::string_view id) const;
  [[nodiscard]] const Implement* implement(std::string_view id) const;
  [[nodiscard]] const Implement* implement_by_beacon(std::string_view uid) const;
  [[nodiscard]] const FieldPolygon* field(std::string_view id) const;

  /// First field in registry order whose polygon contains p (boundary inclusive).
  [[nodiscard]] const FieldPolygon* field_at(const GeoPoint& p) const;

  friend bool operator==(const Registry& a, const Registry& b) {
    return a.machines_ == b.machines_ && a.implements_ == b.implements_ && a.fields_ == b.fields_ &&
           a.params_ == b.params_;
  }

 private:
  std::vector<Machine> machines_;
  std::vector<Implement> implements_;
  std::vector<FieldPolygon> fields_;
  Params params_;
  std::map<std::string, std::size_t, std::less<>> machine_index_;
  std::map<std::string, std::size_t, std::less<>> implement_index_;
  std::map<std::string, std::size_t, std::less<>> beacon_index_;
  std::map<std::string, std::size_t, std::less<>> field_index_;
};

/// Registry config document: {machines[], implements[], fields[], params{}}.
/// Unknown top-level keys are ignored so a scenario file doubles as a registry.
Registry load_registry(const nlohmann::json& doc);
Registry load_registry_file(const std::filesystem::path& path);

nlohmann::json to_json(const Registry& r);
nlohmann::json to_json(const Params& p);
Params params_from_json(const nlohmann::json& j, Params base = {});

}  // namespace fieldlog
