#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fieldlog/model.hpp"
#include "fieldlog/segmentation.hpp"

namespace fieldlog::service {

inline constexpr std::size_t kMaxBodyBytes = 10 * 1024 * 1024;

using Clock = std::function<Timestamp()>;

/// Wall clock truncated to milliseconds.
Timestamp system_now();

struct Options {
  std::filesystem::path data_dir;
  /// Delay between the last ingest and the automatic recompute; nullopt
  /// disables it (recompute is then explicit only).
  std::optional<Millis> debounce = Millis{10'000};
  Clock clock = system_now;
};

struct LineReject {
  std::size_t line = 0;  // 1-based
  std::string reason;

  friend bool operator==(const LineReject&, const LineReject&) = default;
};

struct ParsedBatch {
  std::vector<GatewayReport> reports;  // input order
  std::vector<LineReject> rejects;
};

/// Per-line parsing shared by the service and the one-shot CLI. Blank lines
/// are skipped; reports from unregistered machines are rejected.
ParsedBatch parse_batch(std::string_view body, const Registry& registry);

/// Keeps the first report for each (machine, t), preserving order.
std::vector<GatewayReport> dedup_first_wins(std::vector<GatewayReport> reports);

struct IngestResult {
  std::size_t accepted = 0;    // newly appended
  std::size_t rejected = 0;
  std::size_t duplicates = 0;  // valid, but (machine, t) already logged
  std::vector<LineReject> reasons;
};

struct RecordQuery {
  std::optional<std::string> machine_id;
  std::optional<std::string> field_id;
  std::optional<WorkType> work_type;
  std::optional<Timestamp> from;  // records ending after `from`
  std::optional<Timestamp> to;    // records starting before `to`
};

struct LivePosition {
  std::string machine_id;
  Fix fix;
  std::optional<std::string> field_id;
  std::optional<std::string> implement_id;
  double staleness_s = 0.0;
};

/// Derived state of one revision. Never mutated once published.
struct Snapshot {
  std::uint64_t revision = 0;
  struct MachineState {
    std::vector<WorkRecord> records;
    std::vector<AttachmentInterval> attachments;
    std::vector<Fix> fixes;  // validated stream, time-ordered
    segmentation::MachineStats stats;
  };
  std::map<std::string, MachineState> machines;
  std::vector<WorkRecord> records;  // every machine, sorted
};

/// Ingestion and query service over an on-disk event log. Thread safe:
/// ingest may run concurrently, queries read the last published snapshot.
class Service {
 public:
  /// Loads the event log under options.data_dir and runs a full recompute.
  Service(Registry registry, Options options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Parses each non-empty line independently. Accepted lines are durable
  /// when this returns. Throws Error(payload_too_large) above kMaxBodyBytes.
  IngestResult ingest(std::string_view body);

  /// Re-runs the pipeline for one machine (or all) and publishes a new
  /// revision. Throws Error(not_found) for an unregistered machine.
  std::uint64_t recompute(const std::optional<std::string>& machine_id = std::nullopt);

  /// Throws Error(invalid_argument) for an unregistered machine or field.
  [[nodiscard]] std::vector<WorkRecord> query_records(const RecordQuery& query) const;

  [[nodiscard]] std::vector<LivePosition> live_positions() const;
  [[nodiscard]] std::vector<segmentation::TransitLeg> transit(const std::optional<std::string>& machine_id) const;

  /// FeatureCollection of digitized boundaries for fields with records.
  [[nodiscard]] nlohmann::json boundaries(const std::optional<std::string>& field_id) const;
  [[nodiscard]] segmentation::Summary summary() const;

  [[nodiscard]] std::shared_ptr<const Snapshot> snapshot() const;
  [[nodiscard]] std::uint64_t revision() const;
  [[nodiscard]] const Registry& registry() const noexcept;
  [[nodiscard]] std::size_t logged_reports() const;

  /// Blocks until no debounced recompute is pending.
  void flush();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Query parameters as strings (HTTP form); empty values count as absent.
/// Throws Error(invalid_argument) on unknown work types or bad timestamps.
RecordQuery parse_record_query(const std::map<std::string, std::string>& params);

nlohmann::json to_json(const IngestResult& r);
nlohmann::json to_json(const LivePosition& p, const Registry& registry);

}  // namespace fieldlog::service
