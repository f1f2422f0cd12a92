#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldlog/ingest.hpp"
#include "fieldlog/model.hpp"

namespace fieldlog::segmentation {

struct AnnotatedFix {
  Fix fix;
  std::optional<std::string> field_id;
  std::optional<std::string> implement_id;
  bool moving = false;
};

/// Contiguous run of fixes in one field. `active` is worked time, which is
/// end - start until merges or stop excisions remove gaps.
struct Segment {
  std::string machine_id;
  std::string field_id;
  std::vector<AnnotatedFix> fixes;
  Timestamp start{};
  Timestamp end{};
  Millis active{0};
  RecordFlags flags;
};

struct StopInterval {
  Timestamp start{};
  Timestamp end{};

  friend bool operator==(const StopInterval&, const StopInterval&) = default;
};

/// Field by first containing registry polygon, implement by attachment,
/// moving by speed (reported, else implied from neighbours) >= v_park.
std::vector<AnnotatedFix> annotate(std::span<const Fix> fixes, const Registry& registry,
                                   std::span<const AttachmentInterval> attachments, const Params& params);

/// Maximal runs of non-moving fixes lasting at least t_park.
std::vector<StopInterval> detect_stops(std::span<const AnnotatedFix> annotated, const Params& params);

/// Maximal same-field runs; fixes outside every field are dropped.
std::vector<Segment> split_by_field(std::span<const AnnotatedFix> annotated);

/// Removes stop intervals from segments. Segments touched by a stop are
/// flagged had_stop and re-checked against t_min_segment; pieces that fail
/// go to `dropped` when given.
std::vector<Segment> subtract_stops(std::vector<Segment> segments, std::span<const StopInterval> stops,
                                    const Params& params, std::vector<Segment>* dropped = nullptr);

/// Drops segments shorter than t_min_segment or with fewer than min_fixes
/// fixes, moving them to `dropped` when given.
std::vector<Segment> filter_transitions(std::vector<Segment> segments, const Params& params,
                                        std::vector<Segment>* dropped = nullptr);

/// Joins consecutive segments sharing machine, field and implement when the
/// gap is below t_gap_merge and both sides fall on the same UTC day.
///
/// `bridges` are pieces rejected earlier as too short. They never become
/// records, but a bridge with the same key extends the reach of the open
/// segment, so shrinking the kept set never splits a merged operation.
std::vector<Segment> merge_disruptions(std::vector<Segment> segments, const Params& params,
                                       std::span<const Segment> bridges = {});

/// Implement attached for at least half of the fixes, if any.
std::optional<std::string> majority_implement(std::span<const AnnotatedFix> fixes);

std::vector<WorkRecord> build_work_records(const Machine& machine, std::span<const Segment> segments,
                                           const Registry& registry);

/// Switches for the four corrections; all on in production.
struct Corrections {
  bool parked_machinery = true;
  bool disrupted_work = true;
  bool field_transitions = true;
  bool stray_implements = true;
};

struct MachineStats {
  std::size_t reports = 0;
  std::size_t duplicates = 0;
  ingest::DropCounters drops;
  std::size_t unknown_beacon = 0;
  std::size_t stops = 0;
};

struct PipelineResult {
  std::vector<WorkRecord> records;  // sorted by (start, machine_id)
  std::vector<AttachmentInterval> attachments;
  std::map<std::string, MachineStats> stats;
  std::size_t unknown_machine = 0;
};

/// Runs the whole chain for one machine. `reports` may be in any order.
PipelineResult process_machine(const Machine& machine, std::vector<GatewayReport> reports, const Registry& registry,
                               const Corrections& corrections = {});

/// Runs every registered machine found in `reports`; other machines are counted
/// in unknown_machine. Result is independent of report order.
PipelineResult run_pipeline(const Registry& registry, std::span<const GatewayReport> reports,
                            const Corrections& corrections = {});

/// Stable order used by every record listing.
void sort_records(std::vector<WorkRecord>& records);

struct Summary {
  std::map<std::string, std::size_t> per_class;  // "SPV", "MPV" always present
  std::map<std::string, std::size_t> per_work_type;
  std::map<std::string, std::size_t> per_field;
  std::size_t total = 0;

  friend bool operator==(const Summary&, const Summary&) = default;
};

/// total is always the sum of per_class: it is derived from the same pass,
/// never reported separately. A headline total that disagrees with its class
/// breakdown (1,623 against 421 SPV + 1,120 MPV = 1,541) cannot be produced.
/// Records of unregistered machines count under "unknown".
Summary summarize(std::span<const WorkRecord> records, const Registry& registry);

struct TransitLeg {
  std::string machine_id;
  std::string from_record_id;
  std::string to_record_id;
  double duration_s = 0.0;
  double straight_line_m = 0.0;
  double path_m = 0.0;
};

/// One leg per consecutive pair of records on the same UTC day. `fixes` is
/// the machine's validated stream; path_m follows the fixes between them.
std::vector<TransitLeg> transit_report(std::span<const WorkRecord> records, std::span<const Fix> fixes);

struct ManualEntry {
  std::string field_id;
  WorkType work_type = WorkType::unknown;
  std::chrono::sys_days date{};
};

enum class DiscrepancyKind { date_mismatch, missing_manual, missing_auto };
std::string_view to_string(DiscrepancyKind k) noexcept;

struct Discrepancy {
  std::string field_id;
  WorkType work_type = WorkType::unknown;
  DiscrepancyKind kind = DiscrepancyKind::date_mismatch;
  std::optional<std::chrono::sys_days> auto_date;
  std::optional<std::chrono::sys_days> manual_date;

  friend bool operator==(const Discrepancy&, const Discrepancy&) = default;
};

struct DiscrepancyReport {
  std::vector<Discrepancy> entries;
};

/// Matches on (field_id, work_type) using each record's UTC start date.
/// Dates are de-duplicated per key; exact matches are omitted, leftovers are
/// paired in date order as date_mismatch, the rest are missing_*.
DiscrepancyReport compare_records(std::span<const WorkRecord> auto_records, std::span<const ManualEntry> manual);

}  // namespace fieldlog::segmentation
