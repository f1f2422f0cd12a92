#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldlog/model.hpp"

namespace fieldlog::attachment {

struct RssiSample {
  Timestamp t{};
  int rssi = 0;

  friend bool operator==(const RssiSample&, const RssiSample&) = default;
};

/// Sightings of one beacon by one machine's gateway, strictly increasing in t.
struct BeaconTimeline {
  std::string machine_id;
  std::string beacon_uid;
  std::vector<RssiSample> samples;
};

/// Lower median of samples with t in (t_end - window_s, t_end].
std::optional<int> window_median_rssi(const BeaconTimeline& timeline, Timestamp t_end, double window_s);

struct TimelineSet {
  std::vector<BeaconTimeline> timelines;  // sorted by beacon_uid
  std::size_t unknown_beacon = 0;          // observations whose UID is not registered
};

/// Groups one machine's observations per registered beacon. Reports are
/// expected time-ordered; out-of-order or repeated instants are skipped.
TimelineSet build_timelines(std::string_view machine_id, std::span<const GatewayReport> reports,
                            const Registry& registry);

/// Thresholds driving the state machine; defaults come from Params.
struct Thresholds {
  int attach = -80;
  int detach = -90;
  double w_on = 60.0;
  double w_off = 120.0;

  static Thresholds from(const Params& p) { return {p.rssi_attach, p.rssi_detach, p.w_on, p.w_off}; }
};

/// Hysteresis inference on a 1 s grid starting at the first sample.
///
/// A beacon is eligible once its w_on window median has stayed >= attach for
/// w_on seconds. The attached beacon is the eligible one with the greatest
/// median (ties: smallest UID); the holder keeps its slot until its median
/// drops below detach or it has been silent for w_off. Intervals shorter
/// than w_on are discarded. `until` extends the grid past the last sample
/// (normally the machine's last fix) so silence-based detach can fire.
///
/// Timelines whose UID is not in the registry are ignored.
std::vector<AttachmentInterval> infer_attachments(std::span<const BeaconTimeline> timelines, const Registry& registry,
                                                  const Thresholds& thresholds,
                                                  std::optional<Timestamp> until = std::nullopt);

/// Implement whose half-open interval covers t.
std::optional<std::string> attachment_at(std::span<const AttachmentInterval> intervals, Timestamp t);

}  // namespace fieldlog::attachment
