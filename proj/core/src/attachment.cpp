#include "fieldlog/attachment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

namespace fieldlog::attachment {
namespace {

Millis to_millis(double seconds) { return Millis{static_cast<std::int64_t>(std::llround(seconds * 1000.0))}; }

int lower_median(std::vector<int>& values) {
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

// Incremental view of one timeline's (t - w, t] window as t advances.
struct Cursor {
  const BeaconTimeline* timeline = nullptr;
  const Implement* implement = nullptr;
  std::size_t lo = 0;  // first sample with s > t - w
  std::size_t hi = 0;  // one past the last sample with s <= t

  std::optional<Timestamp> above_since;
  std::optional<int> median;

  void advance(Timestamp t, Millis window) {
    const auto& s = timeline->samples;
    while (hi < s.size() && s[hi].t <= t) ++hi;
    while (lo < hi && s[lo].t <= t - window) ++lo;
  }

  [[nodiscard]] bool window_empty() const { return lo == hi; }

  [[nodiscard]] std::optional<Timestamp> last_sample() const {
    if (hi == 0) return std::nullopt;
    return timeline->samples[hi - 1].t;
  }

  [[nodiscard]] std::optional<Timestamp> next_sample() const {
    if (hi >= timeline->samples.size()) return std::nullopt;
    return timeline->samples[hi].t;
  }

  void compute_median(std::vector<int>& scratch) {
    if (window_empty()) {
      median.reset();
      return;
    }
    scratch.clear();
    for (std::size_t i = lo; i < hi; ++i) scratch.push_back(timeline->samples[i].rssi);
    median = lower_median(scratch);
  }
};

}  // namespace

std::optional<int> window_median_rssi(const BeaconTimeline& timeline, Timestamp t_end, double window_s) {
  const Millis window = to_millis(window_s);
  std::vector<int> values;
  for (const auto& s : timeline.samples) {
    if (s.t > t_end - window && s.t <= t_end) values.push_back(s.rssi);
  }
  if (values.empty()) return std::nullopt;
  return lower_median(values);
}

TimelineSet build_timelines(std::string_view machine_id, std::span<const GatewayReport> reports,
                            const Registry& registry) {
  TimelineSet out;
  std::map<std::string, BeaconTimeline, std::less<>> by_uid;
  for (const auto& r : reports) {
    for (const auto& o : r.observations) {
      if (registry.implement_by_beacon(o.beacon_uid) == nullptr) {
        ++out.unknown_beacon;
        continue;
      }
      auto [it, inserted] = by_uid.try_emplace(o.beacon_uid);
      auto& tl = it->second;
      if (inserted) {
        tl.machine_id = std::string(machine_id);
        tl.beacon_uid = o.beacon_uid;
      }
      if (!tl.samples.empty() && tl.samples.back().t >= r.fix.t) continue;
      tl.samples.push_back({r.fix.t, o.rssi});
    }
  }
  for (auto& [uid, tl] : by_uid) out.timelines.push_back(std::move(tl));
  return out;
}

std::vector<AttachmentInterval> infer_attachments(std::span<const BeaconTimeline> timelines, const Registry& registry,
                                                  const Thresholds& th, std::optional<Timestamp> until) {
  std::vector<Cursor> cursors;
  for (const auto& tl : timelines) {
    const Implement* imp = registry.implement_by_beacon(tl.beacon_uid);
    if (imp == nullptr || tl.samples.empty()) continue;
    Cursor c;
    c.timeline = &tl;
    c.implement = imp;
    cursors.push_back(c);
  }
  std::sort(cursors.begin(), cursors.end(),
            [](const Cursor& a, const Cursor& b) { return a.timeline->beacon_uid < b.timeline->beacon_uid; });

  std::vector<AttachmentInterval> out;
  if (cursors.empty()) return out;

  Timestamp first = cursors.front().timeline->samples.front().t;
  Timestamp last = cursors.front().timeline->samples.back().t;
  for (const auto& c : cursors) {
    first = std::min(first, c.timeline->samples.front().t);
    last = std::max(last, c.timeline->samples.back().t);
  }
  if (until && *until > last) last = *until;

  const Millis step{1000};
  const Millis w_on = to_millis(th.w_on);
  const Millis w_off = to_millis(th.w_off);
  const std::string& machine_id = cursors.front().timeline->machine_id;

  std::optional<std::size_t> holder;
  Timestamp holder_start{};
  auto close = [&](Timestamp end) {
    out.push_back({machine_id, cursors[*holder].implement->id, holder_start, end});
    holder.reset();
  };

  std::vector<int> scratch;
  Timestamp t = first;
  while (t <= last) {
    bool any_window = false;
    for (auto& c : cursors) {
      c.advance(t, w_on);
      c.compute_median(scratch);
      any_window |= !c.window_empty();
      if (c.median && *c.median >= th.attach) {
        if (!c.above_since) c.above_since = t;
      } else {
        c.above_since.reset();
      }
    }

    if (holder) {
      const Cursor& h = cursors[*holder];
      const bool weak = h.median && *h.median < th.detach;
      const auto last_seen = h.last_sample();
      const bool silent = !last_seen || t - *last_seen >= w_off;
      if (weak || silent) close(t);
    }

    std::optional<std::size_t> best = holder;
    auto score = [&](std::size_t i) { return cursors[i].median.value_or(std::numeric_limits<int>::min()); };
    for (std::size_t i = 0; i < cursors.size(); ++i) {
      const Cursor& c = cursors[i];
      const bool eligible = c.above_since && t - *c.above_since >= w_on;
      if (!eligible || (best && *best == i)) continue;
      if (!best || score(i) > score(*best) ||
          (score(i) == score(*best) && c.timeline->beacon_uid < cursors[*best].timeline->beacon_uid)) {
        best = i;
      }
    }
    if (best != holder) {
      if (holder) close(t);
      holder = best;
      holder_start = t;
    }

    if (!holder && !any_window) {
      // Nothing can change until the next sample arrives; jump the grid there.
      std::optional<Timestamp> next;
      for (const auto& c : cursors) {
        if (auto n = c.next_sample(); n && (!next || *n < *next)) next = n;
      }
      if (!next) break;
      const auto steps = (*next - first + step - Millis{1}) / step;
      const Timestamp jump = first + steps * step;
      t = std::max(jump, t + step);
      continue;
    }
    t += step;
  }
  if (holder) close(t);

  std::erase_if(out, [&](const AttachmentInterval& iv) { return iv.end - iv.start < w_on; });
  return out;
}

std::optional<std::string> attachment_at(std::span<const AttachmentInterval> intervals, Timestamp t) {
  for (const auto& iv : intervals) {
    if (iv.start <= t && t < iv.end) return iv.implement_id;
  }
  return std::nullopt;
}

}  // namespace fieldlog::attachment
