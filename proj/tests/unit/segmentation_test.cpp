#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fieldlog/geo.hpp"
#include "fieldlog/segmentation.hpp"
#include "unit/helpers.hpp"

namespace fieldlog::segmentation {
namespace {

using testing::at;
using testing::local;

const Registry& registry() {
  static const Registry r = testing::small_registry();
  return r;
}

const Params kParams{};

AnnotatedFix afix(double s, std::optional<std::string> field, bool moving = true,
                  std::optional<std::string> implement = std::nullopt) {
  AnnotatedFix a;
  a.fix = testing::fix("tr-01", s, local(50, 25), moving ? 1.5 : 0.0);
  a.field_id = std::move(field);
  a.implement_id = std::move(implement);
  a.moving = moving;
  return a;
}

// One fix per `step` seconds over [t0, t1].
std::vector<AnnotatedFix> run(double t0, double t1, std::optional<std::string> field, bool moving = true,
                              std::optional<std::string> implement = std::nullopt, double step = 1) {
  std::vector<AnnotatedFix> out;
  for (double t = t0; t <= t1; t += step) out.push_back(afix(t, field, moving, implement));
  return out;
}

std::vector<AnnotatedFix> cat(std::initializer_list<std::vector<AnnotatedFix>> parts) {
  std::vector<AnnotatedFix> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Segment segment(double t0, double t1, const std::string& field, std::optional<std::string> implement = std::nullopt,
                double step = 1) {
  return split_by_field(run(t0, t1, field, true, std::move(implement), step)).at(0);
}

TEST(Annotate, FieldMovingAndImplement) {
  const std::vector<Fix> fixes = {testing::fix("tr-01", 0, local(50, 25), 1.5), testing::fix("tr-01", 5, local(150, 25), 1.5),
                                  testing::fix("tr-01", 10, local(50, 25), 0.1)};
  const std::vector<AttachmentInterval> ivs = {{"tr-01", "rt-01", at(0), at(6)}};
  const auto a = annotate(fixes, registry(), ivs, kParams);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0].field_id, "F");
  EXPECT_TRUE(a[0].moving);
  EXPECT_EQ(a[0].implement_id, "rt-01");
  EXPECT_FALSE(a[1].field_id);
  EXPECT_EQ(a[1].implement_id, "rt-01");
  EXPECT_EQ(a[2].field_id, "F");
  EXPECT_FALSE(a[2].moving);
  EXPECT_FALSE(a[2].implement_id);
}

TEST(Annotate, ImpliedSpeedWhenUnreported) {
  std::vector<Fix> fixes;
  for (int i = 0; i < 5; ++i) fixes.push_back(testing::fix("tr-01", i, local(10 + 0.1 * i, 10)));
  for (int i = 5; i < 10; ++i) fixes.push_back(testing::fix("tr-01", i, local(10 + 2.0 * i, 10)));
  const auto a = annotate(fixes, registry(), {}, kParams);
  EXPECT_FALSE(a[1].moving);  // 0.1 m/s
  EXPECT_TRUE(a[8].moving);   // 2 m/s
}

TEST(DetectStops, OracleCases) {
  // tests/oracles/segmentation_oracle.py
  EXPECT_EQ(detect_stops(run(0, 300, "F", false), kParams), (std::vector<StopInterval>{{at(0), at(300)}}));
  EXPECT_TRUE(detect_stops(cat({run(0, 99, "F"), run(100, 160, "F", false), run(161, 260, "F")}), kParams).empty());
  std::vector<AnnotatedFix> alternating;
  for (int t = 0; t < 600; ++t) alternating.push_back(afix(t, "F", (t / 30) % 2 == 0));
  EXPECT_TRUE(detect_stops(alternating, kParams).empty());
}

TEST(DetectStops, ThresholdIsInclusiveAndIgnoresField) {
  EXPECT_EQ(detect_stops(run(0, 180, std::nullopt, false), kParams).size(), 1u);
  EXPECT_TRUE(detect_stops(run(0, 179, "F", false), kParams).empty());
}

TEST(SplitByField, Examples) {
  EXPECT_EQ(split_by_field(run(0, 100, "F")).size(), 1u);
  const auto two = split_by_field(cat({run(0, 100, "F"), run(101, 200, std::nullopt), run(201, 300, "G")}));
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].field_id, "F");
  EXPECT_EQ(two[1].field_id, "G");
  EXPECT_EQ(two[1].start, at(201));
  EXPECT_EQ(two[1].end, at(300));
  EXPECT_EQ(two[1].active, Millis{99'000});
  EXPECT_EQ(split_by_field(cat({run(0, 100, "F"), run(101, 103, "G"), run(104, 200, "F")})).size(), 3u);
}

TEST(SplitByField, EveryInFieldFixLandsOnce) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(0, 2);
  const std::optional<std::string> fields[] = {"F", "G", std::nullopt};
  std::vector<AnnotatedFix> in;
  std::size_t in_field = 0;
  for (int t = 0; t < 5000; ++t) {
    const auto& f = fields[pick(rng)];
    in_field += f.has_value();
    in.push_back(afix(t, f));
  }
  std::size_t total = 0;
  for (const auto& s : split_by_field(in)) {
    total += s.fixes.size();
    for (const auto& a : s.fixes) ASSERT_EQ(a.field_id, s.field_id);
  }
  EXPECT_EQ(total, in_field);
}

TEST(FilterTransitions, Examples) {
  const auto out = filter_transitions({segment(0, 600, "F"), segment(601, 620, "G"), segment(621, 2421, "F")}, kParams);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].field_id, "F");
  EXPECT_EQ(out[1].field_id, "F");
  // 130 s but only 14 fixes at 10 s cadence
  EXPECT_TRUE(filter_transitions({segment(0, 130, "F", std::nullopt, 10)}, kParams).empty());
  EXPECT_EQ(filter_transitions({segment(0, 1800, "F")}, kParams).size(), 1u);
}

TEST(SubtractStops, SplitsAroundParkAsOracle) {
  std::vector<AnnotatedFix> stream;
  for (int t = 0; t <= 3600; ++t) stream.push_back(afix(t, "F", !(1500 <= t && t <= 2100)));
  const auto stops = detect_stops(stream, kParams);
  ASSERT_EQ(stops, (std::vector<StopInterval>{{at(1500), at(2100)}}));
  const auto pieces = subtract_stops(split_by_field(stream), stops, kParams);
  ASSERT_EQ(pieces.size(), 2u);
  EXPECT_EQ(pieces[0].start, at(0));
  EXPECT_EQ(pieces[0].end, at(1499));
  EXPECT_EQ(pieces[1].start, at(2101));
  EXPECT_EQ(pieces[1].end, at(3600));
  EXPECT_TRUE(pieces[0].flags.had_stop);
  EXPECT_TRUE(pieces[1].flags.had_stop);
  // Merged back into one operation; the park never counts as work.
  const auto merged = merge_disruptions(pieces, kParams);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].active, Millis{2'998'000});
  EXPECT_TRUE(merged[0].flags.merged);
}

TEST(SubtractStops, UntouchedAndFullyParked) {
  const std::vector<StopInterval> stops = {{at(5000), at(6000)}};
  const auto seg = segment(0, 1000, "F");
  const auto out = subtract_stops({seg}, stops, kParams);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_FALSE(out[0].flags.had_stop);
  EXPECT_EQ(out[0].fixes.size(), seg.fixes.size());
  EXPECT_TRUE(subtract_stops({segment(5100, 5900, "F")}, stops, kParams).empty());
}

TEST(SubtractStops, ShortRemaindersDropped) {
  // 100 s of work before a park: below t_min_segment once excised.
  const std::vector<StopInterval> stops = {{at(100), at(400)}};
  const auto out = subtract_stops({segment(0, 1000, "F")}, stops, kParams);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].start, at(401));
}

TEST(MergeDisruptions, Examples) {
  auto merged = merge_disruptions({segment(0, 600, "F", "rt-01"), segment(1200, 1800, "F", "rt-01")}, kParams);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].start, at(0));
  EXPECT_EQ(merged[0].end, at(1800));
  EXPECT_EQ(merged[0].active, Millis{1'200'000});
  EXPECT_TRUE(merged[0].flags.merged);

  EXPECT_EQ(merge_disruptions({segment(0, 600, "F", "rt-01"), segment(1800, 2400, "F", "rt-01")}, kParams).size(), 2u);
  EXPECT_EQ(merge_disruptions({segment(0, 600, "F"), segment(1200, 1800, "G")}, kParams).size(), 2u);
  EXPECT_EQ(merge_disruptions({segment(0, 600, "F", "rt-01"), segment(1200, 1800, "F", "hr-01")}, kParams).size(), 2u);
  // 899 s gap merges, 900 s does not
  EXPECT_EQ(merge_disruptions({segment(0, 600, "F"), segment(1499, 1800, "F")}, kParams).size(), 1u);
  EXPECT_EQ(merge_disruptions({segment(0, 600, "F"), segment(1500, 1800, "F")}, kParams).size(), 2u);
}

TEST(MergeDisruptions, CalendarDayEndsEligibility) {
  const double midnight = 86400;
  EXPECT_EQ(merge_disruptions({segment(midnight - 700, midnight - 100, "F"), segment(midnight + 100, midnight + 700, "F")},
                              kParams)
                .size(),
            2u);
}

TEST(MajorityImplement, HalfIsEnough) {
  EXPECT_EQ(majority_implement(cat({run(0, 4, "F", true, "rt-01"), run(5, 9, "F")})), "rt-01");
  EXPECT_FALSE(majority_implement(cat({run(0, 3, "F", true, "rt-01"), run(4, 9, "F")})));
  EXPECT_EQ(majority_implement(cat({run(0, 4, "F", true, "rt-01"), run(5, 9, "F", true, "hr-01")})), "hr-01");
}

TEST(BuildWorkRecords, WorkTypeBySourceKind) {
  const Machine& planter = *registry().machine("pl-01");
  const Machine& tractor = *registry().machine("tr-01");

  auto spv = build_work_records(planter, std::vector{segment(0, 600, "F")}, registry());
  ASSERT_EQ(spv.size(), 1u);
  EXPECT_EQ(spv[0].work_type, WorkType::planting);
  EXPECT_EQ(spv[0].machine_id, "pl-01");
  EXPECT_EQ(spv[0].field_id, "F");
  EXPECT_EQ(spv[0].id, "pl-01@2024-04-01T00:00:00Z");
  EXPECT_EQ(spv[0].fix_count, 601u);
  EXPECT_FALSE(spv[0].implement_id);

  auto tilled = build_work_records(tractor, std::vector{segment(0, 600, "F", "rt-01")}, registry());
  EXPECT_EQ(tilled.at(0).work_type, WorkType::rotary_tilling);
  EXPECT_EQ(tilled.at(0).implement_id, "rt-01");
  EXPECT_FALSE(tilled.at(0).flags.worktype_unknown);

  auto bare = build_work_records(tractor, std::vector{segment(0, 600, "F")}, registry());
  EXPECT_EQ(bare.at(0).work_type, WorkType::unknown);
  EXPECT_TRUE(bare.at(0).flags.worktype_unknown);
}

TEST(BuildWorkRecords, DistanceFollowsTrajectory) {
  std::vector<AnnotatedFix> fixes;
  for (int i = 0; i <= 100; ++i) {
    auto a = afix(i, "F");
    a.fix.pos = local(i * 0.5, 10);
    fixes.push_back(a);
  }
  const auto r = build_work_records(*registry().machine("pl-01"), split_by_field(fixes), registry());
  EXPECT_NEAR(r.at(0).distance_m, 50.0, 0.05);
}

WorkRecord record(const std::string& machine, const std::string& field, WorkType type, double start, double end) {
  WorkRecord r;
  r.machine_id = machine;
  r.field_id = field;
  r.work_type = type;
  r.start = at(start);
  r.end = at(end);
  r.id = machine + "@" + format_rfc3339(r.start);
  r.trajectory = {testing::fix(machine, start, local(50, 25)), testing::fix(machine, end, local(60, 25))};
  return r;
}

TEST(Summarize, ClassCountsAddUp) {
  std::vector<WorkRecord> records;
  for (int i = 0; i < 421; ++i) records.push_back(record("pl-01", "F", WorkType::planting, i, i + 1));
  for (int i = 0; i < 1120; ++i) records.push_back(record("tr-01", "G", WorkType::plowing, i, i + 1));
  const auto s = summarize(records, registry());
  EXPECT_EQ(s.per_class.at("SPV"), 421u);
  EXPECT_EQ(s.per_class.at("MPV"), 1120u);
  EXPECT_EQ(s.total, 1541u);
  EXPECT_EQ(s.per_work_type.at("plowing"), 1120u);
  EXPECT_EQ(s.per_field.at("F"), 421u);
}

TEST(Summarize, EmptyIsZero) {
  const auto s = summarize({}, registry());
  EXPECT_EQ(s.total, 0u);
  EXPECT_EQ(s.per_class.at("SPV"), 0u);
  EXPECT_EQ(s.per_class.at("MPV"), 0u);
  EXPECT_TRUE(s.per_field.empty());
}

TEST(Summarize, TotalIsSumOfClasses) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> n(0, 300), coin(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<WorkRecord> records;
    const int count = n(rng);
    for (int i = 0; i < count; ++i) {
      const int c = coin(rng);
      records.push_back(record(c == 0 ? "pl-01" : c == 1 ? "tr-01" : "ghost", "F", WorkType::unknown, i, i + 1));
    }
    const auto s = summarize(records, registry());
    std::size_t sum = 0, by_type = 0, by_field = 0;
    for (const auto& [k, v] : s.per_class) sum += v;
    for (const auto& [k, v] : s.per_work_type) by_type += v;
    for (const auto& [k, v] : s.per_field) by_field += v;
    ASSERT_EQ(s.total, sum);
    ASSERT_EQ(s.total, records.size());
    ASSERT_EQ(by_type, s.total);
    ASSERT_EQ(by_field, s.total);
  }
}

TEST(TransitReport, Examples) {
  const double ten = 10 * 3600;
  const std::vector recs = {record("tr-01", "F", WorkType::plowing, ten - 600, ten),
                            record("tr-01", "G", WorkType::plowing, ten + 1200, ten + 1800)};
  const auto legs = transit_report(recs, {});
  ASSERT_EQ(legs.size(), 1u);
  EXPECT_DOUBLE_EQ(legs[0].duration_s, 1200.0);
  EXPECT_EQ(legs[0].from_record_id, recs[0].id);
  EXPECT_EQ(legs[0].to_record_id, recs[1].id);
  EXPECT_TRUE(transit_report(std::vector{recs[0]}, {}).empty());
  // Next day: no leg.
  EXPECT_TRUE(transit_report(std::vector{recs[0], record("tr-01", "G", WorkType::plowing, ten + 86400, ten + 86500)}, {})
                  .empty());
}

TEST(TransitReport, DetourRatio) {
  // Equilateral detour over a 200 m base; tests/oracles/geo_oracle.py gives 2.0000.
  const geo::Vec2 a{0, 0}, b{200, 0}, apex{100, 200 * std::sqrt(3.0) / 2};
  const geo::LocalFrame frame({35.0, 137.0});
  std::vector<Fix> fixes;
  double t = 1000;
  auto walk = [&](geo::Vec2 from, geo::Vec2 to) {
    for (int i = 0; i < 100; ++i) {
      const double u = i / 100.0;
      fixes.push_back(testing::fix("tr-01", t, frame.to_geo({from.x + u * (to.x - from.x), from.y + u * (to.y - from.y)})));
      t += 1;
    }
  };
  walk(a, apex);
  walk(apex, b);
  fixes.push_back(testing::fix("tr-01", t, frame.to_geo(b)));

  auto from = record("tr-01", "F", WorkType::plowing, 0, 1000);
  from.trajectory = {testing::fix("tr-01", 0, frame.to_geo({-50, 0})), fixes.front()};
  auto to = record("tr-01", "G", WorkType::plowing, t, t + 600);
  to.trajectory = {fixes.back(), testing::fix("tr-01", t + 600, frame.to_geo({250, 0}))};

  const auto legs = transit_report(std::vector{from, to}, fixes);
  ASSERT_EQ(legs.size(), 1u);
  EXPECT_NEAR(legs[0].straight_line_m, 200.0, 0.05);
  EXPECT_NEAR(legs[0].path_m / legs[0].straight_line_m, 2.0, 0.05);
  EXPECT_NEAR(legs[0].path_m / legs[0].straight_line_m, 2.0, 1e-3);
}

ManualEntry manual(const std::string& field, WorkType type, const char* date) {
  return {field, type, *parse_date(date)};
}

TEST(CompareRecords, Examples) {
  const std::vector recs = {record("tr-01", "F", WorkType::plowing, 0, 600)};
  EXPECT_TRUE(compare_records(recs, std::vector{manual("F", WorkType::plowing, "2024-04-01")}).entries.empty());

  const auto late = compare_records(recs, std::vector{manual("F", WorkType::plowing, "2024-04-02")});
  ASSERT_EQ(late.entries.size(), 1u);
  EXPECT_EQ(late.entries[0].kind, DiscrepancyKind::date_mismatch);
  EXPECT_EQ(late.entries[0].auto_date, parse_date("2024-04-01"));
  EXPECT_EQ(late.entries[0].manual_date, parse_date("2024-04-02"));

  const auto missing = compare_records(recs, std::vector{manual("F", WorkType::plowing, "2024-04-01"),
                                                         manual("G", WorkType::harrowing, "2024-04-03")});
  ASSERT_EQ(missing.entries.size(), 1u);
  EXPECT_EQ(missing.entries[0].kind, DiscrepancyKind::missing_auto);
  EXPECT_EQ(missing.entries[0].field_id, "G");

  const auto unlogged = compare_records(recs, {});
  ASSERT_EQ(unlogged.entries.size(), 1u);
  EXPECT_EQ(unlogged.entries[0].kind, DiscrepancyKind::missing_manual);
}

TEST(CompareRecords, SameDayRecordsCountOnce) {
  const std::vector recs = {record("tr-01", "F", WorkType::plowing, 0, 600),
                            record("tr-01", "F", WorkType::plowing, 5000, 6000)};
  EXPECT_TRUE(compare_records(recs, std::vector{manual("F", WorkType::plowing, "2024-04-01")}).entries.empty());
}

// Random day of one planter: work bouts in F and G, parks, and road trips.
std::vector<GatewayReport> random_day(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> activity(0, 4), duration(10, 1500), cadence(1, 5);
  std::uniform_real_distribution<double> ux(2, 98), uy(2, 48);
  std::vector<GatewayReport> out;
  double t = std::uniform_int_distribution<int>(0, 1)(rng) ? 0 : 20 * 3600;  // some days cross midnight
  const int step = cadence(rng);
  while (out.size() < 3000) {
    const int kind = activity(rng);
    const double until = t + duration(rng);
    for (; t < until; t += step) {
      GatewayReport r;
      r.fix.machine_id = "pl-01";
      r.fix.t = at(t);
      switch (kind) {
        case 0:
        case 1:  // work in F or G
          r.fix.pos = local(ux(rng), uy(rng) * 0.02 + (kind == 0 ? 25 : 75));
          r.fix.speed = 1.5;
          break;
        case 2:  // parked in F
          r.fix.pos = local(10, 10);
          r.fix.speed = 0.0;
          break;
        case 3:  // on the road
          r.fix.pos = local(150, 50);
          r.fix.speed = 3.0;
          break;
        default:  // brief stutter near the F/G boundary
          r.fix.pos = local(50, 50 + (static_cast<int>(t) % 2 ? 1.0 : -1.0));
          r.fix.speed = 1.0;
      }
      out.push_back(r);
    }
  }
  return out;
}

// Three same-field bouts 500 s apart; the middle one is 130 s long.
std::vector<GatewayReport> bouts_with_short_middle() {
  std::vector<GatewayReport> out;
  auto add = [&](double t0, double t1, double x) {
    for (double t = t0; t <= t1; t += 1) {
      GatewayReport r;
      r.fix = testing::fix("pl-01", t, local(x, 25), 1.5);
      out.push_back(r);
    }
  };
  add(0, 200, 95);
  add(201, 699, 105);
  add(700, 830, 95);
  add(831, 1329, 105);
  add(1330, 1600, 95);
  return out;
}

TEST(PipelineProperty, ShortBoutStillBridgesDisruption) {
  Params strict;
  strict.t_min_segment = 150;
  EXPECT_EQ(run_pipeline(registry(), bouts_with_short_middle()).records.size(), 1u);
  const auto records = run_pipeline(testing::small_registry(strict), bouts_with_short_middle()).records;
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].start, at(0));
  EXPECT_EQ(records[0].end, at(1600));
  // The short bout is not work: only the outer bouts count.
  EXPECT_EQ(records[0].active, Millis{470'000});
  EXPECT_EQ(records[0].fix_count, 201u + 271u);
}

TEST(PipelineProperty, FixesLandInAtMostOneRecord) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto reports = random_day(rng);
    std::set<Timestamp> seen;
    for (const auto& r : run_pipeline(registry(), reports).records) {
      for (const auto& f : r.trajectory) ASSERT_TRUE(seen.insert(f.t).second) << "trial " << trial;
      ASSERT_LE(r.active, r.end - r.start);
      ASSERT_EQ(r.fix_count, r.trajectory.size());
    }
  }
}

TEST(PipelineProperty, OrderAndPartitionInsensitive) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    auto reports = random_day(rng);
    const auto expected = run_pipeline(registry(), reports).records;
    std::shuffle(reports.begin(), reports.end(), rng);
    // Second partition repeats part of the first, as an overlapping replay would.
    std::vector<GatewayReport> doubled(reports.begin(), reports.end());
    doubled.insert(doubled.end(), reports.begin(), reports.begin() + static_cast<std::ptrdiff_t>(reports.size() / 3));
    EXPECT_EQ(run_pipeline(registry(), reports).records, expected) << "trial " << trial;
    EXPECT_EQ(run_pipeline(registry(), doubled).records, expected) << "trial " << trial;
  }
}

TEST(PipelineProperty, RerunIsIdentical) {
  std::mt19937_64 rng(23);
  const auto reports = random_day(rng);
  EXPECT_EQ(run_pipeline(registry(), reports).records, run_pipeline(registry(), reports).records);
}

TEST(PipelineProperty, LargerMinSegmentNeverAddsRecords) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    const auto reports = random_day(rng);
    std::size_t previous = SIZE_MAX;
    for (const double t_min : {30.0, 60.0, 120.0, 240.0, 480.0, 899.0}) {
      Params p;
      p.t_min_segment = t_min;
      const Registry reg = testing::small_registry(p);
      const std::size_t n = run_pipeline(reg, reports).records.size();
      EXPECT_LE(n, previous) << "trial " << trial << " t_min_segment " << t_min;
      previous = n;
    }
  }
}

}  // namespace
}  // namespace fieldlog::segmentation
