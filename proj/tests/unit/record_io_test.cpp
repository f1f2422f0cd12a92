#include <gtest/gtest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "fieldlog/error.hpp"
#include "fieldlog/record_io.hpp"
#include "unit/helpers.hpp"

namespace fieldlog::io {
namespace {

using testing::at;

WorkRecord sample_record() {
  WorkRecord r;
  r.machine_id = "tr-01";
  r.field_id = "F";
  r.work_type = WorkType::rotary_tilling;
  r.implement_id = "rt-01";
  r.start = at(3600);
  r.end = at(3600 + 1800.5);
  r.id = "tr-01@" + format_rfc3339(r.start);
  r.active = Millis{1'500'250};
  r.distance_m = 1234.567;
  r.flags.merged = true;
  r.flags.had_stop = true;
  r.trajectory = {testing::fix("tr-01", 3600, testing::local(1, 2)), testing::fix("tr-01", 5400.5, testing::local(3, 4))};
  r.fix_count = 2;
  return r;
}

TEST(RecordCsv, ExactLayout) {
  const std::vector records = {sample_record()};
  EXPECT_EQ(records_to_csv(records),
            "id,machine,field,work_type,implement,start,end,duration_s,distance_m,flags\n"
            "tr-01@2024-04-01T01:00:00Z,tr-01,F,rotary_tilling,rt-01,2024-04-01T01:00:00Z,"
            "2024-04-01T01:30:00.500Z,1500.250,1234.57,merged;had_stop\n");
  EXPECT_EQ(records_to_csv({}), "id,machine,field,work_type,implement,start,end,duration_s,distance_m,flags\n");
}

TEST(RecordCsv, RoundTripsExportedColumns) {
  auto r = sample_record();
  r.distance_m = 1234.57;
  const auto back = records_from_csv(records_to_csv(std::vector{r}));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].id, r.id);
  EXPECT_EQ(back[0].implement_id, r.implement_id);
  EXPECT_EQ(back[0].start, r.start);
  EXPECT_EQ(back[0].end, r.end);
  EXPECT_EQ(back[0].active, r.active);
  EXPECT_DOUBLE_EQ(back[0].distance_m, r.distance_m);
  EXPECT_EQ(back[0].flags, r.flags);
  EXPECT_EQ(records_to_csv(back), records_to_csv(std::vector{r}));
}

TEST(RecordCsv, RejectsBadRows) {
  const std::string header = "id,machine,field,work_type,implement,start,end,duration_s,distance_m,flags\n";
  EXPECT_THROW(records_from_csv("id,machine\nx,y\n"), Error);
  EXPECT_THROW(records_from_csv(header + "a,b,F,digging,,2024-04-01T00:00:00Z,2024-04-01T00:00:00Z,1,1,\n"), Error);
  EXPECT_THROW(records_from_csv(header + "a,b,F,plowing,,yesterday,2024-04-01T00:00:00Z,1,1,\n"), Error);
  EXPECT_THROW(records_from_csv(header + "a,b,F,plowing,,2024-04-01T00:00:00Z\n"), Error);
  EXPECT_THROW(records_from_csv(header + "a,b,F,plowing,,2024-04-01T00:00:00Z,2024-04-01T00:00:00Z,x,1,\n"), Error);
}

TEST(Csv, QuotingRoundTrips) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> len(0, 8), pick(0, 6);
  const char alphabet[] = {'a', ',', '"', '\n', ' ', 'z', '\r'};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::vector<std::string>> rows(3);
    std::string text;
    for (auto& row : rows) {
      for (int c = 0; c < 3; ++c) {
        std::string cell;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) cell += alphabet[pick(rng)];
        row.push_back(cell);
      }
      text += csv_line(row);
    }
    ASSERT_EQ(parse_csv(text), rows) << text;
  }
  EXPECT_THROW(parse_csv("\"open"), Error);
  EXPECT_EQ(parse_csv("a,b\r\n\r\nc,d"), (std::vector<std::vector<std::string>>{{"a", "b"}, {"c", "d"}}));
}

TEST(RecordGeojson, LineStringPerRecord) {
  const Registry reg = testing::small_registry();
  const auto r = sample_record();
  const auto fc = records_to_geojson(std::vector{r}, &reg);
  EXPECT_EQ(fc["type"], "FeatureCollection");
  ASSERT_EQ(fc["features"].size(), 1u);
  const auto& f = fc["features"][0];
  EXPECT_EQ(f["geometry"]["type"], "LineString");
  ASSERT_EQ(f["geometry"]["coordinates"].size(), 2u);
  EXPECT_DOUBLE_EQ(f["geometry"]["coordinates"][0][0].get<double>(), r.trajectory[0].pos.lon);
  EXPECT_DOUBLE_EQ(f["geometry"]["coordinates"][0][1].get<double>(), r.trajectory[0].pos.lat);
  const auto& p = f["properties"];
  for (const char* key : kRecordColumns) EXPECT_TRUE(p.contains(key)) << key;
  EXPECT_EQ(p["machine_class"], "MPV");
  EXPECT_EQ(p["duration_s"], 1500.25);
  EXPECT_EQ(p["distance_m"], 1234.57);
  EXPECT_EQ(p["flags"], "merged;had_stop");
}

TEST(RecordJson, MatchesGeojsonProperties) {
  const Registry reg = testing::small_registry();
  const std::vector records = {sample_record()};
  EXPECT_EQ(records_to_json(records, &reg)[0], records_to_geojson(records, &reg)["features"][0]["properties"]);
  EXPECT_FALSE(records_to_json(records)[0].contains("machine_class"));
}

TEST(ManualCsv, ParsesAndValidates) {
  const auto entries = manual_from_csv("field_id,work_type,date\nF,plowing,2024-04-02\n\"G,2\",harrowing,2024-05-01\n");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[1].field_id, "G,2");
  EXPECT_EQ(entries[0].date, parse_date("2024-04-02"));
  EXPECT_THROW(manual_from_csv("field_id,work_type,date\nF,plowing,04/02/2024\n"), Error);
  EXPECT_THROW(manual_from_csv("field_id,work_type,date\nF,tilling,2024-04-02\n"), Error);
  EXPECT_THROW(manual_from_csv("field,work_type,date\nF,plowing,2024-04-02\n"), Error);
}

TEST(DiscrepancyCsv, Layout) {
  segmentation::DiscrepancyReport report;
  report.entries.push_back({"F", WorkType::plowing, segmentation::DiscrepancyKind::date_mismatch, parse_date("2024-04-01"),
                            parse_date("2024-04-02")});
  report.entries.push_back(
      {"G", WorkType::seeding, segmentation::DiscrepancyKind::missing_auto, std::nullopt, parse_date("2024-04-03")});
  EXPECT_EQ(discrepancies_to_csv(report),
            "field_id,work_type,kind,auto_date,manual_date\n"
            "F,plowing,date_mismatch,2024-04-01,2024-04-02\n"
            "G,seeding,missing_auto,,2024-04-03\n");
  EXPECT_EQ(to_json(report)["entries"][1]["auto_date"], nullptr);
}

TEST(Files, ReadWriteAndErrors) {
  testing::TempDir dir;
  const auto path = (dir.path() / "x.txt").string();
  write_file(path, "a\nb");
  EXPECT_EQ(read_file(path), "a\nb");
  EXPECT_THROW(read_file((dir.path() / "missing").string()), Error);
  EXPECT_THROW(write_file((dir.path() / "no" / "such" / "dir").string(), "x"), Error);
}

}  // namespace
}  // namespace fieldlog::io
