#include <gtest/gtest.h>

#include "fieldlog/time.hpp"

namespace fieldlog {
namespace {

TEST(Time, ParsesUtcForms) {
  const auto a = parse_rfc3339("2024-04-01T02:15:30Z");
  ASSERT_TRUE(a);
  EXPECT_EQ(to_unix_ms(*a), 1711937730000);
  EXPECT_EQ(parse_rfc3339("2024-04-01T02:15:30+00:00"), a);
  EXPECT_EQ(to_unix_ms(*parse_rfc3339("2024-04-01T02:15:30.25Z")), 1711937730250);
  EXPECT_EQ(to_unix_ms(*parse_rfc3339("2024-04-01t02:15:30.123z")), 1711937730123);
}

TEST(Time, RejectsMalformed) {
  for (const char* s : {"", "2024-04-01", "2024-04-01T02:15:30", "2024-04-01T02:15:30+09:00", "2024-13-01T00:00:00Z",
                        "2024-02-30T00:00:00Z", "2024-04-01T24:00:00Z", "2024-04-01T02:15:30.Z", "x024-04-01T02:15:30Z"}) {
    EXPECT_FALSE(parse_rfc3339(s)) << s;
  }
}

TEST(Time, CanonicalFormat) {
  EXPECT_EQ(format_rfc3339(from_unix_ms(1711937730000)), "2024-04-01T02:15:30Z");
  EXPECT_EQ(format_rfc3339(from_unix_ms(1711937730250)), "2024-04-01T02:15:30.250Z");
  EXPECT_EQ(format_rfc3339(from_unix_ms(764426119000)), "1994-03-23T12:35:19Z");
}

TEST(Time, RoundTripsEveryMillisecondPattern) {
  for (std::int64_t ms = 1711937730000; ms < 1711937732000; ms += 7) {
    const auto t = from_unix_ms(ms);
    EXPECT_EQ(parse_rfc3339(format_rfc3339(t)), t);
  }
}

TEST(Time, Dates) {
  const auto d = utc_day(from_unix_ms(1711937730000));
  EXPECT_EQ(format_date(d), "2024-04-01");
  EXPECT_EQ(parse_date("2024-04-01"), d);
  EXPECT_FALSE(parse_date("2024-4-1"));
  EXPECT_FALSE(parse_date("2024-02-31"));
  EXPECT_DOUBLE_EQ(seconds_between(from_unix_ms(0), from_unix_ms(1500)), 1.5);
}

}  // namespace
}  // namespace fieldlog
