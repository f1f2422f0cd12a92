#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fieldlog/attachment.hpp"
#include "fieldlog/geo.hpp"
#include "fieldlog/ingest.hpp"

#ifndef FIELDLOG_ORACLE_DATA
#error "FIELDLOG_ORACLE_DATA must point at tests/oracles/data"
#endif

namespace fieldlog::support {

struct Agreement {
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  bool loaded = false;
};

/// point_in_polygon against oracles/data/pip_cases.txt ("P lon,lat ..." rings
/// followed by "lon,lat 0|1" points).
inline Agreement pip_oracle_agreement() {
  Agreement a;
  std::ifstream in(FIELDLOG_ORACLE_DATA "/pip_cases.txt");
  if (!in) return a;
  a.loaded = true;
  auto point = [](const std::string& tok) {
    const auto comma = tok.find(',');
    return GeoPoint{std::stod(tok.substr(comma + 1)), std::stod(tok.substr(0, comma))};
  };
  std::vector<GeoPoint> ring;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "P") {
      ring.clear();
      while (ss >> tok) ring.push_back(point(tok));
      continue;
    }
    int expected = 0;
    ss >> expected;
    ++a.cases;
    if (geo::point_in_polygon(point(tok), ring) != (expected == 1)) ++a.mismatches;
  }
  return a;
}

/// nmea_checksum against oracles/data/nmea_checksums.tsv ("HEX\tpayload").
inline Agreement nmea_oracle_agreement() {
  Agreement a;
  std::ifstream in(FIELDLOG_ORACLE_DATA "/nmea_checksums.tsv");
  if (!in) return a;
  a.loaded = true;
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    ++a.cases;
    const auto expected = std::stoi(line.substr(0, tab), nullptr, 16);
    if (ingest::nmea_checksum(std::string_view(line).substr(tab + 1)) != expected) ++a.mismatches;
  }
  return a;
}

/// Arbitrary valid report, including quotes, backslashes and non-ASCII ids.
inline GatewayReport random_report(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180), spd(0, 29.999), hdg(0, 360), hdop(0, 20);
  std::uniform_int_distribution<int> coin(0, 1), rssi(kMinRssi, kMaxRssi), count(0, 6), chr('!', '~');
  std::uniform_int_distribution<std::int64_t> ms(0, 4'102'444'800'000);
  GatewayReport r;
  r.fix.machine_id = "m-" + std::to_string(count(rng)) + static_cast<char>(chr(rng));
  if (coin(rng)) r.fix.machine_id += "\"\\é";
  r.fix.t = from_unix_ms(ms(rng));
  r.fix.pos = {lat(rng), lon(rng)};
  if (coin(rng)) r.fix.speed = spd(rng);
  if (coin(rng)) r.fix.heading = hdg(rng);
  if (coin(rng)) r.fix.hdop = hdop(rng);
  const int n = count(rng);
  for (int i = 0; i < n; ++i) r.observations.push_back({"B-" + std::to_string(i) + static_cast<char>(chr(rng)), rssi(rng)});
  return r;
}

/// One to three beacon timelines (uids B-01..B-03) over 30 minutes, built from
/// random regimes: attached (-60), stray (-92), marginal (-85) and silent,
/// with sigma 4 dB noise, 5% dropout and a sub-second cadence offset.
inline std::vector<attachment::BeaconTimeline> random_timelines(std::mt19937_64& rng, Timestamp origin) {
  std::uniform_int_distribution<int> n_beacons(1, 3), regime(0, 3), len(20, 400), jitter(0, 999);
  std::normal_distribution<double> noise(0, 4);
  std::bernoulli_distribution dropout(0.05);
  static const int base[] = {-60, -92, -85, 0};
  std::vector<attachment::BeaconTimeline> out;
  const int n = n_beacons(rng);
  for (int b = 0; b < n; ++b) {
    attachment::BeaconTimeline tl{"tr-01", "B-0" + std::to_string(b + 1), {}};
    Timestamp t = origin + Millis{jitter(rng)};
    const Timestamp end = origin + Millis{1'800'000};
    while (t < end) {
      const int r = regime(rng);
      const Timestamp seg_end = t + Millis{len(rng) * 1000};
      for (; t < seg_end && t < end; t += Millis{5000}) {
        if (r == 3 || dropout(rng)) continue;
        const int v = static_cast<int>(std::lround(base[r] + noise(rng)));
        tl.samples.push_back({t, std::clamp(v, kMinRssi, kMaxRssi)});
      }
    }
    out.push_back(std::move(tl));
  }
  return out;
}

}  // namespace fieldlog::support
