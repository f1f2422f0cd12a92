#include "fieldlog/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

#include "fieldlog/error.hpp"
#include "fieldlog/geo.hpp"

namespace fieldlog::ingest {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

std::string_view trim_eol(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

[[noreturn]] void malformed(std::string_view what) { throw Error(ErrorCode::malformed_field, std::string(what)); }

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) malformed(what);
  return v;
}

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc{} || ptr != end) malformed(what);
  return v;
}

// ddmm.mmm / dddmm.mmm -> decimal degrees
double parse_sexagesimal(std::string_view value, std::string_view hemi, int max_deg, char pos, char neg) {
  const auto dot = value.find('.');
  const std::size_t deg_len = (dot == std::string_view::npos ? value.size() : dot);
  if (deg_len < 3 || deg_len > 5) malformed("coordinate");
  const int deg = parse_int(value.substr(0, deg_len - 2), "coordinate degrees");
  const double minutes = parse_double(value.substr(deg_len - 2), "coordinate minutes");
  if (deg < 0 || deg > max_deg || minutes < 0 || minutes >= 60.0) malformed("coordinate");
  const double out = deg + minutes / 60.0;
  if (out > max_deg) malformed("coordinate");
  if (hemi.size() != 1 || (hemi[0] != pos && hemi[0] != neg)) malformed("hemisphere");
  return hemi[0] == neg ? -out : out;
}

Timestamp parse_rmc_time(std::string_view hhmmss, std::string_view ddmmyy) {
  using namespace std::chrono;
  if (hhmmss.size() < 6 || ddmmyy.size() != 6) malformed("time/date");
  const int hh = parse_int(hhmmss.substr(0, 2), "hour");
  const int mm = parse_int(hhmmss.substr(2, 2), "minute");
  const int ss = parse_int(hhmmss.substr(4, 2), "second");
  int ms = 0;
  if (hhmmss.size() > 6) {
    if (hhmmss[6] != '.') malformed("time");
    const double frac = parse_double(hhmmss.substr(6), "time fraction");
    ms = static_cast<int>(std::lround(frac * 1000.0));
    if (ms >= 1000) ms = 999;
  }
  if (hh > 23 || mm > 59 || ss > 59 || hh < 0 || mm < 0 || ss < 0) malformed("time");
  const int dd = parse_int(ddmmyy.substr(0, 2), "day");
  const int mo = parse_int(ddmmyy.substr(2, 2), "month");
  const int yy = parse_int(ddmmyy.substr(4, 2), "year");
  const int year_full = yy >= 80 ? 1900 + yy : 2000 + yy;
  const year_month_day ymd{year{year_full}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(dd)}};
  if (!ymd.ok()) malformed("date");
  return Timestamp{duration_cast<milliseconds>(sys_days{ymd}.time_since_epoch()) + hours{hh} + minutes{mm} +
                   seconds{ss} + milliseconds{ms}};
}

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::schema_violation, what); }

std::optional<double> optional_number(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) schema(std::string("'") + key + "' must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) schema(std::string("'") + key + "' must be finite");
  return v;
}

double required_number(const nlohmann::json& j, const char* key) {
  auto v = optional_number(j, key);
  if (!v) schema(std::string("missing '") + key + "'");
  return *v;
}

void check_speed(const std::optional<double>& speed) {
  if (speed && (*speed < 0 || *speed >= kMaxMachineSpeed)) {
    throw Error(ErrorCode::speed_out_of_range, "speed " + std::to_string(*speed) + " m/s");
  }
}

}  // namespace

std::uint8_t nmea_checksum(std::string_view payload) noexcept {
  std::uint8_t acc = 0;
  for (const char c : payload) acc ^= static_cast<std::uint8_t>(c);
  return acc;
}

Fix parse_nmea_rmc(std::string_view sentence) {
  sentence = trim_eol(sentence);
  if (sentence.empty() || sentence.front() != '$') malformed("sentence must start with '$'");
  const auto star = sentence.rfind('*');
  if (star == std::string_view::npos || star + 3 != sentence.size()) malformed("missing *HH checksum");
  const int hi = hex_value(sentence[star + 1]);
  const int lo = hex_value(sentence[star + 2]);
  if (hi < 0 || lo < 0) malformed("checksum is not hex");
  const std::string_view payload = sentence.substr(1, star - 1);
  if (payload.find_first_of("$*") != std::string_view::npos) malformed("stray '$' or '*' in payload");
  if (nmea_checksum(payload) != static_cast<std::uint8_t>(hi * 16 + lo)) {
    throw Error(ErrorCode::checksum_mismatch, std::string(sentence));
  }

  const auto f = split(payload, ',');
  if (f[0].size() != 5 || f[0].substr(2) != "RMC") {
    throw Error(ErrorCode::unsupported_sentence_type, std::string(f[0]));
  }
  if (f.size() < 10) malformed("RMC needs at least 10 fields");
  if (f[2] == "V") throw Error(ErrorCode::void_fix, "status V");
  if (f[2] != "A") malformed("status");

  Fix fix;
  fix.t = parse_rmc_time(f[1], f[9]);
  fix.pos.lat = parse_sexagesimal(f[3], f[4], 90, 'N', 'S');
  fix.pos.lon = parse_sexagesimal(f[5], f[6], 180, 'E', 'W');
  if (!f[7].empty()) fix.speed = parse_double(f[7], "speed") * kKnotsToMps;
  if (!f[8].empty()) {
    const double course = parse_double(f[8], "course");
    if (course < 0 || course > 360) malformed("course");
    fix.heading = course;
  }
  check_speed(fix.speed);
  return fix;
}

NmeaStreamResult parse_nmea_stream(std::string_view machine_id, std::string_view text) {
  NmeaStreamResult out;
  for (auto line : split(text, '\n')) {
    line = trim_eol(line);
    if (line.empty()) continue;
    try {
      Fix fix = parse_nmea_rmc(line);
      fix.machine_id = std::string(machine_id);
      out.fixes.push_back(std::move(fix));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::unsupported_sentence_type) ++out.skipped;
      else ++out.rejected[std::string(to_string(e.code()))];
    }
  }
  return out;
}

GatewayReport parse_gateway_report(std::string_view line) {
  line = trim_eol(line);
  if (line.size() > kMaxLineBytes) {
    throw Error(ErrorCode::line_too_long, std::to_string(line.size()) + " bytes");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    schema(std::string("not JSON: ") + e.what());
  }
  if (!j.is_object()) schema("report must be a JSON object");

  const auto v = j.find("v");
  if (v == j.end() || !v->is_number_integer() || v->get<std::int64_t>() != 1) schema("'v' must be the integer 1");

  GatewayReport r;
  const auto machine = j.find("machine");
  if (machine == j.end() || !machine->is_string() || machine->get_ref<const std::string&>().empty()) {
    schema("'machine' must be a non-empty string");
  }
  r.fix.machine_id = machine->get<std::string>();

  const auto t = j.find("t");
  if (t == j.end() || !t->is_string()) schema("missing 't'");
  const auto ts = parse_rfc3339(t->get_ref<const std::string&>());
  if (!ts) schema("'t' is not an RFC 3339 UTC timestamp");
  r.fix.t = *ts;

  r.fix.pos.lat = required_number(j, "lat");
  r.fix.pos.lon = required_number(j, "lon");
  if (!is_valid(r.fix.pos)) throw Error(ErrorCode::coordinate_out_of_range, "lat/lon out of range");

  r.fix.speed = optional_number(j, "spd");
  check_speed(r.fix.speed);
  r.fix.heading = optional_number(j, "hdg");
  if (r.fix.heading && (*r.fix.heading < 0 || *r.fix.heading > 360)) schema("'hdg' must be in [0, 360]");
  r.fix.hdop = optional_number(j, "hdop");
  if (r.fix.hdop && *r.fix.hdop < 0) schema("'hdop' must be >= 0");

  if (const auto ble = j.find("ble"); ble != j.end() && !ble->is_null()) {
    if (!ble->is_array()) schema("'ble' must be an array");
    for (const auto& o : *ble) {
      if (!o.is_object()) schema("'ble' entries must be objects");
      const auto uid = o.find("uid");
      if (uid == o.end() || !uid->is_string() || uid->get_ref<const std::string&>().empty()) {
        schema("'uid' must be a non-empty string");
      }
      const auto rssi = o.find("rssi");
      if (rssi == o.end() || !rssi->is_number_integer()) schema("'rssi' must be an integer");
      const auto value = rssi->get<std::int64_t>();
      if (value < kMinRssi || value > kMaxRssi) {
        throw Error(ErrorCode::rssi_out_of_range, "rssi " + std::to_string(value));
      }
      const auto& id = uid->get_ref<const std::string&>();
      auto existing = std::find_if(r.observations.begin(), r.observations.end(),
                                   [&](const BleObservation& b) { return b.beacon_uid == id; });
      if (existing != r.observations.end()) {
        existing->rssi = std::max(existing->rssi, static_cast<int>(value));
      } else {
        r.observations.push_back({id, static_cast<int>(value)});
      }
    }
  }
  return r;
}

std::string serialize_gateway_report(const GatewayReport& report) {
  nlohmann::ordered_json j;
  j["v"] = 1;
  j["machine"] = report.fix.machine_id;
  j["t"] = format_rfc3339(report.fix.t);
  j["lat"] = report.fix.pos.lat;
  j["lon"] = report.fix.pos.lon;
  if (report.fix.speed) j["spd"] = *report.fix.speed;
  if (report.fix.heading) j["hdg"] = *report.fix.heading;
  if (report.fix.hdop) j["hdop"] = *report.fix.hdop;
  auto ble = nlohmann::ordered_json::array();
  for (const auto& o : report.observations) {
    nlohmann::ordered_json e;
    e["uid"] = o.beacon_uid;
    e["rssi"] = o.rssi;
    ble.push_back(std::move(e));
  }
  j["ble"] = std::move(ble);
  return j.dump();
}

bool StreamValidator::accept(const Fix& fix) {
  if (last_ && fix.t <= last_->t) {
    ++drops_.non_monotone;
    return false;
  }
  if (fix.hdop && *fix.hdop > kMaxHdop) {
    ++drops_.hdop;
    return false;
  }
  if (last_) {
    const double dt = seconds_between(last_->t, fix.t);
    if (geo::haversine_m(last_->pos, fix.pos) / dt > kMaxMachineSpeed) {
      ++drops_.implied_speed;
      return false;
    }
  }
  last_ = fix;
  return true;
}

std::vector<Fix> validate_stream(std::span<const Fix> fixes, DropCounters* drops) {
  StreamValidator v;
  std::vector<Fix> out;
  out.reserve(fixes.size());
  for (const auto& f : fixes) {
    if (v.accept(f)) out.push_back(f);
  }
  if (drops != nullptr) *drops = v.drops();
  return out;
}

}  // namespace fieldlog::ingest
