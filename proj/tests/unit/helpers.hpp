#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "fieldlog/geo.hpp"
#include "fieldlog/model.hpp"

namespace fieldlog::testing {

inline const GeoPoint kOrigin{34.95, 136.89};

/// 2024-04-01T00:00:00Z plus `s` seconds.
inline Timestamp at(double s) {
  return Timestamp{Millis{1711929600000LL + static_cast<std::int64_t>(s * 1000.0)}};
}

inline GeoPoint local(double x, double y) { return geo::LocalFrame(kOrigin).to_geo({x, y}); }

inline FieldPolygon rect_field(const std::string& id, double x0, double y0, double x1, double y1) {
  return {id, id, {local(x0, y0), local(x1, y0), local(x1, y1), local(x0, y1)}, 0.0};
}

inline Fix fix(const std::string& machine, double s, GeoPoint pos, std::optional<double> speed = std::nullopt) {
  Fix f;
  f.machine_id = machine;
  f.t = at(s);
  f.pos = pos;
  f.speed = speed;
  return f;
}

/// F [0,100]x[0,50], G [0,100]x[50,100]; planter pl-01, tractor tr-01,
/// implements rt-01 (B-01), hr-01 (B-02), pw-01 (B-03).
inline Registry small_registry(Params params = {}) {
  std::vector<Machine> machines = {
      {"pl-01", "planter", MachineClass::spv, WorkType::planting},
      {"tr-01", "tractor", MachineClass::mpv, std::nullopt},
  };
  std::vector<Implement> implements = {
      {"rt-01", "rotary tiller", "B-01", WorkType::rotary_tilling},
      {"hr-01", "harrow", "B-02", WorkType::harrowing},
      {"pw-01", "plow", "B-03", WorkType::plowing},
  };
  std::vector<FieldPolygon> fields = {rect_field("F", 0, 0, 100, 50), rect_field("G", 0, 50, 100, 100)};
  return Registry(std::move(machines), std::move(implements), std::move(fields), params);
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fieldlog-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fieldlog::testing
