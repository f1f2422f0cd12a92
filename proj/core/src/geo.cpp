#include "fieldlog/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fieldlog/error.hpp"

namespace fieldlog::geo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double cross(double ax, double ay, double bx, double by) noexcept { return ax * by - ay * bx; }

double cross(const Vec2& o, const Vec2& a, const Vec2& b) noexcept {
  return cross(a.x - o.x, a.y - o.y, b.x - o.x, b.y - o.y);
}

// Distance tolerance for on-edge tests in degrees (~0.1 micrometre).
constexpr double kEdgeEpsDeg = 1e-12;

bool on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) noexcept {
  const double ex = b.lon - a.lon;
  const double ey = b.lat - a.lat;
  const double len = std::hypot(ex, ey);
  const double c = cross(ex, ey, p.lon - a.lon, p.lat - a.lat);
  if (len == 0.0) return p == a;
  if (std::abs(c) / len > kEdgeEpsDeg) return false;
  const double dot = (p.lon - a.lon) * ex + (p.lat - a.lat) * ey;
  return dot >= -kEdgeEpsDeg * len && dot <= len * len + kEdgeEpsDeg * len;
}

int orientation(const GeoPoint& a, const GeoPoint& b, const GeoPoint& c) noexcept {
  const double v = cross(b.lon - a.lon, b.lat - a.lat, c.lon - a.lon, c.lat - a.lat);
  if (v > 0) return 1;
  if (v < 0) return -1;
  return 0;
}

bool segments_touch(const GeoPoint& p1, const GeoPoint& p2, const GeoPoint& q1, const GeoPoint& q2) noexcept {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  return on_segment(q1, p1, p2) || on_segment(q2, p1, p2) || on_segment(p1, q1, q2) || on_segment(p2, q1, q2);
}

bool segments_cross_properly(const GeoPoint& p1, const GeoPoint& p2, const GeoPoint& q1,
                             const GeoPoint& q2) noexcept {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

bool on_boundary(const GeoPoint& p, std::span<const GeoPoint> ring) noexcept {
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    if (on_segment(p, ring[j], ring[i])) return true;
  }
  return false;
}

bool strictly_inside(const GeoPoint& p, std::span<const GeoPoint> ring) noexcept {
  return point_in_polygon(p, ring) && !on_boundary(p, ring);
}

}  // namespace

double haversine_m(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double p1 = a.lat * kDegToRad;
  const double p2 = b.lat * kDegToRad;
  const double dp = p2 - p1;
  const double dl = (b.lon - a.lon) * kDegToRad;
  const double h = std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

bool point_in_polygon(const GeoPoint& p, std::span<const GeoPoint> ring) noexcept {
  if (ring.size() < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const GeoPoint& a = ring[j];
    const GeoPoint& b = ring[i];
    if (on_segment(p, a, b)) return true;
    if ((b.lat > p.lat) != (a.lat > p.lat)) {
      const double x = b.lon + (p.lat - b.lat) * (a.lon - b.lon) / (a.lat - b.lat);
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

double trajectory_length_m(std::span<const Fix> fixes) noexcept {
  double total = 0.0;
  for (std::size_t i = 1; i < fixes.size(); ++i) total += haversine_m(fixes[i - 1].pos, fixes[i].pos);
  return total;
}

LocalFrame::LocalFrame(const GeoPoint& origin) noexcept
    : origin_(origin),
      m_per_deg_lat_(kEarthRadiusM * kDegToRad),
      m_per_deg_lon_(kEarthRadiusM * kDegToRad * std::cos(origin.lat * kDegToRad)) {}

Vec2 LocalFrame::to_local(const GeoPoint& p) const noexcept {
  return {(p.lon - origin_.lon) * m_per_deg_lon_, (p.lat - origin_.lat) * m_per_deg_lat_};
}

GeoPoint LocalFrame::to_geo(const Vec2& v) const noexcept {
  return {origin_.lat + v.y / m_per_deg_lat_, origin_.lon + v.x / m_per_deg_lon_};
}

GeoPoint centroid(std::span<const GeoPoint> ring) noexcept {
  GeoPoint c{0.0, 0.0};
  if (ring.empty()) return c;
  for (const auto& p : ring) {
    c.lat += p.lat;
    c.lon += p.lon;
  }
  c.lat /= static_cast<double>(ring.size());
  c.lon /= static_cast<double>(ring.size());
  return c;
}

double signed_area(std::span<const Vec2> ring) noexcept {
  double a = 0.0;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    a += cross(ring[j].x, ring[j].y, ring[i].x, ring[i].y);
  }
  return ring.size() < 3 ? 0.0 : a / 2.0;
}

double area_m2(std::span<const GeoPoint> ring) noexcept {
  if (ring.size() < 3) return 0.0;
  const LocalFrame frame(centroid(ring));
  std::vector<Vec2> local;
  local.reserve(ring.size());
  for (const auto& p : ring) local.push_back(frame.to_local(p));
  return std::abs(signed_area(local));
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<Vec2> clip_by_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  for (std::size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const Vec2& a = clip[i];
    const Vec2& b = clip[(i + 1) % clip.size()];
    const auto input = std::move(output);
    output.clear();
    auto inside = [&](const Vec2& p) { return cross(a, b, p) >= 0; };
    auto intersect = [&](const Vec2& p, const Vec2& q) {
      const double d1 = cross(a, b, p);
      const double d2 = cross(a, b, q);
      const double t = d1 / (d1 - d2);
      return Vec2{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
    };
    for (std::size_t j = 0; j < input.size(); ++j) {
      const Vec2& cur = input[j];
      const Vec2& prev = input[(j + input.size() - 1) % input.size()];
      if (inside(cur)) {
        if (!inside(prev)) output.push_back(intersect(prev, cur));
        output.push_back(cur);
      } else if (inside(prev)) {
        output.push_back(intersect(prev, cur));
      }
    }
  }
  return output;
}

double iou_with_convex(std::span<const Vec2> ring, std::span<const Vec2> convex) {
  std::vector<Vec2> subject(ring.begin(), ring.end());
  if (signed_area(subject) < 0) std::reverse(subject.begin(), subject.end());
  const double a = std::abs(signed_area(subject));
  const double b = std::abs(signed_area(convex));
  const auto inter = clip_by_convex(subject, convex);
  const double i = inter.size() < 3 ? 0.0 : std::abs(signed_area(inter));
  const double u = a + b - i;
  return u > 0 ? i / u : 0.0;
}

bool ring_self_intersects(std::span<const GeoPoint> ring) noexcept {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const GeoPoint& a1 = ring[i];
    const GeoPoint& a2 = ring[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_touch(a1, a2, ring[j], ring[(j + 1) % n])) return true;
    }
  }
  // Adjacent edges folding back onto each other.
  for (std::size_t i = 0; i < n; ++i) {
    const GeoPoint& prev = ring[(i + n - 1) % n];
    const GeoPoint& cur = ring[i];
    const GeoPoint& next = ring[(i + 1) % n];
    if (orientation(prev, cur, next) == 0) {
      const double dot = (cur.lon - prev.lon) * (next.lon - cur.lon) + (cur.lat - prev.lat) * (next.lat - cur.lat);
      if (dot < 0) return true;
    }
  }
  return false;
}

bool rings_overlap(std::span<const GeoPoint> a, std::span<const GeoPoint> b) noexcept {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (segments_cross_properly(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()])) return true;
    }
  }
  auto probes_inside = [](std::span<const GeoPoint> from, std::span<const GeoPoint> into) {
    for (std::size_t i = 0; i < from.size(); ++i) {
      const GeoPoint& p = from[i];
      const GeoPoint& q = from[(i + 1) % from.size()];
      const GeoPoint mid{(p.lat + q.lat) / 2, (p.lon + q.lon) / 2};
      if (strictly_inside(p, into) || strictly_inside(mid, into)) return true;
    }
    const GeoPoint c = centroid(from);
    return strictly_inside(c, from) && strictly_inside(c, into);
  };
  return probes_inside(a, b) || probes_inside(b, a);
}

BoundaryEstimate digitize_boundary(std::span<const Fix> fixes, double swath_m, const FieldPolygon* registered,
                                   std::size_t min_fixes) {
  const std::size_t needed = std::max<std::size_t>(3, min_fixes);
  if (fixes.size() < needed) {
    throw Error(ErrorCode::too_few_fixes,
                "need at least " + std::to_string(needed) + " fixes, got " + std::to_string(fixes.size()));
  }

  std::vector<GeoPoint> positions;
  positions.reserve(fixes.size());
  for (const auto& f : fixes) positions.push_back(f.pos);
  const LocalFrame frame(centroid(positions));

  std::vector<Vec2> local;
  local.reserve(positions.size());
  for (const auto& p : positions) local.push_back(frame.to_local(p));
  const auto hull = convex_hull(std::move(local));
  if (hull.size() < 3 || signed_area(hull) < 1e-6) {
    throw Error(ErrorCode::too_few_fixes, "fixes are collinear; hull has no area");
  }

  const double offset = swath_m / 2.0;
  std::vector<Vec2> buffered;
  buffered.reserve(hull.size());
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& prev = hull[(i + n - 1) % n];
    const Vec2& cur = hull[i];
    const Vec2& next = hull[(i + 1) % n];
    auto outward = [](const Vec2& a, const Vec2& b) {
      const double dx = b.x - a.x;
      const double dy = b.y - a.y;
      const double len = std::hypot(dx, dy);
      return Vec2{dy / len, -dx / len};
    };
    const Vec2 n1 = outward(prev, cur);
    const Vec2 n2 = outward(cur, next);
    Vec2 bis{n1.x + n2.x, n1.y + n2.y};
    const double blen = std::hypot(bis.x, bis.y);
    bis = blen > 0 ? Vec2{bis.x / blen, bis.y / blen} : n1;
    // Miter length, capped for very sharp corners.
    const double cos_half = std::max(0.25, bis.x * n1.x + bis.y * n1.y);
    const double miter = offset / cos_half;
    buffered.push_back({cur.x + bis.x * miter, cur.y + bis.y * miter});
  }
  const auto ring_local = convex_hull(std::move(buffered));

  BoundaryEstimate out;
  out.source_fix_count = fixes.size();
  out.ring.reserve(ring_local.size());
  for (const auto& v : ring_local) out.ring.push_back(frame.to_geo(v));

  if (registered != nullptr && registered->ring.size() >= 3) {
    std::vector<Vec2> reg;
    reg.reserve(registered->ring.size());
    for (const auto& p : registered->ring) reg.push_back(frame.to_local(p));
    out.iou_vs_registered = iou_with_convex(reg, ring_local);
  }
  return out;
}

nlohmann::json to_geojson(const BoundaryEstimate& b, std::string_view field_id) {
  nlohmann::json ring = nlohmann::json::array();
  for (const auto& p : b.ring) ring.push_back({p.lon, p.lat});
  if (!b.ring.empty()) ring.push_back({b.ring.front().lon, b.ring.front().lat});

  nlohmann::json props = {{"field_id", field_id}, {"source_fix_count", b.source_fix_count}};
  props["iou_vs_registered"] = b.iou_vs_registered ? nlohmann::json(*b.iou_vs_registered) : nlohmann::json(nullptr);
  return {
      {"type", "Feature"},
      {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}}},
      {"properties", props},
  };
}

}  // namespace fieldlog::geo
