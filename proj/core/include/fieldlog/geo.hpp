#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fieldlog/model.hpp"

namespace fieldlog::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
double haversine_m(const GeoPoint& a, const GeoPoint& b) noexcept;

/// Ray casting in planar lon/lat space. Points on an edge or vertex are inside.
bool point_in_polygon(const GeoPoint& p, std::span<const GeoPoint> ring) noexcept;

/// Sum of consecutive haversine steps; 0 for fewer than two fixes.
double trajectory_length_m(std::span<const Fix> fixes) noexcept;

struct Vec2 {
  double x = 0.0;  // east, m
  double y = 0.0;  // north, m

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Equirectangular tangent plane at `origin`. Affine in both directions,
/// so straight lines and convexity in lon/lat carry over exactly.
class LocalFrame {
 public:
  explicit LocalFrame(const GeoPoint& origin) noexcept;

  [[nodiscard]] Vec2 to_local(const GeoPoint& p) const noexcept;
  [[nodiscard]] GeoPoint to_geo(const Vec2& v) const noexcept;
  [[nodiscard]] const GeoPoint& origin() const noexcept { return origin_; }

 private:
  GeoPoint origin_;
  double m_per_deg_lat_;
  double m_per_deg_lon_;
};

/// Vertex average; a convenient frame origin for a ring.
GeoPoint centroid(std::span<const GeoPoint> ring) noexcept;

/// Signed shoelace area, positive for counter-clockwise rings.
double signed_area(std::span<const Vec2> ring) noexcept;

/// Ring area in square meters, measured in a tangent plane at its centroid.
double area_m2(std::span<const GeoPoint> ring) noexcept;

/// Andrew's monotone chain. Counter-clockwise, collinear points dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

/// Sutherland-Hodgman: `subject` (any simple ring) clipped by a convex CCW `clip`.
std::vector<Vec2> clip_by_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Intersection-over-union of a simple ring with a convex CCW ring.
double iou_with_convex(std::span<const Vec2> ring, std::span<const Vec2> convex);

/// True when any two non-adjacent edges touch or cross.
bool ring_self_intersects(std::span<const GeoPoint> ring) noexcept;

/// True when the interiors of two simple rings intersect. Shared edges and
/// touching vertices are not overlap.
bool rings_overlap(std::span<const GeoPoint> a, std::span<const GeoPoint> b) noexcept;

struct BoundaryEstimate {
  std::vector<GeoPoint> ring;  // convex, counter-clockwise, >= 3 vertices
  std::size_t source_fix_count = 0;
  std::optional<double> iou_vs_registered;
};

/// Convex hull of the fixes buffered outward by swath_m / 2 (vertex offset
/// along the bisector of the adjacent edge normals). IoU is filled when a
/// registered polygon is given. Throws Error(too_few_fixes) for fewer than
/// max(3, min_fixes) fixes or a zero-area hull.
BoundaryEstimate digitize_boundary(std::span<const Fix> fixes, double swath_m,
                                   const FieldPolygon* registered = nullptr, std::size_t min_fixes = 3);

/// GeoJSON Polygon feature; properties carry field_id, source_fix_count, iou.
nlohmann::json to_geojson(const BoundaryEstimate& b, std::string_view field_id);

}  // namespace fieldlog::geo
