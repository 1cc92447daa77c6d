#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace dyad {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle in radians into (-pi, pi].
double wrap_angle(double radians);

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Planar rigid transform. Heading is kept wrapped to (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  static Pose2 identity() { return {}; }
  Vec2 translation() const { return {x, y}; }
  bool operator==(const Pose2&) const = default;
};

/// a ∘ b: b expressed in a's frame, mapped to a's parent frame.
Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 invert(const Pose2& p);
/// Expresses `b` in the frame of `a`, i.e. invert(a) ∘ b.
Pose2 relative(const Pose2& a, const Pose2& b);
Vec2 transform_point(const Pose2& frame, const Vec2& local);

/// Counter-clockwise vertex list. One or two vertices mark a degenerate hull
/// (a point or a segment).
struct Polygon2 {
  std::vector<Vec2> vertices;

  bool is_point() const { return vertices.size() == 1; }
  bool is_segment() const { return vertices.size() == 2; }
};

struct Ray {
  Vec2 origin;
  double angle = 0.0;

  Vec2 direction() const { return {std::cos(angle), std::sin(angle)}; }
};

/// Andrew's monotone chain. Collinear boundary points and duplicates are
/// dropped. Throws std::invalid_argument("empty point set") on empty input.
Polygon2 convex_hull(std::span<const Vec2> points);

double polygon_area(const Polygon2& poly);

/// Point-in-convex-polygon with an absolute slack on the signed edge test.
bool polygon_contains(const Polygon2& poly, const Vec2& p, double slack = 1e-9);

/// Distance from the ray origin to the first boundary hit, 0 when the origin
/// is inside, nullopt on a miss.
std::optional<double> ray_polygon_distance(const Ray& ray, const Polygon2& poly);

/// Distance to the far boundary of a convex polygon along the ray (the exit
/// point of the clipped chord), nullopt on a miss.
std::optional<double> ray_polygon_exit_distance(const Ray& ray, const Polygon2& poly);

/// `n` points evenly spaced on the circle, first one at angle 0.
std::vector<Vec2> circle_points(const Vec2& center, double radius, int n);

/// Radius inflation that makes an n-gon inscribed in a circle of the
/// returned radius circumscribe the original circle of `radius`.
inline double circumscribing_radius(double radius, int n) { return radius / std::cos(kPi / n); }

}  // namespace dyad
