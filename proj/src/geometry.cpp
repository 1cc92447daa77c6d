#include "dyad/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace dyad {

double wrap_angle(double radians) {
  double a = std::remainder(radians, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, wrap_angle(a.theta + b.theta)};
}

Pose2 invert(const Pose2& p) {
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  return {-c * p.x - s * p.y, s * p.x - c * p.y, wrap_angle(-p.theta)};
}

Pose2 relative(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(b.theta - a.theta)};
}

Vec2 transform_point(const Pose2& frame, const Vec2& local) {
  const double c = std::cos(frame.theta);
  const double s = std::sin(frame.theta);
  return {frame.x + c * local.x - s * local.y, frame.y + s * local.x + c * local.y};
}

Polygon2 convex_hull(std::span<const Vec2> points) {
  if (points.empty()) throw std::invalid_argument("empty point set");

  std::vector<Vec2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return {pts};

  auto turn = [](const Vec2& o, const Vec2& a, const Vec2& b) { return (a - o).cross(b - o); };

  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  // All input points collinear: monotone chain returns the two extremes.
  return {hull};
}

double polygon_area(const Polygon2& poly) {
  const auto& v = poly.vertices;
  if (v.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) twice += v[i].cross(v[(i + 1) % v.size()]);
  return 0.5 * twice;
}

bool polygon_contains(const Polygon2& poly, const Vec2& p, double slack) {
  const auto& v = poly.vertices;
  if (v.size() == 1) return distance(v[0], p) <= slack;
  if (v.size() == 2) {
    const Vec2 d = v[1] - v[0];
    const double len = d.norm();
    const double t = std::clamp((p - v[0]).dot(d) / (len * len), 0.0, 1.0);
    return distance(v[0] + d * t, p) <= slack;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % v.size()];
    const Vec2 e = b - a;
    // Signed distance of p to the left of edge a->b.
    if (e.cross(p - a) / e.norm() < -slack) return false;
  }
  return true;
}

namespace {

struct Chord {
  double enter;
  double exit;
};

// Parametric intersection of ray (o + t u) with segment a-b; collinear
// overlaps yield the covered interval.
std::optional<Chord> clip_segment(const Vec2& o, const Vec2& u, const Vec2& a, const Vec2& b) {
  constexpr double eps = 1e-12;
  const Vec2 e = b - a;
  const double denom = u.cross(e);
  const Vec2 w = a - o;
  if (std::abs(denom) < eps) {
    if (std::abs(w.cross(u)) > eps * std::max(1.0, w.norm())) return std::nullopt;
    const double ta = w.dot(u);
    const double tb = (b - o).dot(u);
    const double lo = std::min(ta, tb);
    const double hi = std::max(ta, tb);
    if (hi < 0.0) return std::nullopt;
    return Chord{std::max(lo, 0.0), hi};
  }
  const double t = w.cross(e) / denom;
  const double s = w.cross(u) / denom;
  if (t < 0.0 || s < -eps || s > 1.0 + eps) return std::nullopt;
  return Chord{t, t};
}

std::optional<Chord> clip_ray(const Ray& ray, const Polygon2& poly) {
  const auto& v = poly.vertices;
  const Vec2 o = ray.origin;
  const Vec2 u = ray.direction();
  if (v.empty()) return std::nullopt;
  if (v.size() == 1) {
    const Vec2 w = v[0] - o;
    const double t = w.dot(u);
    if (t < 0.0 || std::abs(w.cross(u)) > 1e-12 * std::max(1.0, w.norm())) return std::nullopt;
    return Chord{t, t};
  }
  if (v.size() == 2) return clip_segment(o, u, v[0], v[1]);

  // Cyrus-Beck against the CCW polygon's half-planes.
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % v.size()];
    const Vec2 n{b.y - a.y, a.x - b.x};  // outward normal for CCW order
    const double num = n.dot(a - o);      // >= 0 when o is on the inner side
    const double den = n.dot(u);
    if (den == 0.0) {
      if (num < 0.0) return std::nullopt;
      continue;
    }
    const double t = num / den;
    if (den > 0.0)
      t_exit = std::min(t_exit, t);
    else
      t_enter = std::max(t_enter, t);
  }
  if (t_enter > t_exit || t_exit < 0.0) return std::nullopt;
  return Chord{std::max(t_enter, 0.0), t_exit};
}

}  // namespace

std::optional<double> ray_polygon_distance(const Ray& ray, const Polygon2& poly) {
  const auto chord = clip_ray(ray, poly);
  if (!chord) return std::nullopt;
  return chord->enter;
}

std::optional<double> ray_polygon_exit_distance(const Ray& ray, const Polygon2& poly) {
  const auto chord = clip_ray(ray, poly);
  if (!chord) return std::nullopt;
  return chord->exit;
}

std::vector<Vec2> circle_points(const Vec2& center, double radius, int n) {
  if (!(radius > 0.0)) throw std::invalid_argument("circle_points: radius must be positive");
  if (n < 3) throw std::invalid_argument("circle_points: need at least 3 samples");
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n;
    out.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  return out;
}

}  // namespace dyad
