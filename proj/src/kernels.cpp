#include "dyad/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace dyad::kernels {

HalfPlanes HalfPlanes::from_polygon(const Polygon2& poly) {
  HalfPlanes hp;
  const auto& v = poly.vertices;
  hp.nx.reserve(v.size());
  hp.ny.reserve(v.size());
  hp.c.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % v.size()];
    const double nx = b.y - a.y;
    const double ny = a.x - b.x;
    hp.nx.push_back(nx);
    hp.ny.push_back(ny);
    hp.c.push_back(nx * a.x + ny * a.y);
  }
  return hp;
}

BeamFan BeamFan::from_angles(const Vec2& origin, std::span<const double> world_angles) {
  BeamFan fan;
  fan.origin = origin;
  fan.cos.reserve(world_angles.size());
  fan.sin.reserve(world_angles.size());
  for (double a : world_angles) {
    fan.cos.push_back(std::cos(a));
    fan.sin.push_back(std::sin(a));
  }
  return fan;
}

namespace scalar {

void clip_beams(const HalfPlanes& poly, const BeamFan& beams, std::span<double> enter,
                std::span<double> exit) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = beams.size();
  std::fill_n(enter.begin(), n, -inf);
  std::fill_n(exit.begin(), n, inf);
  for (std::size_t e = 0; e < poly.size(); ++e) {
    const double nx = poly.nx[e];
    const double ny = poly.ny[e];
    const double num = poly.c[e] - (nx * beams.origin.x + ny * beams.origin.y);
    for (std::size_t i = 0; i < n; ++i) {
      const double den = nx * beams.cos[i] + ny * beams.sin[i];
      if (den > 0.0) {
        exit[i] = std::min(exit[i], num / den);
      } else if (den < 0.0) {
        enter[i] = std::max(enter[i], num / den);
      } else if (num < 0.0) {
        enter[i] = inf;
        exit[i] = -inf;
      }
    }
  }
}

double min_threshold_margin(std::span<const double> ranges, std::span<const double> thresholds) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const double t = thresholds[i];
    if (std::isnan(t)) continue;
    best = std::min(best, ranges[i] - t);
  }
  return best;
}

}  // namespace scalar

namespace {

Isa detect() {
  if (const char* env = std::getenv("DYAD_FORCE_SCALAR"); env != nullptr && env[0] != '\0' && env[0] != '0')
    return Isa::Scalar;
  return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool avx2_available() {
#if defined(DYAD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_available()) isa = Isa::Scalar;
  current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void clip_beams(const HalfPlanes& poly, const BeamFan& beams, std::span<double> enter,
                std::span<double> exit) {
#if defined(DYAD_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::clip_beams(poly, beams, enter, exit);
#endif
  scalar::clip_beams(poly, beams, enter, exit);
}

double min_threshold_margin(std::span<const double> ranges, std::span<const double> thresholds) {
#if defined(DYAD_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::min_threshold_margin(ranges, thresholds);
#endif
  return scalar::min_threshold_margin(ranges, thresholds);
}

}  // namespace dyad::kernels
