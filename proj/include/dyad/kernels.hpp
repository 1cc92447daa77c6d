#pragma once

// Data-parallel inner loops of the shield: clipping a fan of lidar beams
// against a convex zone, and comparing a scan against per-beam thresholds.
//
// Every kernel has a scalar reference in `kernels::scalar` and, on x86-64
// builds, an AVX2 variant in `kernels::avx2`. The unqualified entry points
// dispatch once at runtime on CPU support. Both variants perform the same
// IEEE operations per lane (no FMA contraction), so results are bit-identical.

#include <span>
#include <string_view>
#include <vector>

#include "dyad/geometry.hpp"

namespace dyad::kernels {

/// Half-plane form of a convex CCW polygon: n·x <= c for every edge.
struct HalfPlanes {
  std::vector<double> nx;
  std::vector<double> ny;
  std::vector<double> c;

  static HalfPlanes from_polygon(const Polygon2& poly);
  std::size_t size() const { return c.size(); }
};

/// Beam fan sharing one origin. Directions are stored as cos/sin columns.
struct BeamFan {
  Vec2 origin;
  std::vector<double> cos;
  std::vector<double> sin;

  static BeamFan from_angles(const Vec2& origin, std::span<const double> world_angles);
  std::size_t size() const { return cos.size(); }
};

/// Per-beam chord of the polygon. A beam misses when enter > exit or exit < 0;
/// the kernel writes enter = +inf, exit = -inf for beams parallel to and
/// outside an edge.
void clip_beams(const HalfPlanes& poly, const BeamFan& beams, std::span<double> enter,
                std::span<double> exit);

/// min over beams with a finite threshold of (range - threshold); +inf when
/// no beam carries a threshold. NaN thresholds mark "no threshold".
double min_threshold_margin(std::span<const double> ranges, std::span<const double> thresholds);

enum class Isa { Scalar, Avx2 };

Isa active_isa();
bool avx2_available();
/// Overrides dispatch (tests, benchmarking). Requesting Avx2 on a CPU
/// without it falls back to Scalar.
void force_isa(Isa isa);
std::string_view isa_name(Isa isa);

namespace scalar {
void clip_beams(const HalfPlanes& poly, const BeamFan& beams, std::span<double> enter,
                std::span<double> exit);
double min_threshold_margin(std::span<const double> ranges, std::span<const double> thresholds);
}  // namespace scalar

#if defined(DYAD_HAVE_AVX2)
namespace avx2 {
void clip_beams(const HalfPlanes& poly, const BeamFan& beams, std::span<double> enter,
                std::span<double> exit);
double min_threshold_margin(std::span<const double> ranges, std::span<const double> thresholds);
}  // namespace avx2
#endif

}  // namespace dyad::kernels
