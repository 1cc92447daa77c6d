// Compiled with -mavx2 only; callers reach it through runtime dispatch.
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "dyad/kernels.hpp"

namespace dyad::kernels::avx2 {

void clip_beams(const HalfPlanes& poly, const BeamFan& beams, std::span<double> enter,
                std::span<double> exit) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = beams.size();
  const std::size_t body = n - n % 4;
  std::fill_n(enter.begin(), n, -inf);
  std::fill_n(exit.begin(), n, inf);

  const __m256d zero = _mm256_setzero_pd();
  const __m256d pinf = _mm256_set1_pd(inf);
  const __m256d ninf = _mm256_set1_pd(-inf);

  for (std::size_t e = 0; e < poly.size(); ++e) {
    const double nx_s = poly.nx[e];
    const double ny_s = poly.ny[e];
    const double num_s = poly.c[e] - (nx_s * beams.origin.x + ny_s * beams.origin.y);
    const __m256d nx = _mm256_set1_pd(nx_s);
    const __m256d ny = _mm256_set1_pd(ny_s);
    const __m256d num = _mm256_set1_pd(num_s);
    const bool outside = num_s < 0.0;

    for (std::size_t i = 0; i < body; i += 4) {
      const __m256d c = _mm256_loadu_pd(beams.cos.data() + i);
      const __m256d s = _mm256_loadu_pd(beams.sin.data() + i);
      const __m256d den = _mm256_add_pd(_mm256_mul_pd(nx, c), _mm256_mul_pd(ny, s));
      const __m256d t = _mm256_div_pd(num, den);
      const __m256d pos = _mm256_cmp_pd(den, zero, _CMP_GT_OQ);
      const __m256d neg = _mm256_cmp_pd(den, zero, _CMP_LT_OQ);

      __m256d ex = _mm256_loadu_pd(exit.data() + i);
      __m256d en = _mm256_loadu_pd(enter.data() + i);
      ex = _mm256_blendv_pd(ex, _mm256_min_pd(t, ex), pos);
      en = _mm256_blendv_pd(en, _mm256_max_pd(t, en), neg);
      if (outside) {
        const __m256d par = _mm256_cmp_pd(den, zero, _CMP_EQ_OQ);
        en = _mm256_blendv_pd(en, pinf, par);
        ex = _mm256_blendv_pd(ex, ninf, par);
      }
      _mm256_storeu_pd(exit.data() + i, ex);
      _mm256_storeu_pd(enter.data() + i, en);
    }
    for (std::size_t i = body; i < n; ++i) {
      const double den = nx_s * beams.cos[i] + ny_s * beams.sin[i];
      if (den > 0.0) {
        exit[i] = std::min(exit[i], num_s / den);
      } else if (den < 0.0) {
        enter[i] = std::max(enter[i], num_s / den);
      } else if (outside) {
        enter[i] = inf;
        exit[i] = -inf;
      }
    }
  }
}

double min_threshold_margin(std::span<const double> ranges, std::span<const double> thresholds) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = ranges.size();
  const std::size_t body = n - n % 4;
  const __m256d pinf = _mm256_set1_pd(inf);
  __m256d acc = pinf;
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d r = _mm256_loadu_pd(ranges.data() + i);
    const __m256d t = _mm256_loadu_pd(thresholds.data() + i);
    const __m256d has = _mm256_cmp_pd(t, t, _CMP_ORD_Q);
    const __m256d d = _mm256_blendv_pd(pinf, _mm256_sub_pd(r, t), has);
    acc = _mm256_min_pd(d, acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double best = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
  for (std::size_t i = body; i < n; ++i) {
    if (std::isnan(thresholds[i])) continue;
    best = std::min(best, ranges[i] - thresholds[i]);
  }
  return best;
}

}  // namespace dyad::kernels::avx2
