#pragma once

#include <functional>
#include <vector>

namespace dyad {

/// Axis-aligned parameter box; trial points are projected into it.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return lo.size(); }
  std::vector<double> clamp(std::vector<double> x) const;
};

struct SimplexOptions {
  double tolerance = 1e-4;      // stop when max vertex distance to the best vertex drops below
  int max_evaluations = 4000;
  double initial_step = 0.1;    // fraction of the box width per axis
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
};

/// Nelder-Mead (reflect/expand/contract/shrink) inside a box.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                          const Box& box, const SimplexOptions& opts = {});

}  // namespace dyad
