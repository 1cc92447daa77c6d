#include "dyad/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dyad {

std::vector<double> Box::clamp(std::vector<double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
  return x;
}

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                          const Box& box, const SimplexOptions& opts) {
  const std::size_t n = x0.size();
  if (n == 0 || box.dim() != n) throw std::invalid_argument("nelder_mead: dimension mismatch");

  SimplexResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };

  std::vector<std::vector<double>> simplex;
  std::vector<double> values;
  simplex.push_back(box.clamp(std::move(x0)));
  for (std::size_t i = 0; i < n; ++i) {
    auto v = simplex.front();
    const double step = opts.initial_step * (box.hi[i] - box.lo[i]);
    // Step away from the nearer bound so the vertex stays distinct after clamping.
    v[i] += (v[i] + step <= box.hi[i]) ? step : -step;
    simplex.push_back(box.clamp(std::move(v)));
  }
  for (const auto& v : simplex) values.push_back(eval(v));

  std::vector<std::size_t> order(n + 1);
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = simplex[order[k]][i] - simplex[order[0]][i];
        s += e * e;
      }
      d = std::max(d, std::sqrt(s));
    }
    return d;
  };

  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    if (diameter() < opts.tolerance || res.evaluations >= opts.max_evaluations) break;
    ++res.iterations;

    const std::size_t worst = order[n];
    const std::size_t second = order[n - 1];
    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[order[k]][i] / static_cast<double>(n);

    auto along = [&](double coef) {
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + coef * (simplex[worst][i] - centroid[i]);
      return box.clamp(std::move(p));
    };

    const auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < values[order[0]]) {
      const auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = xr;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const auto xc = along(outside ? -0.5 : 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = xc;
      values[worst] = fc;
      continue;
    }
    const auto& best = simplex[order[0]];
    for (std::size_t k = 1; k <= n; ++k) {
      auto& v = simplex[order[k]];
      for (std::size_t i = 0; i < n; ++i) v[i] = best[i] + 0.5 * (v[i] - best[i]);
      values[order[k]] = eval(v);
    }
  }

  res.x = simplex[order[0]];
  res.value = values[order[0]];
  return res;
}

}  // namespace dyad
