#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace risksim::detail {

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead with standard coefficients; converged once the spread of
// function values across the simplex drops below `tolerance`. One restart
// from the optimum guards against a collapsed simplex.
inline SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                                 const std::vector<double>& steps, int max_iterations, double tolerance) {
  const std::size_t n = x0.size();
  SimplexResult result{x0, f(x0), 0, false};
  if (n == 0) {
    result.converged = true;
    return result;
  }

  auto run = [&](const std::vector<double>& start, int budget) {
    std::vector<std::vector<double>> pts(n + 1, start);
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += steps[i];
    for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

    std::vector<std::size_t> order(n + 1);
    int it = 0;
    bool done = false;
    std::vector<double> centroid(n), trial(n), trial2(n);
    auto along = [&](double t, std::vector<double>& out) {
      for (std::size_t k = 0; k < n; ++k) out[k] = centroid[k] + t * (pts[order[n]][k] - centroid[k]);
    };

    for (; it < budget; ++it) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
      if (std::abs(vals[order[n]] - vals[order[0]]) <= tolerance) {
        done = true;
        break;
      }
      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[order[i]][k] / double(n);

      const std::size_t worst = order[n];
      along(-1.0, trial);
      const double fr = f(trial);
      if (fr < vals[order[0]]) {
        along(-2.0, trial2);
        const double fe = f(trial2);
        if (fe < fr) {
          pts[worst] = trial2;
          vals[worst] = fe;
        } else {
          pts[worst] = trial;
          vals[worst] = fr;
        }
      } else if (fr < vals[order[n - 1]]) {
        pts[worst] = trial;
        vals[worst] = fr;
      } else {
        const bool outside = fr < vals[worst];
        along(outside ? -0.5 : 0.5, trial2);
        const double fc = f(trial2);
        if (fc < (outside ? fr : vals[worst])) {
          pts[worst] = trial2;
          vals[worst] = fc;
        } else {
          const auto& best = pts[order[0]];
          for (std::size_t i = 1; i <= n; ++i) {
            auto& p = pts[order[i]];
            for (std::size_t k = 0; k < n; ++k) p[k] = best[k] + 0.5 * (p[k] - best[k]);
            vals[order[i]] = f(p);
          }
        }
      }
    }
    const auto best = std::size_t(std::min_element(vals.begin(), vals.end()) - vals.begin());
    return SimplexResult{pts[best], vals[best], it, done};
  };

  // Restart from the optimum until a fresh simplex stops improving it.
  result = run(x0, max_iterations);
  while (result.converged) {
    SimplexResult again = run(result.x, max_iterations - result.iterations);
    again.iterations += result.iterations;
    const bool settled = again.converged && result.value - again.value <= tolerance;
    if (again.value <= result.value) {
      result.x = again.x;
      result.value = again.value;
    }
    result.iterations = again.iterations;
    result.converged = again.converged;
    if (settled) break;
  }
  return result;
}

}  // namespace risksim::detail
