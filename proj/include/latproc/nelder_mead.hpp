// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "latproc/core.hpp"

namespace latproc {

struct NelderMeadResult {
  Vec x;
  double value = 0.0;
  int evaluations = 0;
};

/*
 * Derivative-free maximization of f over R^d (standard downhill simplex
 * on -f).  Deterministic: the initial simplex is built from fixed axis
 * steps around x0.  Intended for the small smooth problems that arise
 * in the M-steps (d <= ~8).
 */
inline NelderMeadResult nelder_mead_maximize(
    const std::function<double(const Vec&)>& f, const Vec& x0,
    double initial_step = 0.25, int max_evals = 4000, double tol = 1e-10) {
  const int d = static_cast<int>(x0.size());
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

  int evals = 0;
  auto neg = [&](const Vec& x) {
    ++evals;
    double v = f(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  std::vector<Vec> pts(static_cast<std::size_t>(d) + 1, x0);
  std::vector<double> vals(static_cast<std::size_t>(d) + 1);
  for (int i = 0; i < d; ++i) pts[static_cast<std::size_t>(i) + 1][i] += initial_step;
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = neg(pts[i]);

  std::vector<std::size_t> order(pts.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];
    if (std::abs(vals[worst] - vals[best]) <
        tol * (1.0 + std::abs(vals[best]))) {
      break;
    }

    Vec centroid = Vec::Zero(d);
    for (std::size_t i : order) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(d);

    Vec reflected = centroid + alpha * (centroid - pts[worst]);
    double fr = neg(reflected);
    if (fr < vals[best]) {
      Vec expanded = centroid + gamma * (reflected - centroid);
      double fe = neg(expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
    } else if (fr < vals[second_worst]) {
      pts[worst] = reflected;
      vals[worst] = fr;
    } else {
      Vec contracted = centroid + rho * (pts[worst] - centroid);
      double fc = neg(contracted);
      if (fc < vals[worst]) {
        pts[worst] = contracted;
        vals[worst] = fc;
      } else {
        for (std::size_t i : order) {
          if (i == best) continue;
          pts[i] = pts[best] + sigma * (pts[i] - pts[best]);
          vals[i] = neg(pts[i]);
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (vals[i] < vals[best]) best = i;
  }
  return {pts[best], -vals[best], evals};
}

}  // namespace latproc
